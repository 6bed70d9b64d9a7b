#pragma once

// Small fixtures shared by the unit tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "sketchprag/corpus.hpp"
#include "sketchprag/error.hpp"
#include "sketchprag/rsa.hpp"

#define CHECK_THROWS_KIND(expr, expected_kind)                      \
  do {                                                              \
    bool thrown_ = false;                                           \
    try {                                                           \
      (void)(expr);                                                 \
    } catch (const ::sketchprag::Error& e_) {                       \
      thrown_ = true;                                               \
      CHECK(e_.kind() == (expected_kind));                          \
    }                                                               \
    CHECK_MESSAGE(thrown_, "expected an exception from " #expr);    \
  } while (0)

namespace sketchprag::testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("sketchprag_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_simplex(std::size_t n, std::mt19937_64& rng, double spread = 2.0) {
  std::normal_distribution<double> g(0.0, spread);
  std::vector<double> v(n);
  double z = 0.0;
  for (double& x : v) z += (x = std::exp(g(rng)));
  for (double& x : v) x /= z;
  return v;
}

inline CorrespondenceTable random_table(std::size_t n_objects, std::mt19937_64& rng,
                                        double spread = 2.0) {
  std::vector<double> scores;
  for (std::size_t r = 0; r < 2 * n_objects; ++r) {
    const auto row = random_simplex(n_objects, rng, spread);
    scores.insert(scores.end(), row.begin(), row.end());
  }
  return CorrespondenceTable(Source::kHumanRecog, n_objects, std::move(scores));
}

inline CostVector random_costs(std::size_t n_objects, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> c(2 * n_objects);
  for (double& x : c) x = u(rng);
  c[0] = 0.0;
  c[1] = 1.0;
  return CostVector(std::move(c));
}

// A context over objects 0..3 with target 0.
inline Context first_four(Condition cond = Condition::kClose) {
  return Context{0, {1, 2, 3}, cond};
}

inline double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace sketchprag::testing
