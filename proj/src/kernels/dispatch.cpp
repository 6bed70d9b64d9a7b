#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace sketchprag::kernels {

namespace {

const KernelTable kScalarTable{
    Isa::kScalar,     scalar::dot,       scalar::axpy,
    scalar::gemv,     scalar::gemv_t_acc, scalar::ger,
    scalar::exp,      scalar::logsumexp, scalar::lse_affine3,
    scalar::swish,
};

#ifdef SKETCHPRAG_HAVE_AVX2
const KernelTable kAvx2Table{
    Isa::kAvx2,     avx2::dot,       avx2::axpy,        avx2::gemv,
    avx2::gemv_t_acc, avx2::ger,     avx2::exp,         avx2::logsumexp,
    avx2::lse_affine3, avx2::swish,
};
#endif

const KernelTable* select_default() {
  const char* env = std::getenv("SKETCHPRAG_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar") return &kScalarTable;
  if (const KernelTable* t = avx2_table()) return t;
  return &kScalarTable;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& scalar_table() { return kScalarTable; }

const KernelTable* avx2_table() {
#ifdef SKETCHPRAG_HAVE_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (isa == Isa::kAvx2 && avx2_table() != nullptr) {
    current().store(avx2_table());
  } else {
    current().store(&kScalarTable);
  }
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

}  // namespace sketchprag::kernels
