#include "sketchprag/inference_io.hpp"

#include "sketchprag/error.hpp"

namespace sketchprag::inference {

io::Json posterior_to_json(const GridPosterior& gp, const io::Json& meta) {
  io::Json axes = io::Json::object();
  io::Json support = io::Json::object();
  for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
    const std::string name(kParamNames[p]);
    axes[name] = gp.axes()[p];
    support[name] = {gp.support()[p].first, gp.support()[p].second};
  }
  io::Json j = {
      {"variant", std::string(variant_name(gp.variant()))},
      {"axis_order", {"w_i", "w_c", "w_d", "alpha"}},
      {"axes", axes},
      {"support", support},
      {"log_lik", gp.log_lik()},
      {"marginal_loglik", marginal_loglik(gp)},
  };
  for (const auto& [k, v] : meta.items()) j[k] = v;
  return j;
}

GridPosterior posterior_from_json(const io::Json& j) {
  try {
    GridPosterior::Axes axes;
    GridPosterior::Support support;
    for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
      const std::string name(kParamNames[p]);
      axes[p] = j.at("axes").at(name).get<std::vector<double>>();
      const auto s = j.at("support").at(name).get<std::vector<double>>();
      if (s.size() != 2) fail(ErrorKind::kParseError, "support must be [lo, hi]");
      support[p] = {s[0], s[1]};
    }
    return GridPosterior(std::move(axes), support,
                         j.at("log_lik").get<std::vector<double>>(),
                         parse_variant(j.at("variant").get<std::string>()));
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("posterior json: ") + e.what());
  }
}

io::Json chain_to_json(const McmcChain& chain, const io::Json& meta) {
  io::Json samples = io::Json::array();
  for (const ParamVector& s : chain.samples) samples.push_back({s.w_i, s.w_c, s.w_d, s.alpha});
  io::Json j = {
      {"variant", std::string(variant_name(chain.variant))},
      {"sample_order", {"w_i", "w_c", "w_d", "alpha"}},
      {"samples", samples},
      {"acceptance_rate", chain.acceptance_rate},
      {"warnings", chain.warnings},
      {"config",
       {{"n_samples", chain.config.n_samples},
        {"burn_in", chain.config.burn_in},
        {"proposal_scale", chain.config.proposal_scale},
        {"seed", chain.config.seed}}},
  };
  for (const auto& [k, v] : meta.items()) j[k] = v;
  return j;
}

McmcChain chain_from_json(const io::Json& j) {
  try {
    McmcChain c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    for (const auto& s : j.at("samples")) {
      const auto v = s.get<std::vector<double>>();
      if (v.size() != ParamVector::kSize) fail(ErrorKind::kParseError, "sample must have 4 entries");
      c.samples.push_back({v[0], v[1], v[2], v[3]});
    }
    c.acceptance_rate = j.at("acceptance_rate").get<double>();
    c.warnings = j.value("warnings", std::vector<std::string>{});
    const auto& cfg = j.at("config");
    c.config.n_samples = cfg.at("n_samples").get<int>();
    c.config.burn_in = cfg.at("burn_in").get<int>();
    c.config.proposal_scale = cfg.at("proposal_scale").get<double>();
    c.config.seed = cfg.at("seed").get<std::uint64_t>();
    return c;
  } catch (const io::Json::exception& e) {
    fail(ErrorKind::kParseError, std::string("chain json: ") + e.what());
  }
}

io::Json prior_to_json(const PriorSpec& prior) {
  io::Json j = io::Json::object();
  for (std::size_t p = 0; p < ParamVector::kSize; ++p) {
    j[std::string(kParamNames[p])] = {{"lo", prior.axes[p].lo},
                                      {"hi", prior.axes[p].hi},
                                      {"points", prior.axes[p].points.size()}};
  }
  return j;
}

}  // namespace sketchprag::inference
