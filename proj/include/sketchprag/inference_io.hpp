#pragma once

#include "sketchprag/inference.hpp"
#include "sketchprag/io.hpp"

namespace sketchprag::inference {

// posterior_{variant}_{fold}.json: axes, supports, row-major log_lik
// (w_i, w_c, w_d, alpha), marginal log-likelihood, and caller metadata.
io::Json posterior_to_json(const GridPosterior& gp, const io::Json& meta = io::Json::object());
GridPosterior posterior_from_json(const io::Json& j);

// chain_{variant}_{fold}.json: samples, acceptance rate, config.
io::Json chain_to_json(const McmcChain& chain, const io::Json& meta = io::Json::object());
McmcChain chain_from_json(const io::Json& j);

io::Json prior_to_json(const PriorSpec& prior);

}  // namespace sketchprag::inference
