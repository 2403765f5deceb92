#include "tke/models/norms.hpp"

#include <cmath>

#include "tke/error.hpp"

namespace tke {

bool NormChain::holds(double rel_tol) const {
  const double slack = rel_tol * sqrt_n_l2;
  return l2 <= l1 + slack && l1 <= sqrt_n_l2 + slack;
}

NormChain norm_chain_check(std::span<const double> w) {
  if (w.empty()) throw Error(ErrorCode::empty_input, "norm chain needs at least one weight");
  double l1 = 0, sq = 0;
  for (double v : w) {
    l1 += std::abs(v);
    sq += v * v;
  }
  const double l2 = std::sqrt(sq);
  return {l2, l1, std::sqrt(static_cast<double>(w.size())) * l2};
}

double l1_penalty(std::span<const double> w, double lambda) {
  double s = 0;
  for (double v : w) s += std::abs(v);
  return lambda * s;
}

double l2_penalty(std::span<const double> w, double lambda) {
  double s = 0;
  for (double v : w) s += v * v;
  return 0.5 * lambda * s;
}

double elastic_net_penalty(std::span<const double> w, double lambda1, double lambda2) {
  return l1_penalty(w, lambda1) + l2_penalty(w, lambda2);
}

double soft_threshold(double g, double threshold) {
  const double shrunk = std::abs(g) - threshold;
  if (shrunk <= 0) return 0.0;
  return g > 0 ? shrunk : -shrunk;
}

}  // namespace tke
