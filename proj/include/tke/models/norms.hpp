#pragma once

#include <span>

namespace tke {

// ||w||_2 <= ||w||_1 <= sqrt(n) ||w||_2
struct NormChain {
  double l2 = 0.0;
  double l1 = 0.0;
  double sqrt_n_l2 = 0.0;

  // The chain up to a relative slack for rounding.
  bool holds(double rel_tol = 1e-12) const;
};

NormChain norm_chain_check(std::span<const double> w);

// Penalty terms of the regularized objectives.
double l1_penalty(std::span<const double> w, double lambda);
double l2_penalty(std::span<const double> w, double lambda);
double elastic_net_penalty(std::span<const double> w, double lambda1, double lambda2);

// sign(g) * max(|g| - threshold, 0)
double soft_threshold(double g, double threshold);

}  // namespace tke
