#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "trajgrid/autodiff.hpp"

namespace trajgrid {

// Compares reverse-mode gradients against central finite differences on a
// sampled subset of parameter coordinates (at least 64, or all when fewer).
//
// loss_fn(true) must rebuild the graph, run backward, and leave gradients in
// the parameters; loss_fn(false) must only return the loss value. Run this at
// 64-bit precision. Error metric: |a - n| / max(1, |a|, |n|).
inline double grad_check(const std::function<double(bool)>& loss_fn, ParamSet<double>& params,
                         double eps = 1e-5, int min_coords = 64, uint64_t seed = 17) {
  params.zero_grads();
  loss_fn(true);

  struct Coord {
    Ref<double> tensor;
    size_t index;
    double analytic;
  };
  std::vector<Coord> all;
  for (auto& [name, p] : params.entries) {
    if (!p->requires_grad) continue;
    for (size_t i = 0; i < p->size(); ++i) all.push_back({p, i, p->grad[i]});
  }

  std::vector<Coord> picked;
  if (static_cast<int>(all.size()) <= min_coords) {
    picked = all;
  } else {
    Rng rng(seed);
    std::vector<uint8_t> taken(all.size(), 0);
    while (static_cast<int>(picked.size()) < min_coords) {
      int i = rng.uniform_int(static_cast<int>(all.size()));
      if (taken[i]) continue;
      taken[i] = 1;
      picked.push_back(all[i]);
    }
  }

  double max_rel = 0.0;
  for (const auto& c : picked) {
    const double saved = c.tensor->value[c.index];
    c.tensor->value[c.index] = saved + eps;
    const double lp = loss_fn(false);
    c.tensor->value[c.index] = saved - eps;
    const double lm = loss_fn(false);
    c.tensor->value[c.index] = saved;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double rel =
        std::abs(c.analytic - numeric) / std::max({1.0, std::abs(c.analytic), std::abs(numeric)});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace trajgrid
