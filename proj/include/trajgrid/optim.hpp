#pragma once

#include <cmath>

#include "trajgrid/autodiff.hpp"
#include "trajgrid/common.hpp"

namespace trajgrid {

// Plain SGD with stepwise learning-rate decay:
// lr(step) = base_lr * decay_factor^floor(step / decay_interval).
struct OptimState {
  double base_lr = 0.005;
  double decay_factor = 0.8;
  long decay_interval = 10000;
  long step_count = 0;

  void validate() const {
    if (base_lr <= 0.0) throw ConfigError("OptimState: base_lr must be positive");
    if (decay_factor <= 0.0 || decay_factor > 1.0)
      throw ConfigError("OptimState: decay_factor must be in (0,1]");
    if (decay_interval < 1) throw ConfigError("OptimState: decay_interval must be >= 1");
  }

  double lr() const { return lr_at(step_count); }
  double lr_at(long step) const {
    return base_lr * std::pow(decay_factor, static_cast<double>(step / decay_interval));
  }
};

// One update per batch: p <- p - lr(step) * g, then the step counter advances.
template <typename T>
void sgd_step(ParamSet<T>& params, OptimState& state) {
  state.validate();
  const T lr = static_cast<T>(state.lr());
  for (auto& [name, p] : params.entries) {
    if (!p->requires_grad) continue;
    for (size_t i = 0; i < p->size(); ++i) p->value[i] -= lr * p->grad[i];
  }
  ++state.step_count;
}

}  // namespace trajgrid
