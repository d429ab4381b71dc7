#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "trajgrid/common.hpp"

namespace trajgrid {

// Deterministic RNG. Conversions are hand-rolled so that a seed pins the
// exact stream independently of library distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }
  double uniform() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }  // [0,1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

 private:
  std::mt19937_64 gen_;
};

inline size_t numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;

  size_t size() const { return value.size(); }
};

template <typename T>
using Ref = std::shared_ptr<Tensor<T>>;

template <typename T>
Ref<T> make_tensor(std::vector<int> shape, bool requires_grad = false) {
  auto t = std::make_shared<Tensor<T>>();
  t->shape = std::move(shape);
  size_t n = numel(t->shape);
  t->value.assign(n, T(0));
  t->grad.assign(n, T(0));
  t->requires_grad = requires_grad;
  return t;
}

template <typename T>
void zero_grad(const Ref<T>& t) {
  std::fill(t->grad.begin(), t->grad.end(), T(0));
}

// Reverse-mode record: ops are appended in forward (topological) order and
// replayed in reverse. One tape per loss evaluation; parameters outlive tapes.
template <typename T>
class Tape {
 public:
  Ref<T> tensor(std::vector<int> shape) {
    auto t = make_tensor<T>(std::move(shape));
    return t;
  }

  void record(std::function<void()> backward_op) { ops_.push_back(std::move(backward_op)); }

  void backward(const Ref<T>& root) {
    if (root->size() != 1) throw DimensionError("backward: root must be a scalar");
    root->grad[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  size_t op_count() const { return ops_.size(); }
  void clear() { ops_.clear(); }

 private:
  std::vector<std::function<void()>> ops_;
};

namespace ad {

template <typename T>
void check_same_numel(const Ref<T>& a, const Ref<T>& b, const char* what) {
  if (a->size() != b->size()) throw DimensionError(std::string(what) + ": size mismatch");
}

template <typename T>
Ref<T> add(Tape<T>& tape, const Ref<T>& a, const Ref<T>& b) {
  check_same_numel(a, b, "add");
  auto out = tape.tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] + b->value[i];
  tape.record([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i];
      b->grad[i] += out->grad[i];
    }
  });
  return out;
}

template <typename T>
Ref<T> mul(Tape<T>& tape, const Ref<T>& a, const Ref<T>& b) {
  check_same_numel(a, b, "mul");
  auto out = tape.tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * b->value[i];
  tape.record([a, b, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      a->grad[i] += out->grad[i] * b->value[i];
      b->grad[i] += out->grad[i] * a->value[i];
    }
  });
  return out;
}

template <typename T>
Ref<T> scale(Tape<T>& tape, const Ref<T>& a, T s) {
  auto out = tape.tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] * s;
  tape.record([a, out, s] {
    for (size_t i = 0; i < out->size(); ++i) a->grad[i] += out->grad[i] * s;
  });
  return out;
}

template <typename T>
Ref<T> relu(Tape<T>& tape, const Ref<T>& a) {
  auto out = tape.tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = a->value[i] > T(0) ? a->value[i] : T(0);
  tape.record([a, out] {
    for (size_t i = 0; i < out->size(); ++i)
      if (a->value[i] > T(0)) a->grad[i] += out->grad[i];
  });
  return out;
}

template <typename T>
Ref<T> sigmoid(Tape<T>& tape, const Ref<T>& a) {
  auto out = tape.tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) {
    T x = a->value[i];
    out->value[i] = x >= T(0) ? T(1) / (T(1) + std::exp(-x))
                              : std::exp(x) / (T(1) + std::exp(x));
  }
  tape.record([a, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      T s = out->value[i];
      a->grad[i] += out->grad[i] * s * (T(1) - s);
    }
  });
  return out;
}

template <typename T>
Ref<T> tanh_op(Tape<T>& tape, const Ref<T>& a) {
  auto out = tape.tensor(a->shape);
  for (size_t i = 0; i < out->size(); ++i) out->value[i] = std::tanh(a->value[i]);
  tape.record([a, out] {
    for (size_t i = 0; i < out->size(); ++i) {
      T t = out->value[i];
      a->grad[i] += out->grad[i] * (T(1) - t * t);
    }
  });
  return out;
}

// Concatenation along axis 0 (outermost), so blocks are contiguous.
template <typename T>
Ref<T> concat0(Tape<T>& tape, const std::vector<Ref<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat0: empty");
  std::vector<int> shape = parts[0]->shape;
  int dim0 = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != shape.size()) throw DimensionError("concat0: rank mismatch");
    for (size_t d = 1; d < shape.size(); ++d)
      if (p->shape[d] != shape[d]) throw DimensionError("concat0: trailing dim mismatch");
    dim0 += p->shape[0];
  }
  shape[0] = dim0;
  auto out = tape.tensor(shape);
  size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->value.begin(), p->value.end(), out->value.begin() + off);
    off += p->size();
  }
  tape.record([parts, out] {
    size_t off = 0;
    for (const auto& p : parts) {
      for (size_t i = 0; i < p->size(); ++i) p->grad[i] += out->grad[off + i];
      off += p->size();
    }
  });
  return out;
}

// Column-wise concatenation of rank-2 [B, n] tensors.
template <typename T>
Ref<T> concat_cols(Tape<T>& tape, const std::vector<Ref<T>>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: empty");
  int rows = parts[0]->shape[0];
  int cols = 0;
  for (const auto& p : parts) {
    if (p->shape.size() != 2 || p->shape[0] != rows)
      throw DimensionError("concat_cols: need rank-2 with equal rows");
    cols += p->shape[1];
  }
  auto out = tape.tensor({rows, cols});
  int off = 0;
  for (const auto& p : parts) {
    int pc = p->shape[1];
    for (int r = 0; r < rows; ++r)
      std::copy(p->value.begin() + static_cast<size_t>(r) * pc,
                p->value.begin() + static_cast<size_t>(r + 1) * pc,
                out->value.begin() + static_cast<size_t>(r) * cols + off);
    off += pc;
  }
  tape.record([parts, out, rows, cols] {
    int off = 0;
    for (const auto& p : parts) {
      int pc = p->shape[1];
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < pc; ++c)
          p->grad[static_cast<size_t>(r) * pc + c] +=
              out->grad[static_cast<size_t>(r) * cols + off + c];
      off += pc;
    }
  });
  return out;
}

// Copy of [begin, end) along axis 0.
template <typename T>
Ref<T> slice0(Tape<T>& tape, const Ref<T>& a, int begin, int end) {
  if (a->shape.empty() || begin < 0 || end > a->shape[0] || begin >= end)
    throw DimensionError("slice0: bad range");
  size_t inner = a->size() / a->shape[0];
  std::vector<int> shape = a->shape;
  shape[0] = end - begin;
  auto out = tape.tensor(shape);
  std::copy(a->value.begin() + begin * inner, a->value.begin() + end * inner, out->value.begin());
  tape.record([a, out, begin, inner] {
    for (size_t i = 0; i < out->size(); ++i) a->grad[begin * inner + i] += out->grad[i];
  });
  return out;
}

template <typename T>
Ref<T> sum(Tape<T>& tape, const Ref<T>& a) {
  auto out = tape.tensor({1});
  T acc = T(0);
  for (T v : a->value) acc += v;
  out->value[0] = acc;
  tape.record([a, out] {
    for (size_t i = 0; i < a->size(); ++i) a->grad[i] += out->grad[0];
  });
  return out;
}

template <typename T>
Ref<T> mean(Tape<T>& tape, const Ref<T>& a) {
  return scale(tape, sum(tape, a), T(1) / static_cast<T>(a->size()));
}

template <typename T>
Ref<T> add_scalars(Tape<T>& tape, const std::vector<Ref<T>>& xs) {
  if (xs.empty()) throw DimensionError("add_scalars: empty");
  auto out = tape.tensor({1});
  T acc = T(0);
  for (const auto& x : xs) acc += x->value[0];
  out->value[0] = acc;
  tape.record([xs, out] {
    for (const auto& x : xs) x->grad[0] += out->grad[0];
  });
  return out;
}

// Mean over the spatial extent of [C,H,W] -> [C], or [B,C,H,W] -> [B,C].
template <typename T>
Ref<T> global_avg_pool(Tape<T>& tape, const Ref<T>& a) {
  if (a->shape.size() != 3 && a->shape.size() != 4)
    throw DimensionError("global_avg_pool: need rank 3 or 4");
  size_t hw = static_cast<size_t>(a->shape[a->shape.size() - 2]) * a->shape.back();
  size_t channels = a->size() / hw;
  std::vector<int> shape(a->shape.begin(), a->shape.end() - 2);
  auto out = tape.tensor(shape);
  for (size_t c = 0; c < channels; ++c) {
    T acc = T(0);
    for (size_t i = 0; i < hw; ++i) acc += a->value[c * hw + i];
    out->value[c] = acc / static_cast<T>(hw);
  }
  tape.record([a, out, channels, hw] {
    for (size_t c = 0; c < channels; ++c) {
      T g = out->grad[c] / static_cast<T>(hw);
      for (size_t i = 0; i < hw; ++i) a->grad[c * hw + i] += g;
    }
  });
  return out;
}

}  // namespace ad

// Named parameter collection; registration order defines checkpoint order.
template <typename T>
struct ParamSet {
  std::vector<std::pair<std::string, Ref<T>>> entries;

  Ref<T> add(const std::string& name, std::vector<int> shape, bool requires_grad = true) {
    auto t = make_tensor<T>(std::move(shape), requires_grad);
    entries.emplace_back(name, t);
    return t;
  }
  Ref<T> find(const std::string& name) const {
    for (const auto& [n, t] : entries)
      if (n == name) return t;
    return nullptr;
  }
  void zero_grads() const {
    for (const auto& [n, t] : entries) zero_grad(t);
  }
  size_t total_values() const {
    size_t n = 0;
    for (const auto& [name, t] : entries) n += t->size();
    return n;
  }
};

// Uniform in +-sqrt(6/(fan_in+fan_out)).
template <typename T>
void xavier_init(const Ref<T>& t, int fan_in, int fan_out, Rng& rng) {
  double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t->value) v = static_cast<T>(rng.uniform(-limit, limit));
}

}  // namespace trajgrid
