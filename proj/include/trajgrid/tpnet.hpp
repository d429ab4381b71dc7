#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "trajgrid/autodiff.hpp"
#include "trajgrid/checkpoint.hpp"
#include "trajgrid/common.hpp"
#include "trajgrid/datagen.hpp"
#include "trajgrid/grid.hpp"
#include "trajgrid/nn.hpp"
#include "trajgrid/optim.hpp"

namespace trajgrid {

struct TpnetConfig {
  int num_heads = 4;  // k
  int base_channels = 16;
  int depth = 3;  // encoder downsamplings
  float alpha = 0.95f;
  float lambda = 0.5f;
  float deep_supervision_weight = 0.5f;
  bool enable_skip = true;
  bool enable_dilation = true;
  bool enable_deep_supervision = true;
  bool enable_multi_head = true;

  int heads() const { return enable_multi_head ? num_heads : 1; }

  void validate() const {
    if (num_heads < 1) throw ConfigError("TpnetConfig: num_heads must be >= 1");
    if (alpha <= 0.0f || alpha >= 1.0f) throw ConfigError("TpnetConfig: alpha must be in (0,1)");
    if (lambda < 0.0f) throw ConfigError("TpnetConfig: lambda must be >= 0");
    if (base_channels < 1 || depth < 1) throw ConfigError("TpnetConfig: bad architecture");
    if (enable_deep_supervision && depth < 2)
      throw ConfigError("TpnetConfig: deep supervision needs depth >= 2");
  }
};

// k per-pixel 2-class probability maps; each head stores the traversable
// plane (R0) followed by the non-traversable plane (R1).
struct ProposalSet {
  int height = 0;
  int width = 0;
  std::vector<std::vector<float>> heads;
  std::vector<std::vector<float>> intermediate_heads;

  int num_heads() const { return static_cast<int>(heads.size()); }
  size_t plane() const { return static_cast<size_t>(height) * width; }
  const float* r0(int k) const { return heads[k].data(); }
  const float* r1(int k) const { return heads[k].data() + plane(); }

  ProbMap r0_map(int k) const {
    ProbMap m(height, width);
    std::copy(r0(k), r0(k) + plane(), m.data());
    return m;
  }

  bool normalized(float tol = 1e-6f) const {
    for (const auto& head : heads)
      for (size_t i = 0; i < plane(); ++i) {
        const float s = head[i] + head[plane() + i];
        if (std::abs(s - 1.0f) > tol) return false;
        if (!(head[i] > 0.0f && head[i] < 1.0f)) return false;
      }
    return true;
  }
};

template <typename T>
struct ConvLayer {
  ConvSpec spec;
  Ref<T> w, b;
};

template <typename T>
struct TpnetWeights {
  TpnetConfig config;
  ParamSet<T> params;

  std::vector<ConvLayer<T>> enc, down;
  ConvLayer<T> bottleneck;
  std::vector<ConvLayer<T>> up, dec;  // stored from deepest stage outward
  ConvLayer<T> head;
  ConvLayer<T> ds_up, ds_head;

  static TpnetWeights init(const TpnetConfig& cfg, uint64_t seed) {
    cfg.validate();
    TpnetWeights w;
    w.config = cfg;
    Rng rng(mix_seed(seed, 0x7049e7));

    auto meta = w.params.add("tpnet.meta", {10}, false);
    meta->value = {static_cast<T>(cfg.num_heads),    static_cast<T>(cfg.base_channels),
                   static_cast<T>(cfg.depth),        static_cast<T>(cfg.alpha),
                   static_cast<T>(cfg.lambda),       static_cast<T>(cfg.deep_supervision_weight),
                   static_cast<T>(cfg.enable_skip),  static_cast<T>(cfg.enable_dilation),
                   static_cast<T>(cfg.enable_deep_supervision),
                   static_cast<T>(cfg.enable_multi_head)};

    auto conv = [&](const std::string& name, int in, int out, int k, int stride, int dil) {
      ConvLayer<T> layer;
      layer.spec = ConvSpec{in, out, k, stride, dil, dil * (k - 1) / 2};
      layer.w = w.params.add(name + ".w", {out, in, k, k});
      layer.b = w.params.add(name + ".b", {out});
      xavier_init(layer.w, in * k * k, out * k * k, rng);
      return layer;
    };
    auto deconv = [&](const std::string& name, int in, int out) {
      // Transposed stride-2 upsampler; spec is in the adjoint-conv orientation.
      ConvLayer<T> layer;
      layer.spec = ConvSpec{out, in, 4, 2, 1, 1};
      layer.w = w.params.add(name + ".w", {in, out, 4, 4});
      layer.b = w.params.add(name + ".b", {out});
      xavier_init(layer.w, in * 16, out * 16, rng);
      return layer;
    };

    std::vector<int> ch(cfg.depth);
    for (int i = 0; i < cfg.depth; ++i) ch[i] = cfg.base_channels << std::min(i, 3);
    const int interior_dil = cfg.enable_dilation ? 2 : 1;

    for (int i = 0; i < cfg.depth; ++i) {
      const int in = i == 0 ? 4 : ch[i - 1];
      const int dil = i == 0 ? 1 : interior_dil;
      w.enc.push_back(conv("enc" + std::to_string(i), in, ch[i], 3, 1, dil));
      w.down.push_back(conv("down" + std::to_string(i), ch[i], ch[i], 3, 2, 1));
    }
    w.bottleneck = conv("bott", ch.back(), ch.back(), 3, 1, 1);

    int cur = ch.back();
    for (int i = cfg.depth - 1; i >= 0; --i) {
      w.up.push_back(deconv("up" + std::to_string(i), cur, ch[i]));
      const int dec_in = ch[i] + (cfg.enable_skip ? ch[i] : 0);
      const int dec_out = i > 0 ? ch[i - 1] : ch[0];
      w.dec.push_back(conv("dec" + std::to_string(i), dec_in, dec_out, 3, 1, 1));
      cur = dec_out;
    }
    w.head = conv("head", ch[0], 2 * cfg.heads(), 1, 1, 1);
    if (cfg.enable_deep_supervision) {
      w.ds_up = deconv("ds_up", ch[0], ch[0]);
      w.ds_head = conv("ds_head", ch[0], 2 * cfg.heads(), 1, 1, 1);
    }
    return w;
  }

  std::vector<CheckpointEntry> checkpoint() const { return to_entries(params); }

  static TpnetWeights load(const std::vector<CheckpointEntry>& entries, uint64_t seed = 0) {
    const CheckpointEntry* meta = nullptr;
    for (const auto& e : entries)
      if (e.name == "tpnet.meta") meta = &e;
    if (!meta || meta->values.size() != 10) throw FormatError("checkpoint: missing tpnet.meta");
    TpnetConfig cfg;
    cfg.num_heads = static_cast<int>(meta->values[0]);
    cfg.base_channels = static_cast<int>(meta->values[1]);
    cfg.depth = static_cast<int>(meta->values[2]);
    cfg.alpha = meta->values[3];
    cfg.lambda = meta->values[4];
    cfg.deep_supervision_weight = meta->values[5];
    cfg.enable_skip = meta->values[6] != 0.0f;
    cfg.enable_dilation = meta->values[7] != 0.0f;
    cfg.enable_deep_supervision = meta->values[8] != 0.0f;
    cfg.enable_multi_head = meta->values[9] != 0.0f;
    TpnetWeights w = init(cfg, seed);
    load_entries(w.params, entries);
    return w;
  }
};

template <typename T>
struct TpnetGraphOut {
  std::vector<Ref<T>> head_probs;          // k tensors [2,H,W]
  std::vector<Ref<T>> intermediate_probs;  // empty without deep supervision
};

// Encoder-decoder forward pass; skip connections concatenate the matching
// encoder stage, the deep-supervision branch taps the penultimate decoder
// stage and deconvolves up to full resolution.
template <typename T>
TpnetGraphOut<T> tpnet_forward_graph(Tape<T>& tape, const Ref<T>& input,
                                     const TpnetWeights<T>& w) {
  const TpnetConfig& cfg = w.config;
  if (input->shape.size() != 3 || input->shape[0] != 4)
    throw DimensionError("tpnet_forward: input must be [4,H,W]");
  const int h = input->shape[1], width = input->shape[2];
  const int div = 1 << cfg.depth;
  if (h % div != 0 || width % div != 0)
    throw DimensionError("tpnet_forward: spatial size must be divisible by 2^depth");

  using namespace ad;
  std::vector<Ref<T>> skips;
  Ref<T> x = input;
  for (int i = 0; i < cfg.depth; ++i) {
    x = relu(tape, conv2d(tape, x, w.enc[i].spec, w.enc[i].w, w.enc[i].b));
    skips.push_back(x);
    x = relu(tape, conv2d(tape, x, w.down[i].spec, w.down[i].w, w.down[i].b));
  }
  x = relu(tape, conv2d(tape, x, w.bottleneck.spec, w.bottleneck.w, w.bottleneck.b));

  Ref<T> penultimate;
  for (int s = 0; s < cfg.depth; ++s) {
    const int stage = cfg.depth - 1 - s;
    x = relu(tape, conv2d_transpose(tape, x, w.up[s].spec, w.up[s].w, w.up[s].b));
    if (cfg.enable_skip) x = concat0(tape, {x, skips[stage]});
    x = relu(tape, conv2d(tape, x, w.dec[s].spec, w.dec[s].w, w.dec[s].b));
    if (stage == 1) penultimate = x;
  }

  TpnetGraphOut<T> out;
  auto logits = conv2d(tape, x, w.head.spec, w.head.w, w.head.b);
  auto probs = softmax2(tape, logits);
  for (int k = 0; k < cfg.heads(); ++k)
    out.head_probs.push_back(slice0(tape, probs, 2 * k, 2 * k + 2));

  if (cfg.enable_deep_supervision) {
    auto dsx = relu(tape, conv2d_transpose(tape, penultimate, w.ds_up.spec, w.ds_up.w, w.ds_up.b));
    auto ds_logits = conv2d(tape, dsx, w.ds_head.spec, w.ds_head.w, w.ds_head.b);
    auto ds_probs = softmax2(tape, ds_logits);
    for (int k = 0; k < cfg.heads(); ++k)
      out.intermediate_probs.push_back(slice0(tape, ds_probs, 2 * k, 2 * k + 2));
  }
  return out;
}

template <typename T>
Ref<T> input_tensor(Tape<T>& tape, const NetworkInput& input) {
  auto t = tape.tensor({4, input.config.height, input.config.width});
  for (size_t i = 0; i < input.channels.size(); ++i) t->value[i] = static_cast<T>(input.channels[i]);
  return t;
}

inline ProposalSet tpnet_forward(const NetworkInput& input, const TpnetWeights<float>& weights) {
  Tape<float> tape;
  auto out = tpnet_forward_graph(tape, input_tensor(tape, input), weights);
  ProposalSet set;
  set.height = input.config.height;
  set.width = input.config.width;
  for (const auto& head : out.head_probs) set.heads.push_back(head->value);
  for (const auto& head : out.intermediate_probs) set.intermediate_heads.push_back(head->value);
  return set;
}

// Minimum over heads of the weighted cross entropy against one label;
// gradient belongs to the winning head only. Ties go to the lowest index.
struct DiversityLoss {
  double loss = 0.0;
  int chosen_head = 0;
};

namespace detail {

inline std::vector<float> label_target(const TrajectoryLabel& label) {
  std::vector<float> p0(label.traversable.size());
  bool any = false;
  for (size_t i = 0; i < p0.size(); ++i) {
    p0[i] = static_cast<float>(label.traversable[i]);
    any = any || label.traversable[i];
  }
  if (!any) throw LabelError("trajectory label has no traversable cells");
  return p0;
}

inline DiversityLoss argmin_head(const std::vector<const float*>& r0s,
                                 const std::vector<const float*>& r1s,
                                 const std::vector<float>& p0, size_t hw, float alpha) {
  DiversityLoss best;
  best.loss = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < r0s.size(); ++k) {
    const double ce = ad::weighted_ce_value(r0s[k], r1s[k], p0.data(), hw, alpha);
    if (ce < best.loss) {
      best.loss = ce;
      best.chosen_head = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace detail

inline DiversityLoss trajectory_diversity_loss(const ProposalSet& proposals,
                                               const TrajectoryLabel& label, float alpha) {
  if (label.traversable.rows() != proposals.height || label.traversable.cols() != proposals.width)
    throw DimensionError("trajectory_diversity_loss: label shape mismatch");
  const std::vector<float> p0 = detail::label_target(label);
  std::vector<const float*> r0s, r1s;
  for (int k = 0; k < proposals.num_heads(); ++k) {
    r0s.push_back(proposals.r0(k));
    r1s.push_back(proposals.r1(k));
  }
  return detail::argmin_head(r0s, r1s, p0, proposals.plane(), alpha);
}

// Mean over heads and occupied cells of -log R1; zero without occupied cells.
inline double obstacle_avoidance_loss(const ProposalSet& proposals, const Mask& occupied) {
  if (occupied.rows() != proposals.height || occupied.cols() != proposals.width)
    throw DimensionError("obstacle_avoidance_loss: mask shape mismatch");
  size_t n_occ = 0;
  for (size_t i = 0; i < occupied.size(); ++i) n_occ += occupied[i] ? 1 : 0;
  if (n_occ == 0) return 0.0;
  const float inv = 1.0f / (static_cast<float>(proposals.num_heads()) * n_occ);
  double total = 0.0;
  for (int k = 0; k < proposals.num_heads(); ++k)
    total += ad::obstacle_nll_value(proposals.r1(k), occupied, inv);
  return total;
}

inline double tpnet_total_loss(const ProposalSet& proposals, const TrajectoryLabel& label,
                               const Mask& occupied, const TpnetConfig& cfg) {
  double total = trajectory_diversity_loss(proposals, label, cfg.alpha).loss;
  if (cfg.enable_deep_supervision && !proposals.intermediate_heads.empty()) {
    ProposalSet inter;
    inter.height = proposals.height;
    inter.width = proposals.width;
    inter.heads = proposals.intermediate_heads;
    total += cfg.deep_supervision_weight * trajectory_diversity_loss(inter, label, cfg.alpha).loss;
  }
  total += cfg.lambda * obstacle_avoidance_loss(proposals, occupied);
  return total;
}

inline Mask binarize_proposal(const ProbMap& r0, float tau = 0.5f) {
  Mask m(r0.rows(), r0.cols(), 0);
  for (size_t i = 0; i < r0.size(); ++i) m[i] = r0[i] >= tau ? 1 : 0;
  return m;
}

struct TrainOptions {
  int epochs = 1;
  int batch_size = 32;
  uint64_t seed = 0;
  std::string log_path;  // optional CSV
};

struct TpnetLogRow {
  int epoch = 0;
  long step = 0;
  double loss_td = 0.0, loss_obs = 0.0, loss_total = 0.0, lr = 0.0;
  std::vector<long> head_histogram;
};

struct TpnetTrainResult {
  std::vector<TpnetLogRow> log;
  OptimState optim;
};

inline void write_tpnet_log(const std::string& path, const std::vector<TpnetLogRow>& rows, int k) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path);
  out << "epoch,step,loss_td,loss_obs,loss_total,lr";
  for (int i = 0; i < k; ++i) out << ",h" << i;
  out << "\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.step << ',' << r.loss_td << ',' << r.loss_obs << ','
        << r.loss_total << ',' << r.lr;
    for (long h : r.head_histogram) out << ',' << h;
    out << "\n";
  }
}

// Each step draws batch_size (scene, label) pairs uniformly; only the
// winning head of each sample receives diversity gradient, every head
// receives obstacle gradient. Deterministic given the seed.
inline TpnetTrainResult train_tpnet(const std::vector<DatasetSample>& dataset,
                                    TpnetWeights<float>& weights, OptimState optim,
                                    const TrainOptions& opts) {
  if (dataset.empty()) throw DataError("train_tpnet: empty dataset");
  optim.validate();
  const TpnetConfig& cfg = weights.config;
  const int k = cfg.heads();

  // Precompute inputs, targets, and occupied masks.
  struct Prepared {
    std::vector<float> channels;
    std::vector<std::vector<float>> targets;
    Mask occupied;
    size_t n_occ = 0;
  };
  std::vector<Prepared> prep;
  prep.reserve(dataset.size());
  int h = 0, w = 0;
  for (const DatasetSample& s : dataset) {
    if (s.labels.empty()) throw DataError("train_tpnet: sample without labels");
    if (h == 0) {
      h = s.grid.config.height;
      w = s.grid.config.width;
    } else if (h != s.grid.config.height || w != s.grid.config.width) {
      throw DimensionError("train_tpnet: mixed grid sizes");
    }
    Prepared p;
    p.channels = s.input().channels;
    for (const auto& label : s.labels) p.targets.push_back(detail::label_target(label));
    p.occupied = s.grid.occupied;
    for (size_t i = 0; i < p.occupied.size(); ++i) p.n_occ += p.occupied[i] ? 1 : 0;
    prep.push_back(std::move(p));
  }

  Rng rng(mix_seed(opts.seed, 0x5a317));
  const int n = static_cast<int>(prep.size());
  const int steps_per_epoch = (n + opts.batch_size - 1) / opts.batch_size;

  TpnetTrainResult result;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double sum_td = 0.0, sum_obs = 0.0, sum_total = 0.0;
    long samples_seen = 0;
    std::vector<long> histogram(k, 0);

    for (int step = 0; step < steps_per_epoch; ++step) {
      Tape<float> tape;
      weights.params.zero_grads();
      std::vector<Ref<float>> batch_losses;

      for (int b = 0; b < opts.batch_size; ++b) {
        const Prepared& p = prep[rng.uniform_int(n)];
        const std::vector<float>& target = p.targets[rng.uniform_int(static_cast<int>(p.targets.size()))];

        auto in = tape.tensor({4, h, w});
        std::copy(p.channels.begin(), p.channels.end(), in->value.begin());
        auto out = tpnet_forward_graph(tape, in, weights);

        std::vector<const float*> r0s, r1s;
        const size_t hw = static_cast<size_t>(h) * w;
        for (const auto& head : out.head_probs) {
          r0s.push_back(head->value.data());
          r1s.push_back(head->value.data() + hw);
        }
        const DiversityLoss chosen = detail::argmin_head(r0s, r1s, target, hw, cfg.alpha);
        ++histogram[chosen.chosen_head];
        auto loss = ad::weighted_ce(tape, out.head_probs[chosen.chosen_head], target, cfg.alpha);
        sum_td += chosen.loss;

        if (cfg.enable_deep_supervision) {
          std::vector<const float*> ir0s, ir1s;
          for (const auto& head : out.intermediate_probs) {
            ir0s.push_back(head->value.data());
            ir1s.push_back(head->value.data() + hw);
          }
          const DiversityLoss ds = detail::argmin_head(ir0s, ir1s, target, hw, cfg.alpha);
          auto ds_loss = ad::weighted_ce(tape, out.intermediate_probs[ds.chosen_head], target, cfg.alpha);
          loss = ad::add(tape, loss, ad::scale(tape, ds_loss, cfg.deep_supervision_weight));
        }

        double obs_value = 0.0;
        if (cfg.lambda > 0.0f && p.n_occ > 0) {
          const float inv = 1.0f / (static_cast<float>(k) * p.n_occ);
          std::vector<Ref<float>> obs_terms;
          for (const auto& head : out.head_probs)
            obs_terms.push_back(ad::obstacle_nll(tape, head, p.occupied, inv));
          auto obs = ad::add_scalars(tape, obs_terms);
          obs_value = obs->value[0];
          loss = ad::add(tape, loss, ad::scale(tape, obs, cfg.lambda));
        }
        sum_obs += obs_value;
        sum_total += loss->value[0];
        ++samples_seen;
        batch_losses.push_back(loss);
      }

      auto total = ad::scale(tape, ad::add_scalars(tape, batch_losses),
                             1.0f / static_cast<float>(opts.batch_size));
      tape.backward(total);
      sgd_step(weights.params, optim);
    }

    TpnetLogRow row;
    row.epoch = epoch;
    row.step = optim.step_count;
    row.loss_td = sum_td / samples_seen;
    row.loss_obs = sum_obs / samples_seen;
    row.loss_total = sum_total / samples_seen;
    row.lr = optim.lr();
    row.head_histogram = histogram;
    result.log.push_back(std::move(row));
  }

  if (!opts.log_path.empty()) write_tpnet_log(opts.log_path, result.log, k);
  result.optim = optim;
  return result;
}

inline std::pair<TpnetWeights<float>, TpnetTrainResult> train_tpnet(
    const std::vector<DatasetSample>& dataset, const TpnetConfig& cfg, const OptimState& optim,
    const TrainOptions& opts) {
  TpnetWeights<float> weights = TpnetWeights<float>::init(cfg, opts.seed);
  TpnetTrainResult result = train_tpnet(dataset, weights, optim, opts);
  return {std::move(weights), std::move(result)};
}

}  // namespace trajgrid
