#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "trajgrid/autodiff.hpp"
#include "trajgrid/bspline.hpp"
#include "trajgrid/checkpoint.hpp"
#include "trajgrid/common.hpp"
#include "trajgrid/grid.hpp"
#include "trajgrid/nn.hpp"
#include "trajgrid/optim.hpp"
#include "trajgrid/planners.hpp"
#include "trajgrid/tpnet.hpp"

namespace trajgrid {

struct TsnetConfig {
  int horizon = 16;  // T
  int hidden_size = 128;
  int base_channels = 16;  // encoder widths: base, 2x, 4x, 4x
  float goal_threshold = 0.5f;  // tau_g
  float region_gate = 0.1f;     // tau_r

  void validate() const {
    if (horizon < 2) throw ConfigError("TsnetConfig: horizon must be >= 2");
    if (hidden_size < 1 || base_channels < 1) throw ConfigError("TsnetConfig: bad sizes");
    if (!(region_gate > 0.0f && region_gate <= goal_threshold && goal_threshold < 1.0f))
      throw ConfigError("TsnetConfig: need 0 < tau_r <= tau_g < 1");
  }
};

// Ordered waypoints in [0,1]^2 grid-normalized coordinates, length T.
struct WaypointSequence {
  std::vector<std::pair<double, double>> points;  // (row, col)

  void validate(int horizon) const {
    if (static_cast<int>(points.size()) != horizon)
      throw DimensionError("WaypointSequence: wrong length");
    for (const auto& [r, c] : points)
      if (!(r >= 0.0 && r <= 1.0 && c >= 0.0 && c <= 1.0))
        throw DataError("WaypointSequence: coordinate outside [0,1]");
  }
};

template <typename T>
struct TsnetWeights {
  TsnetConfig config;
  ParamSet<T> params;
  ConvLayer<T> c7, s0, s1, s2;
  LstmParams<T> lstm0, lstm1, lstm2;
  Ref<T> head_w, head_b;

  int feature_size() const { return 4 * config.base_channels; }

  static TsnetWeights init(const TsnetConfig& cfg, uint64_t seed) {
    cfg.validate();
    TsnetWeights w;
    w.config = cfg;
    Rng rng(mix_seed(seed, 0x75e7a));

    auto meta = w.params.add("tsnet.meta", {5}, false);
    meta->value = {static_cast<T>(cfg.horizon), static_cast<T>(cfg.hidden_size),
                   static_cast<T>(cfg.base_channels), static_cast<T>(cfg.goal_threshold),
                   static_cast<T>(cfg.region_gate)};

    auto conv = [&](const std::string& name, int in, int out, int k, int stride) {
      ConvLayer<T> layer;
      layer.spec = ConvSpec{in, out, k, stride, 1, (k - 1) / 2};
      layer.w = w.params.add(name + ".w", {out, in, k, k});
      layer.b = w.params.add(name + ".b", {out});
      xavier_init(layer.w, in * k * k, out * k * k, rng);
      return layer;
    };
    const int b = cfg.base_channels;
    w.c7 = conv("enc.c7", 1, b, 7, 1);
    w.s0 = conv("enc.s0", b, 2 * b, 3, 2);
    w.s1 = conv("enc.s1", 2 * b, 4 * b, 3, 2);
    w.s2 = conv("enc.s2", 4 * b, 4 * b, 3, 2);

    const int in0 = w.feature_size() + 2;
    w.lstm0 = LstmParams<T>::create(w.params, "lstm0", in0, cfg.hidden_size, rng);
    w.lstm1 = LstmParams<T>::create(w.params, "lstm1", cfg.hidden_size, cfg.hidden_size, rng);
    w.lstm2 = LstmParams<T>::create(w.params, "lstm2", cfg.hidden_size, cfg.hidden_size, rng);
    w.head_w = w.params.add("head.w", {2, cfg.hidden_size});
    xavier_init(w.head_w, cfg.hidden_size, 2, rng);
    w.head_b = w.params.add("head.b", {2});
    return w;
  }

  std::vector<CheckpointEntry> checkpoint() const { return to_entries(params); }

  static TsnetWeights load(const std::vector<CheckpointEntry>& entries, uint64_t seed = 0) {
    const CheckpointEntry* meta = nullptr;
    for (const auto& e : entries)
      if (e.name == "tsnet.meta") meta = &e;
    if (!meta || meta->values.size() != 5) throw FormatError("checkpoint: missing tsnet.meta");
    TsnetConfig cfg;
    cfg.horizon = static_cast<int>(meta->values[0]);
    cfg.hidden_size = static_cast<int>(meta->values[1]);
    cfg.base_channels = static_cast<int>(meta->values[2]);
    cfg.goal_threshold = meta->values[3];
    cfg.region_gate = meta->values[4];
    TsnetWeights w = init(cfg, seed);
    load_entries(w.params, entries);
    return w;
  }
};

// Batched forward: proposals [B,1,H,W], ego coordinates per sample. The
// previous predicted coordinate feeds the next step at train and test time.
// Returns T nodes of [B,2] sigmoid outputs.
template <typename T>
std::vector<Ref<T>> tsnet_forward_graph(Tape<T>& tape, const Ref<T>& proposals,
                                        const std::vector<T>& ego, const TsnetWeights<T>& w) {
  using namespace ad;
  if (proposals->shape.size() != 4 || proposals->shape[1] != 1)
    throw DimensionError("tsnet_forward: proposals must be [B,1,H,W]");
  const int batch = proposals->shape[0];
  if (static_cast<int>(ego.size()) != 2 * batch)
    throw DimensionError("tsnet_forward: ego size mismatch");

  auto x = relu(tape, conv2d(tape, proposals, w.c7.spec, w.c7.w, w.c7.b));
  x = relu(tape, conv2d(tape, x, w.s0.spec, w.s0.w, w.s0.b));
  x = relu(tape, conv2d(tape, x, w.s1.spec, w.s1.w, w.s1.b));
  x = relu(tape, conv2d(tape, x, w.s2.spec, w.s2.w, w.s2.b));
  auto feat = global_avg_pool(tape, x);  // [B,F]

  const std::vector<int> state_shape{batch, w.config.hidden_size};
  auto h0 = tape.tensor(state_shape), c0 = tape.tensor(state_shape);
  auto h1 = tape.tensor(state_shape), c1 = tape.tensor(state_shape);
  auto h2 = tape.tensor(state_shape), c2 = tape.tensor(state_shape);

  auto prev = tape.tensor({batch, 2});
  prev->value.assign(ego.begin(), ego.end());

  std::vector<Ref<T>> outputs;
  for (int t = 0; t < w.config.horizon; ++t) {
    auto in = concat_cols(tape, {feat, prev});
    std::tie(h0, c0) = lstm_cell(tape, in, h0, c0, w.lstm0);
    std::tie(h1, c1) = lstm_cell(tape, h0, h1, c1, w.lstm1);
    std::tie(h2, c2) = lstm_cell(tape, h1, h2, c2, w.lstm2);
    auto out = sigmoid(tape, linear(tape, h2, w.head_w, w.head_b));
    outputs.push_back(out);
    prev = out;
  }
  return outputs;
}

inline WaypointSequence tsnet_forward(const ProbMap& proposal, std::pair<double, double> ego_norm,
                                      const TsnetWeights<float>& weights) {
  for (size_t i = 0; i < proposal.size(); ++i)
    if (!std::isfinite(proposal[i]) || proposal[i] < 0.0f || proposal[i] > 1.0f)
      throw InputError("tsnet_forward: proposal values must be finite in [0,1]");

  Tape<float> tape;
  auto in = tape.tensor({1, 1, proposal.rows(), proposal.cols()});
  std::copy(proposal.data(), proposal.data() + proposal.size(), in->value.begin());
  const std::vector<float> ego{static_cast<float>(ego_norm.first),
                               static_cast<float>(ego_norm.second)};
  auto outputs = tsnet_forward_graph(tape, in, ego, weights);

  WaypointSequence seq;
  for (const auto& out : outputs)
    seq.points.emplace_back(static_cast<double>(out->value[0]), static_cast<double>(out->value[1]));
  return seq;
}

// Mean over steps of the Euclidean distance between prediction and target.
inline double tsnet_loss(const WaypointSequence& pred, const WaypointSequence& gt) {
  if (pred.points.size() != gt.points.size() || pred.points.empty())
    throw DimensionError("tsnet_loss: sequence length mismatch");
  double total = 0.0;
  for (size_t t = 0; t < pred.points.size(); ++t)
    total += std::hypot(pred.points[t].first - gt.points[t].first,
                        pred.points[t].second - gt.points[t].second);
  return total / static_cast<double>(pred.points.size());
}

// Farthest cell whose traversable probability clears tau_g; ties prefer the
// higher probability, then row-major order.
inline CellIdx extract_goal(const ProbMap& r0, CellIdx ego, float tau_g) {
  CellIdx best{-1, -1};
  double best_dist = -1.0;
  float best_prob = 0.0f;
  for (int r = 0; r < r0.rows(); ++r)
    for (int c = 0; c < r0.cols(); ++c) {
      const float p = r0.at(r, c);
      if (p < tau_g) continue;
      const double d = euclidean({r, c}, ego);
      if (d > best_dist || (d == best_dist && p > best_prob)) {
        best = {r, c};
        best_dist = d;
        best_prob = p;
      }
    }
  if (best.row < 0) throw EmptyProposalError("extract_goal: no cell above threshold");
  return best;
}

namespace detail {

inline std::pair<double, double> normalize_cell(double row, double col, const GridConfig& cfg) {
  auto clamp01 = [](double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); };
  return {clamp01(row / (cfg.height - 1)), clamp01(col / (cfg.width - 1))};
}

inline CellIdx denormalize_cell(std::pair<double, double> norm, const GridConfig& cfg) {
  return {static_cast<int>(std::lround(norm.first * (cfg.height - 1))),
          static_cast<int>(std::lround(norm.second * (cfg.width - 1)))};
}

}  // namespace detail

// Plans RRT* from the ego to the extracted goal inside the proposal region
// (cells below tau_r or occupied are blocked), smooths with a clamped cubic
// B-spline, and resamples T points by arc length. Falls back to the
// resampled polyline when the smoothed path leaves the region.
inline WaypointSequence make_tsnet_groundtruth(const ProbMap& proposal, CellIdx ego,
                                               const OccupancyGrid& grid, const TsnetConfig& cfg,
                                               const PlannerConfig& planner_cfg) {
  cfg.validate();
  const GridConfig& gc = grid.config;
  if (proposal.rows() != gc.height || proposal.cols() != gc.width)
    throw DimensionError("make_tsnet_groundtruth: proposal shape mismatch");

  const CellIdx goal = extract_goal(proposal, ego, cfg.goal_threshold);

  Mask blocked(gc.height, gc.width, 0);
  for (int r = 0; r < gc.height; ++r)
    for (int c = 0; c < gc.width; ++c)
      blocked.at(r, c) = (proposal.at(r, c) < cfg.region_gate || grid.occupied.at(r, c)) ? 1 : 0;
  const CollisionMask region(std::move(blocked), gc);

  PlannerConfig pc = planner_cfg;
  pc.termination = TerminationMode::BestWithinBudget;
  pc.time_budget = 0.0;
  const Vec2 start = gc.to_meters(ego.row, ego.col);
  const Vec2 goal_m = gc.to_meters(goal.row, goal.col);
  const PlanResult plan = detail::plan_rrt(region, start, goal_m, pc, false);
  if (!plan.success()) throw NoPathError("make_tsnet_groundtruth: planner failed");

  auto region_ok = [&](const std::vector<Vec2>& pts) {
    for (size_t i = 0; i + 1 < pts.size(); ++i)
      if (!region.segment_free(pts[i], pts[i + 1])) return false;
    return true;
  };

  std::vector<Vec2> pts = bspline_smooth(plan.path, cfg.horizon);
  if (!region_ok(pts)) pts = resample_polyline(plan.path, cfg.horizon);
  if (!region_ok(pts)) throw NoPathError("make_tsnet_groundtruth: no in-region waypoints");

  WaypointSequence seq;
  for (const Vec2& p : pts)
    seq.points.push_back(detail::normalize_cell(gc.to_cell_row(p.x), gc.to_cell_col(p.y), gc));
  seq.validate(cfg.horizon);
  return seq;
}

// One training pair for the sampler network.
struct TsnetSample {
  std::vector<float> proposal;  // h*w traversable probabilities
  int height = 0, width = 0;
  std::array<float, 2> ego_norm{};
  WaypointSequence gt;
};

// Runs the proposal network over the dataset and generates ground truth per
// head; heads without an extractable goal or a feasible plan are skipped.
inline std::vector<TsnetSample> make_tsnet_dataset(const std::vector<DatasetSample>& dataset,
                                                   const TpnetWeights<float>& tpnet,
                                                   const TsnetConfig& cfg,
                                                   const PlannerConfig& planner_cfg,
                                                   uint64_t seed) {
  std::vector<TsnetSample> out;
  for (size_t si = 0; si < dataset.size(); ++si) {
    const DatasetSample& s = dataset[si];
    const GridConfig& gc = s.grid.config;
    const ProposalSet proposals = tpnet_forward(s.input(), tpnet);
    for (int k = 0; k < proposals.num_heads(); ++k) {
      PlannerConfig pc = planner_cfg;
      pc.seed = mix_seed(seed, si * 31 + k);
      try {
        const ProbMap r0 = proposals.r0_map(k);
        TsnetSample sample;
        sample.gt = make_tsnet_groundtruth(r0, gc.ego_cell, s.grid, cfg, pc);
        sample.proposal.assign(r0.data(), r0.data() + r0.size());
        sample.height = gc.height;
        sample.width = gc.width;
        const auto ego = detail::normalize_cell(gc.ego_cell.row, gc.ego_cell.col, gc);
        sample.ego_norm = {static_cast<float>(ego.first), static_cast<float>(ego.second)};
        out.push_back(std::move(sample));
      } catch (const EmptyProposalError&) {
      } catch (const NoPathError&) {
      }
    }
  }
  return out;
}

struct TsnetLogRow {
  int epoch = 0;
  long step = 0;
  double loss = 0.0, lr = 0.0, ade = 0.0;
};

struct TsnetTrainResult {
  std::vector<TsnetLogRow> log;
  OptimState optim;
};

inline void write_tsnet_log(const std::string& path, const std::vector<TsnetLogRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write training log: " + path);
  out << "epoch,step,loss,lr,ade\n";
  for (const auto& r : rows)
    out << r.epoch << ',' << r.step << ',' << r.loss << ',' << r.lr << ',' << r.ade << "\n";
}

// Minimizes the mean waypoint distance by SGD with backprop through the
// autoregressive coordinate feedback. Deterministic given the seed.
inline TsnetTrainResult train_tsnet(const std::vector<TsnetSample>& dataset,
                                    TsnetWeights<float>& weights, OptimState optim,
                                    const TrainOptions& opts) {
  if (dataset.empty()) throw DataError("train_tsnet: empty dataset");
  optim.validate();
  const TsnetConfig& cfg = weights.config;
  const int horizon = cfg.horizon;
  const int h = dataset[0].height, w = dataset[0].width;
  for (const TsnetSample& s : dataset) {
    if (s.height != h || s.width != w) throw DimensionError("train_tsnet: mixed grid sizes");
    s.gt.validate(horizon);
  }

  Rng rng(mix_seed(opts.seed, 0xd157));
  const int n = static_cast<int>(dataset.size());
  const int steps_per_epoch = (n + opts.batch_size - 1) / opts.batch_size;
  const size_t hw = static_cast<size_t>(h) * w;

  TsnetTrainResult result;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    double loss_sum = 0.0;
    long batches = 0;

    for (int step = 0; step < steps_per_epoch; ++step) {
      Tape<float> tape;
      weights.params.zero_grads();

      const int bsz = opts.batch_size;
      auto in = tape.tensor({bsz, 1, h, w});
      std::vector<float> ego(2 * bsz);
      std::vector<const WaypointSequence*> gts(bsz);
      for (int b = 0; b < bsz; ++b) {
        const TsnetSample& s = dataset[rng.uniform_int(n)];
        std::copy(s.proposal.begin(), s.proposal.end(), in->value.begin() + b * hw);
        ego[2 * b] = s.ego_norm[0];
        ego[2 * b + 1] = s.ego_norm[1];
        gts[b] = &s.gt;
      }

      auto outputs = tsnet_forward_graph(tape, in, ego, weights);
      std::vector<Ref<float>> dists;
      for (int t = 0; t < horizon; ++t) {
        std::vector<float> target(2 * bsz);
        for (int b = 0; b < bsz; ++b) {
          target[2 * b] = static_cast<float>(gts[b]->points[t].first);
          target[2 * b + 1] = static_cast<float>(gts[b]->points[t].second);
        }
        dists.push_back(ad::sum(tape, ad::rowwise_distance(tape, outputs[t], std::move(target))));
      }
      auto loss = ad::scale(tape, ad::add_scalars(tape, dists),
                            1.0f / static_cast<float>(horizon * bsz));
      tape.backward(loss);
      sgd_step(weights.params, optim);
      loss_sum += loss->value[0];
      ++batches;
    }

    TsnetLogRow row;
    row.epoch = epoch;
    row.step = optim.step_count;
    row.loss = loss_sum / batches;
    row.lr = optim.lr();
    row.ade = row.loss;
    result.log.push_back(row);
  }

  if (!opts.log_path.empty()) write_tsnet_log(opts.log_path, result.log);
  result.optim = optim;
  return result;
}

inline std::pair<TsnetWeights<float>, TsnetTrainResult> train_tsnet(
    const std::vector<TsnetSample>& dataset, const TsnetConfig& cfg, const OptimState& optim,
    const TrainOptions& opts) {
  TsnetWeights<float> weights = TsnetWeights<float>::init(cfg, opts.seed);
  TsnetTrainResult result = train_tsnet(dataset, weights, optim, opts);
  return {std::move(weights), std::move(result)};
}

// Mean ADE of the model over a set of samples, in normalized units.
inline double evaluate_tsnet_ade(const TsnetWeights<float>& weights,
                                 const std::vector<TsnetSample>& samples) {
  if (samples.empty()) throw DataError("evaluate_tsnet_ade: no samples");
  double total = 0.0;
  for (const TsnetSample& s : samples) {
    ProbMap map(s.height, s.width);
    std::copy(s.proposal.begin(), s.proposal.end(), map.data());
    const WaypointSequence pred =
        tsnet_forward(map, {s.ego_norm[0], s.ego_norm[1]}, weights);
    total += tsnet_loss(pred, s.gt);
  }
  return total / static_cast<double>(samples.size());
}

}  // namespace trajgrid
