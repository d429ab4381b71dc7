#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <utility>
#include <vector>

#include "trajgrid/autodiff.hpp"
#include "trajgrid/bspline.hpp"
#include "trajgrid/common.hpp"
#include "trajgrid/geometry.hpp"
#include "trajgrid/grid.hpp"

namespace trajgrid {

enum class TerminationMode { FirstPath, BestWithinBudget };
enum class TerminationReason { FirstPath, BudgetExhausted, Failure };

struct PlannerConfig {
  double step_size = 0.4;       // meters
  double rewire_radius = 12.0;  // gamma in r(n) = gamma * sqrt(log n / n)
  double goal_tolerance = 0.2;  // meters
  long max_iterations = 20000;
  double time_budget = 0.0;  // seconds; 0 keeps termination purely iteration-based
  TerminationMode termination = TerminationMode::FirstPath;
  double first_path_threshold = 0.0;  // 0 = auto (grid perimeter)
  int batch_size = 100;               // BIT* samples per batch
  double goal_bias = 0.05;
  uint64_t seed = 0;
  // Instrumentation: observes every drawn sample and whether a solution
  // already existed when it was drawn. Does not perturb the RNG stream.
  std::function<void(Vec2, bool)> sample_observer;

  void validate(double resolution) const {
    if (step_size <= 0.0) throw ConfigError("PlannerConfig: step_size must be positive");
    if (goal_tolerance < resolution)
      throw ConfigError("PlannerConfig: goal_tolerance must be at least one cell");
    if (max_iterations < 1) throw ConfigError("PlannerConfig: max_iterations must be >= 1");
    if (batch_size < 1) throw ConfigError("PlannerConfig: batch_size must be >= 1");
  }
};

inline PlannerConfig default_planner_config(const GridConfig& grid) {
  PlannerConfig cfg;
  cfg.step_size = 2.0 * grid.resolution;
  cfg.goal_tolerance = grid.resolution;
  const double area = grid.height * grid.resolution * grid.width * grid.resolution;
  cfg.rewire_radius = std::sqrt(3.0 * area / M_PI);
  return cfg;
}

struct PlanResult {
  std::vector<Vec2> path;  // meters, start first
  double length = 0.0;
  double elapsed = 0.0;  // seconds, planning call only
  long iterations = 0;
  TerminationReason reason = TerminationReason::Failure;
  // (iteration, best cost) every time the incumbent solution improved.
  std::vector<std::pair<long, double>> improvement_trace;

  bool success() const { return reason != TerminationReason::Failure; }
};

// Blocked-cell view of the world. Unknown space blocks like occupied space;
// out-of-grid counts as blocked.
class CollisionMask {
 public:
  CollisionMask() = default;
  CollisionMask(Mask blocked, GridConfig cfg) : blocked_(std::move(blocked)), cfg_(cfg) {
    for (int r = 0; r < blocked_.rows(); ++r)
      for (int c = 0; c < blocked_.cols(); ++c)
        if (!blocked_.at(r, c)) free_cells_.push_back({r, c});
  }

  static CollisionMask from_grid(const OccupancyGrid& grid) {
    Mask blocked(grid.config.height, grid.config.width, 0);
    for (size_t i = 0; i < blocked.size(); ++i) blocked[i] = grid.free[i] ? 0 : 1;
    return CollisionMask(std::move(blocked), grid.config);
  }

  const GridConfig& config() const { return cfg_; }
  const std::vector<CellIdx>& free_cells() const { return free_cells_; }

  bool cell_blocked(int r, int c) const {
    return !blocked_.in_bounds(r, c) || blocked_.at(r, c) != 0;
  }
  bool point_free(Vec2 p) const {
    CellIdx cell = cfg_.to_cell(p.x, p.y);
    return !cell_blocked(cell.row, cell.col);
  }
  bool segment_free(Vec2 a, Vec2 b) const {
    bool free = true;
    visit_supercover(cfg_.to_cell_row(a.x), cfg_.to_cell_col(a.y), cfg_.to_cell_row(b.x),
                     cfg_.to_cell_col(b.y), [&](int r, int c) {
                       if (cell_blocked(r, c)) {
                         free = false;
                         return false;
                       }
                       return true;
                     });
    return free;
  }

 private:
  Mask blocked_;
  GridConfig cfg_;
  std::vector<CellIdx> free_cells_;
};

// True iff every cell the segment touches is known free space.
inline bool segment_collision_free(const OccupancyGrid& grid, Vec2 a, Vec2 b) {
  return CollisionMask::from_grid(grid).segment_free(a, b);
}

namespace detail {

// Uniform cell-bucket spatial hash over the grid extent.
class SpatialHash {
 public:
  SpatialHash(const GridConfig& cfg, double bucket_width) : bw_(bucket_width) {
    xmin_ = (cfg.ego_cell.row - (cfg.height - 1) - 0.5) * cfg.resolution;
    ymin_ = (cfg.ego_cell.col - (cfg.width - 1) - 0.5) * cfg.resolution;
    const double xmax = (cfg.ego_cell.row + 0.5) * cfg.resolution;
    const double ymax = (cfg.ego_cell.col + 0.5) * cfg.resolution;
    nx_ = static_cast<int>(std::ceil((xmax - xmin_) / bw_)) + 1;
    ny_ = static_cast<int>(std::ceil((ymax - ymin_) / bw_)) + 1;
    buckets_.resize(static_cast<size_t>(nx_) * ny_);
  }

  void insert(int id, Vec2 p) { buckets_[index_of(p)].push_back(id); }

  template <typename DistFn>
  int nearest(Vec2 p, DistFn&& dist_to) const {
    const int bx = clampi(static_cast<int>((p.x - xmin_) / bw_), 0, nx_ - 1);
    const int by = clampi(static_cast<int>((p.y - ymin_) / bw_), 0, ny_ - 1);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    const int max_ring = std::max(nx_, ny_);
    for (int ring = 0; ring <= max_ring; ++ring) {
      if (best >= 0 && (ring - 1) * bw_ > best_d) break;
      for_ring(bx, by, ring, [&](const std::vector<int>& bucket) {
        for (int id : bucket) {
          double d = dist_to(id);
          if (d < best_d) {
            best_d = d;
            best = id;
          }
        }
      });
    }
    return best;
  }

  template <typename PosFn>
  std::vector<int> within(Vec2 p, double radius, PosFn&& pos_of) const {
    std::vector<int> out;
    const int bx0 = clampi(static_cast<int>((p.x - radius - xmin_) / bw_), 0, nx_ - 1);
    const int bx1 = clampi(static_cast<int>((p.x + radius - xmin_) / bw_), 0, nx_ - 1);
    const int by0 = clampi(static_cast<int>((p.y - radius - ymin_) / bw_), 0, ny_ - 1);
    const int by1 = clampi(static_cast<int>((p.y + radius - ymin_) / bw_), 0, ny_ - 1);
    for (int bx = bx0; bx <= bx1; ++bx)
      for (int by = by0; by <= by1; ++by)
        for (int id : buckets_[static_cast<size_t>(bx) * ny_ + by])
          if (dist(pos_of(id), p) <= radius) out.push_back(id);
    return out;
  }

 private:
  static int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

  size_t index_of(Vec2 p) const {
    const int bx = clampi(static_cast<int>((p.x - xmin_) / bw_), 0, nx_ - 1);
    const int by = clampi(static_cast<int>((p.y - ymin_) / bw_), 0, ny_ - 1);
    return static_cast<size_t>(bx) * ny_ + by;
  }

  template <typename Fn>
  void for_ring(int bx, int by, int ring, Fn&& fn) const {
    if (ring == 0) {
      if (bx >= 0 && bx < nx_ && by >= 0 && by < ny_)
        fn(buckets_[static_cast<size_t>(bx) * ny_ + by]);
      return;
    }
    for (int dx = -ring; dx <= ring; ++dx) {
      for (int dy = -ring; dy <= ring; ++dy) {
        if (std::max(std::abs(dx), std::abs(dy)) != ring) continue;
        const int x = bx + dx, y = by + dy;
        if (x < 0 || x >= nx_ || y < 0 || y >= ny_) continue;
        fn(buckets_[static_cast<size_t>(x) * ny_ + y]);
      }
    }
  }

  double bw_, xmin_, ymin_;
  int nx_ = 0, ny_ = 0;
  std::vector<std::vector<int>> buckets_;
};

struct Tree {
  struct Node {
    Vec2 pos;
    int parent;
    double cost;
    std::vector<int> children;
  };
  std::vector<Node> nodes;
  SpatialHash hash;

  Tree(const GridConfig& cfg, double bucket_width) : hash(cfg, bucket_width) {}

  int add(Vec2 pos, int parent, double cost) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({pos, parent, cost, {}});
    if (parent >= 0) nodes[parent].children.push_back(id);
    hash.insert(id, pos);
    return id;
  }

  void reparent(int node, int new_parent, double new_cost) {
    Node& n = nodes[node];
    auto& siblings = nodes[n.parent].children;
    siblings.erase(std::find(siblings.begin(), siblings.end(), node));
    n.parent = new_parent;
    nodes[new_parent].children.push_back(node);
    const double delta = new_cost - n.cost;
    // Propagate the cost change through the subtree.
    std::vector<int> stack{node};
    while (!stack.empty()) {
      int id = stack.back();
      stack.pop_back();
      nodes[id].cost += delta;
      for (int ch : nodes[id].children) stack.push_back(ch);
    }
  }

  std::vector<Vec2> path_to_root(int node) const {
    std::vector<Vec2> rev;
    for (int id = node; id >= 0; id = nodes[id].parent) rev.push_back(nodes[id].pos);
    return {rev.rbegin(), rev.rend()};
  }
};

struct GoalLink {
  int node;
  double connection_cost;
};

inline double best_solution(const Tree& tree, const std::vector<GoalLink>& links) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& link : links)
    best = std::min(best, tree.nodes[link.node].cost + link.connection_cost);
  return best;
}

struct EllipseSampler {
  Vec2 start, goal, center;
  double cmin, cos_a, sin_a;

  EllipseSampler(Vec2 s, Vec2 g) : start(s), goal(g) {
    center = 0.5 * (s + g);
    cmin = dist(s, g);
    const double angle = std::atan2(g.y - s.y, g.x - s.x);
    cos_a = std::cos(angle);
    sin_a = std::sin(angle);
  }

  Vec2 sample(Rng& rng, double cbest) const {
    const double r1 = cbest / 2.0;
    const double r2 = std::sqrt(std::max(cbest * cbest - cmin * cmin, 0.0)) / 2.0;
    const double theta = 2.0 * M_PI * rng.uniform();
    const double rad = std::sqrt(rng.uniform());
    const double ex = r1 * rad * std::cos(theta);
    const double ey = r2 * rad * std::sin(theta);
    return {center.x + cos_a * ex - sin_a * ey, center.y + sin_a * ex + cos_a * ey};
  }
};

inline double auto_threshold(const GridConfig& cfg, double configured) {
  if (configured > 0.0) return configured;
  return 2.0 * (cfg.height + cfg.width) * cfg.resolution;
}

// Shared RRT* core; `informed` switches on ellipse sampling once a solution
// exists (the pre-solution stream is identical to plain RRT*).
inline PlanResult plan_rrt(const CollisionMask& world, Vec2 start, Vec2 goal,
                           const PlannerConfig& cfg, bool informed) {
  const GridConfig& gc = world.config();
  cfg.validate(gc.resolution);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  PlanResult result;
  if (!world.point_free(start) || !world.point_free(goal) || world.free_cells().empty()) {
    result.elapsed = elapsed();
    return result;
  }

  Rng rng(cfg.seed);
  Tree tree(gc, std::max(cfg.step_size, gc.resolution));
  tree.add(start, -1, 0.0);
  std::vector<GoalLink> goal_links;
  double best = std::numeric_limits<double>::infinity();
  const double threshold = auto_threshold(gc, cfg.first_path_threshold);
  const EllipseSampler ellipse(start, goal);

  auto pos_of = [&](int id) { return tree.nodes[id].pos; };

  for (long iter = 1; iter <= cfg.max_iterations; ++iter) {
    result.iterations = iter;
    if (cfg.time_budget > 0.0 && elapsed() > cfg.time_budget) break;

    // Sample.
    Vec2 sample;
    if (rng.uniform() < cfg.goal_bias) {
      sample = goal;
    } else if (informed && !goal_links.empty()) {
      bool ok = false;
      for (int tries = 0; tries < 64 && !ok; ++tries) {
        sample = ellipse.sample(rng, best);
        ok = world.point_free(sample);
      }
      if (!ok) continue;
    } else {
      const auto& cells = world.free_cells();
      const CellIdx cell = cells[rng.uniform_int(static_cast<int>(cells.size()))];
      sample = gc.to_meters(cell.row + rng.uniform() - 0.5, cell.col + rng.uniform() - 0.5);
    }
    if (cfg.sample_observer) cfg.sample_observer(sample, !goal_links.empty());

    // Steer from the nearest node.
    const int nearest = tree.hash.nearest(sample, [&](int id) { return dist(tree.nodes[id].pos, sample); });
    const Vec2 from = tree.nodes[nearest].pos;
    const double d = dist(from, sample);
    if (d < 1e-9) continue;
    const Vec2 fresh = d <= cfg.step_size ? sample : from + (cfg.step_size / d) * (sample - from);
    if (!world.point_free(fresh) || !world.segment_free(from, fresh)) continue;

    // Choose parent within the shrinking neighborhood.
    const size_t n = tree.nodes.size();
    const double radius =
        std::max(cfg.step_size, cfg.rewire_radius * std::sqrt(std::log(static_cast<double>(n + 1)) /
                                                              static_cast<double>(n + 1)));
    const std::vector<int> near = tree.hash.within(fresh, radius, pos_of);
    int parent = nearest;
    double parent_cost = tree.nodes[nearest].cost + dist(from, fresh);
    for (int id : near) {
      const double c = tree.nodes[id].cost + dist(tree.nodes[id].pos, fresh);
      if (c < parent_cost && world.segment_free(tree.nodes[id].pos, fresh)) {
        parent = id;
        parent_cost = c;
      }
    }
    const int added = tree.add(fresh, parent, parent_cost);

    // Rewire neighbors through the new node.
    for (int id : near) {
      if (id == parent) continue;
      const double via = parent_cost + dist(fresh, tree.nodes[id].pos);
      if (via + 1e-12 < tree.nodes[id].cost && world.segment_free(fresh, tree.nodes[id].pos))
        tree.reparent(id, added, via);
    }

    // Try the goal connection.
    const double to_goal = dist(fresh, goal);
    if (to_goal <= cfg.goal_tolerance && (to_goal == 0.0 || world.segment_free(fresh, goal)))
      goal_links.push_back({added, to_goal});

    if (!goal_links.empty()) {
      const double now_best = best_solution(tree, goal_links);
      if (now_best + 1e-12 < best) {
        best = now_best;
        result.improvement_trace.emplace_back(iter, best);
      }
      if (cfg.termination == TerminationMode::FirstPath && best < threshold) {
        result.reason = TerminationReason::FirstPath;
        break;
      }
    }
  }

  result.elapsed = elapsed();
  if (goal_links.empty()) return result;

  int best_link = 0;
  for (size_t i = 1; i < goal_links.size(); ++i)
    if (tree.nodes[goal_links[i].node].cost + goal_links[i].connection_cost <
        tree.nodes[goal_links[best_link].node].cost + goal_links[best_link].connection_cost)
      best_link = static_cast<int>(i);
  result.path = tree.path_to_root(goal_links[best_link].node);
  if (goal_links[best_link].connection_cost > 0.0) result.path.push_back(goal);
  result.length = path_length(result.path);
  if (result.reason != TerminationReason::FirstPath) result.reason = TerminationReason::BudgetExhausted;
  return result;
}

}  // namespace detail

inline PlanResult rrt_star(const OccupancyGrid& grid, Vec2 start, Vec2 goal,
                           const PlannerConfig& cfg) {
  return detail::plan_rrt(CollisionMask::from_grid(grid), start, goal, cfg, false);
}

inline PlanResult informed_rrt_star(const OccupancyGrid& grid, Vec2 start, Vec2 goal,
                                    const PlannerConfig& cfg) {
  return detail::plan_rrt(CollisionMask::from_grid(grid), start, goal, cfg, true);
}

inline PlanResult rrt_star(const CollisionMask& world, Vec2 start, Vec2 goal,
                           const PlannerConfig& cfg) {
  return detail::plan_rrt(world, start, goal, cfg, false);
}

// Batched informed trees: batches of samples flow through a best-first edge
// queue keyed by g(v) + |vx| + h(x); edges are collision-checked lazily at
// pop time, and sampling focuses on the informed ellipse once a solution
// exists. Iterations count processed edges.
inline PlanResult bit_star(const OccupancyGrid& grid, Vec2 start, Vec2 goal,
                           const PlannerConfig& cfg) {
  const CollisionMask world = CollisionMask::from_grid(grid);
  const GridConfig& gc = grid.config;
  cfg.validate(gc.resolution);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  PlanResult result;
  if (!world.point_free(start) || !world.point_free(goal) || world.free_cells().empty()) {
    result.elapsed = elapsed();
    return result;
  }

  Rng rng(cfg.seed);
  detail::Tree tree(gc, std::max(cfg.step_size, gc.resolution));
  tree.add(start, -1, 0.0);

  struct Sample {
    Vec2 pos;
    int vertex = -1;  // tree index once connected
  };
  std::vector<Sample> samples;
  samples.push_back({goal, -1});
  const int goal_sample = 0;

  double best = std::numeric_limits<double>::infinity();
  const double threshold = detail::auto_threshold(gc, cfg.first_path_threshold);
  const detail::EllipseSampler ellipse(start, goal);
  auto heuristic = [&](Vec2 p) { return dist(p, goal); };

  auto draw_sample = [&]() -> Vec2 {
    if (std::isfinite(best)) {
      for (int tries = 0; tries < 64; ++tries) {
        Vec2 p = ellipse.sample(rng, best);
        if (world.point_free(p)) return p;
      }
    }
    const auto& cells = world.free_cells();
    const CellIdx cell = cells[rng.uniform_int(static_cast<int>(cells.size()))];
    return gc.to_meters(cell.row + rng.uniform() - 0.5, cell.col + rng.uniform() - 0.5);
  };

  struct Edge {
    double f;
    int vertex;
    int sample;
  };

  bool done = false;
  while (!done && result.iterations < cfg.max_iterations) {
    if (cfg.time_budget > 0.0 && elapsed() > cfg.time_budget) break;

    // New batch: informed resampling, then a fresh edge queue.
    for (int i = 0; i < cfg.batch_size; ++i) {
      const Vec2 p = draw_sample();
      if (std::isfinite(best) && dist(start, p) + heuristic(p) >= best) continue;
      samples.push_back({p, -1});
    }

    const int k_near = std::max(
        8, static_cast<int>(std::ceil(3.0 * std::log(static_cast<double>(tree.nodes.size() + samples.size() + 1)))));

    std::vector<Edge> edges;
    for (int si = 0; si < static_cast<int>(samples.size()); ++si) {
      const Sample& s = samples[si];
      if (s.vertex >= 0 && si != goal_sample) continue;  // connected samples rest
      if (std::isfinite(best) && dist(start, s.pos) + heuristic(s.pos) >= best) continue;
      // k nearest tree vertices to this sample.
      std::vector<std::pair<double, int>> cand;
      cand.reserve(tree.nodes.size());
      for (int vi = 0; vi < static_cast<int>(tree.nodes.size()); ++vi)
        cand.emplace_back(dist(tree.nodes[vi].pos, s.pos), vi);
      const size_t keep = std::min<size_t>(k_near, cand.size());
      std::partial_sort(cand.begin(), cand.begin() + keep, cand.end());
      for (size_t j = 0; j < keep; ++j) {
        const auto& [d, vi] = cand[j];
        edges.push_back({tree.nodes[vi].cost + d + heuristic(s.pos), vi, si});
      }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
      if (a.f != b.f) return a.f < b.f;
      if (a.sample != b.sample) return a.sample < b.sample;
      return a.vertex < b.vertex;
    });

    for (const Edge& e : edges) {
      if (result.iterations >= cfg.max_iterations) break;
      if (cfg.time_budget > 0.0 && elapsed() > cfg.time_budget) break;
      ++result.iterations;
      if (e.f >= best) break;  // queue is sorted; nothing below can improve

      Sample& s = samples[e.sample];
      const double edge_len = dist(tree.nodes[e.vertex].pos, s.pos);
      const double g_new = tree.nodes[e.vertex].cost + edge_len;
      if (s.vertex >= 0 && g_new + 1e-12 >= tree.nodes[s.vertex].cost) continue;
      if (!world.segment_free(tree.nodes[e.vertex].pos, s.pos)) continue;

      if (s.vertex < 0) {
        s.vertex = tree.add(s.pos, e.vertex, g_new);
      } else {
        tree.reparent(s.vertex, e.vertex, g_new);
      }

      if (e.sample == goal_sample) {
        const double cost = tree.nodes[s.vertex].cost;
        if (cost + 1e-12 < best) {
          best = cost;
          result.improvement_trace.emplace_back(result.iterations, best);
        }
        if (cfg.termination == TerminationMode::FirstPath && best < threshold) {
          result.reason = TerminationReason::FirstPath;
          done = true;
          break;
        }
      }
    }
  }

  result.elapsed = elapsed();
  if (samples[goal_sample].vertex < 0) return result;
  result.path = tree.path_to_root(samples[goal_sample].vertex);
  result.length = path_length(result.path);
  if (result.reason != TerminationReason::FirstPath) result.reason = TerminationReason::BudgetExhausted;
  return result;
}

// Exact shortest path on the 8-connected free-cell graph; the test oracle.
inline PlanResult dijkstra_shortest(const OccupancyGrid& grid, Vec2 start, Vec2 goal) {
  const GridConfig& gc = grid.config;
  const auto t0 = std::chrono::steady_clock::now();
  PlanResult result;

  const CellIdx s = gc.to_cell(start.x, start.y);
  const CellIdx g = gc.to_cell(goal.x, goal.y);
  auto blocked = [&](int r, int c) { return !grid.free.in_bounds(r, c) || !grid.free.at(r, c); };
  if (blocked(s.row, s.col) || blocked(g.row, g.col)) {
    result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }

  const int h = gc.height, w = gc.width;
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist_map(static_cast<size_t>(h) * w, inf);
  std::vector<int> prev(static_cast<size_t>(h) * w, -1);
  auto idx = [w](int r, int c) { return static_cast<size_t>(r) * w + c; };

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  dist_map[idx(s.row, s.col)] = 0.0;
  pq.push({0.0, static_cast<int>(idx(s.row, s.col))});

  while (!pq.empty()) {
    const auto [d, cur] = pq.top();
    pq.pop();
    if (d > dist_map[cur]) continue;
    const int r = cur / w, c = cur % w;
    if (r == g.row && c == g.col) break;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int nr = r + dr, nc = c + dc;
        if (blocked(nr, nc)) continue;
        const double step = (dr != 0 && dc != 0) ? M_SQRT2 * gc.resolution : gc.resolution;
        const double nd = d + step;
        if (nd < dist_map[idx(nr, nc)]) {
          dist_map[idx(nr, nc)] = nd;
          prev[idx(nr, nc)] = cur;
          pq.push({nd, static_cast<int>(idx(nr, nc))});
        }
      }
    }
  }

  result.iterations = 0;
  if (!std::isfinite(dist_map[idx(g.row, g.col)])) {
    result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }
  std::vector<Vec2> rev;
  for (int cur = static_cast<int>(idx(g.row, g.col)); cur >= 0; cur = prev[cur])
    rev.push_back(gc.to_meters(cur / w, cur % w));
  result.path.assign(rev.rbegin(), rev.rend());
  result.length = path_length(result.path);
  result.reason = TerminationReason::BudgetExhausted;
  result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace trajgrid
