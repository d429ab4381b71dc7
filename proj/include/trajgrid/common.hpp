#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace trajgrid {

// Error taxonomy. The CLI maps these onto exit codes; library code throws.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct LabelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Raised by goal extraction when no cell clears the probability threshold.
struct EmptyProposalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Raised by ground-truth generation when the planner cannot reach the goal.
struct NoPathError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CellIdx {
  int row = 0;
  int col = 0;
  friend bool operator==(const CellIdx&, const CellIdx&) = default;
};

// Dense row-major 2D array. Used for masks (uint8_t) and probability maps.
template <typename T>
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    if (rows < 0 || cols < 0) throw DimensionError("Grid2D: negative extent");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }

  T& at(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  const T& at(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
  T& operator[](size_t i) { return data_[i]; }
  const T& operator[](size_t i) const { return data_[i]; }

  bool in_bounds(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }
  bool in_bounds(const CellIdx& c) const { return in_bounds(c.row, c.col); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Grid2D&, const Grid2D&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Mask = Grid2D<uint8_t>;
using ProbMap = Grid2D<float>;

// splitmix64; used to derive independent per-scene / per-item seeds.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Worker cap: min(hardware, TRAJGRID_THREADS). Parallel sections size off this.
inline int worker_count() {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  if (const char* env = std::getenv("TRAJGRID_THREADS")) {
    int cap = std::atoi(env);
    if (cap >= 1) hw = std::min(hw, cap);
  }
  return hw;
}

}  // namespace trajgrid
