#pragma once

// Partitions of [0, T] anchored on a path's uniform grid, and ladders of
// refining partitions (dyadic or hitting-time based).

#include <cstddef>
#include <utility>
#include <vector>

#include "fqv/path.hpp"

namespace fqv {

struct Partition {
  std::vector<std::size_t> indices;  // strictly increasing grid indices, first 0, last = grid
  std::size_t grid = 0;              // master grid interval count M
  double horizon = 0.0;

  std::size_t cells() const { return indices.empty() ? 0 : indices.size() - 1; }
  double time(std::size_t i) const {
    return horizon * static_cast<double>(indices[i]) / static_cast<double>(grid);
  }
  // Throws PartitionError unless indices are strictly increasing from 0 to grid
  // with at least two points.
  void validate() const;
};

enum class PartitionKind { uniform, dyadic, lebesgue };

const char* to_string(PartitionKind kind);

struct PartitionSequence {
  PartitionKind kind = PartitionKind::dyadic;
  bool nested = false;     // checked on construction, never assumed
  double level_base = 2.0; // threshold base for hitting-time ladders
  std::vector<std::pair<int, Partition>> levels;

  const Partition& at_level(int n) const;
  const Partition& finest() const;
};

// Level n splits [0, T] into 2^n equal cells; requires 2^n_max | M.
PartitionSequence dyadic_sequence(std::size_t grid, double horizon, int n_min, int n_max);

// Hitting-time ladder: level n walks the grid and records the first index at
// which the path has moved (Euclidean) at least base^-n from the previous
// partition point; T closes every level.  No sub-grid interpolation.  A path
// that never moves that far yields {0, T}.  These ladders are generally not
// nested; the flag records the verified answer.
PartitionSequence lebesgue_sequence(const SampledPath& path, int n_min, int n_max, double level_base = 2.0);

// Largest cell width in time units.
double mesh(const Partition& partition);

// max_j sup_{t in (t_j, t_{j+1}]} |f(t) - f(t_j)| evaluated on the grid: the
// left endpoint is excluded, the right endpoint included.
double oscillation(const SampledPath& path, const Partition& partition);

// True when every level's points all occur in every finer level.
bool verify_nested(const PartitionSequence& seq);

// omega^n: on [t_i, t_{i+1}) the value at t_{i+1}, and omega(T) at T.
SampledPath piecewise_constant_approx(const SampledPath& path, const Partition& partition);

}  // namespace fqv
