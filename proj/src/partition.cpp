#include "fqv/partition.hpp"

#include <algorithm>
#include <cmath>

#include "fqv/errors.hpp"

namespace fqv {

void Partition::validate() const {
  if (indices.size() < 2) throw PartitionError("partition needs at least two points");
  if (grid < 2) throw PartitionError("partition grid must have at least 2 intervals");
  if (indices.front() != 0) throw PartitionError("partition must start at grid index 0");
  if (indices.back() != grid) throw PartitionError("partition must end at the final grid index");
  for (std::size_t i = 1; i < indices.size(); ++i)
    if (indices[i] <= indices[i - 1]) throw PartitionError("partition indices must strictly increase");
}

const char* to_string(PartitionKind kind) {
  switch (kind) {
    case PartitionKind::uniform: return "uniform";
    case PartitionKind::dyadic: return "dyadic";
    case PartitionKind::lebesgue: return "lebesgue";
  }
  return "?";
}

const Partition& PartitionSequence::at_level(int n) const {
  for (const auto& [level, partition] : levels)
    if (level == n) return partition;
  throw PartitionError("no such partition level: " + std::to_string(n));
}

const Partition& PartitionSequence::finest() const {
  if (levels.empty()) throw PartitionError("empty partition sequence");
  return levels.back().second;
}

PartitionSequence dyadic_sequence(std::size_t grid, double horizon, int n_min, int n_max) {
  if (n_min < 0 || n_max < n_min) throw ParameterError("dyadic_sequence: need 0 <= n_min <= n_max");
  if (n_max >= 63) throw ParameterError("dyadic_sequence: n_max out of range");
  const std::size_t finest_cells = std::size_t{1} << n_max;
  if (grid % finest_cells != 0)
    throw ParameterError("dyadic_sequence: 2^n_max must divide the grid size");
  if (!(horizon > 0.0)) throw ParameterError("dyadic_sequence: horizon must be positive");

  PartitionSequence seq;
  seq.kind = PartitionKind::dyadic;
  for (int n = n_min; n <= n_max; ++n) {
    const std::size_t cells = std::size_t{1} << n;
    const std::size_t stride = grid / cells;
    Partition p;
    p.grid = grid;
    p.horizon = horizon;
    p.indices.reserve(cells + 1);
    for (std::size_t k = 0; k <= cells; ++k) p.indices.push_back(k * stride);
    p.validate();
    seq.levels.emplace_back(n, std::move(p));
  }
  seq.nested = verify_nested(seq);
  return seq;
}

PartitionSequence lebesgue_sequence(const SampledPath& path, int n_min, int n_max, double level_base) {
  if (n_min < 0 || n_max < n_min) throw ParameterError("lebesgue_sequence: need 0 <= n_min <= n_max");
  if (!(level_base > 1.0)) throw ParameterError("lebesgue_sequence: level base must exceed 1");

  PartitionSequence seq;
  seq.kind = PartitionKind::lebesgue;
  seq.level_base = level_base;
  const std::size_t M = path.grid();
  for (int n = n_min; n <= n_max; ++n) {
    const double eps = std::pow(level_base, -static_cast<double>(n));
    Partition p;
    p.grid = M;
    p.horizon = path.horizon();
    p.indices.push_back(0);
    std::size_t anchor = 0;
    for (std::size_t k = 1; k <= M; ++k) {
      if (path.row_distance(k, anchor) >= eps) {
        p.indices.push_back(k);
        anchor = k;
      }
    }
    if (p.indices.back() != M) p.indices.push_back(M);
    p.validate();
    seq.levels.emplace_back(n, std::move(p));
  }
  seq.nested = verify_nested(seq);
  return seq;
}

double mesh(const Partition& partition) {
  partition.validate();
  std::size_t widest = 0;
  for (std::size_t i = 1; i < partition.indices.size(); ++i)
    widest = std::max(widest, partition.indices[i] - partition.indices[i - 1]);
  return partition.horizon * static_cast<double>(widest) / static_cast<double>(partition.grid);
}

double oscillation(const SampledPath& path, const Partition& partition) {
  partition.validate();
  if (partition.grid != path.grid()) throw PartitionError("oscillation: partition grid mismatch");
  double worst = 0.0;
  for (std::size_t i = 1; i < partition.indices.size(); ++i) {
    const std::size_t lo = partition.indices[i - 1];
    const std::size_t hi = partition.indices[i];
    for (std::size_t k = lo + 1; k <= hi; ++k) worst = std::max(worst, path.row_distance(k, lo));
  }
  return worst;
}

bool verify_nested(const PartitionSequence& seq) {
  for (std::size_t l = 1; l < seq.levels.size(); ++l) {
    const auto& coarse = seq.levels[l - 1].second.indices;
    const auto& fine = seq.levels[l].second.indices;
    if (!std::includes(fine.begin(), fine.end(), coarse.begin(), coarse.end())) return false;
  }
  return !seq.levels.empty();
}

SampledPath piecewise_constant_approx(const SampledPath& path, const Partition& partition) {
  partition.validate();
  if (partition.grid != path.grid()) throw PartitionError("piecewise_constant_approx: grid mismatch");
  SampledPath approx = path;
  auto data = approx.mutable_data();
  const int d = path.dim();
  for (std::size_t i = 1; i < partition.indices.size(); ++i) {
    const std::size_t lo = partition.indices[i - 1];
    const std::size_t hi = partition.indices[i];
    const double* target = path.row(hi);
    for (std::size_t k = lo; k < hi; ++k)
      for (int c = 0; c < d; ++c) data[k * d + c] = target[c];
  }
  // k = grid keeps path(T) by construction
  approx.set_label(path.label().empty() ? "pc-approx" : path.label() + " pc-approx");
  return approx;
}

}  // namespace fqv
