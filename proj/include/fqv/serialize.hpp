#pragma once

// File formats.
//
// Paths travel in a small binary container ("FQVP"): little-endian header
//   magic "FQVP" | u32 version | u32 dim | u64 grid | f64 horizon |
//   u8 has_seed | u64 seed | u32 label_len | label bytes
// followed by (grid+1)*dim float64 values, row-major.  Round-trips are
// bit-exact.  CSV mirrors (t, x1..xd) for interoperability; doubles print
// with enough digits to round-trip.

#include <iosfwd>
#include <string>

#include "fqv/partition.hpp"
#include "fqv/path.hpp"

namespace fqv {

void write_fqvp(std::ostream& out, const SampledPath& path);
SampledPath read_fqvp(std::istream& in);
void write_fqvp_file(const std::string& filename, const SampledPath& path);
SampledPath read_fqvp_file(const std::string& filename);

void write_path_csv(std::ostream& out, const SampledPath& path);
SampledPath read_path_csv(std::istream& in, double horizon_hint = 0.0);

// One row per partition point: n,k,grid_index,time
void write_partition_csv(std::ostream& out, const PartitionSequence& seq);

// Shortest text form of a double that parses back to the same bits.
std::string format_double(double v);

}  // namespace fqv
