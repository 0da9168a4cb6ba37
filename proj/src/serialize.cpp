#include "fqv/serialize.hpp"

#include <charconv>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <type_traits>
#include <vector>

#include "fqv/errors.hpp"

namespace fqv {
namespace {

constexpr char kMagic[4] = {'F', 'Q', 'V', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParameterError("fqvp: truncated stream");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw ParameterError("format_double failed");
  return std::string(buf, end);
}

void write_fqvp(std::ostream& out, const SampledPath& path) {
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(path.dim()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(path.grid()));
  put<double>(out, path.horizon());
  put<std::uint8_t>(out, path.seed().has_value() ? 1 : 0);
  put<std::uint64_t>(out, path.seed().value_or(0));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(path.label().size()));
  out.write(path.label().data(), static_cast<std::streamsize>(path.label().size()));
  const auto data = path.data();
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!out) throw ParameterError("fqvp: write failed");
}

SampledPath read_fqvp(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw ParameterError("fqvp: bad magic");
  const auto version = take<std::uint32_t>(in);
  if (version != kVersion) throw ParameterError("fqvp: unsupported version " + std::to_string(version));
  const auto dim = take<std::uint32_t>(in);
  const auto grid = take<std::uint64_t>(in);
  const auto horizon = take<double>(in);
  const auto has_seed = take<std::uint8_t>(in);
  const auto seed = take<std::uint64_t>(in);
  const auto label_len = take<std::uint32_t>(in);
  std::string label(label_len, '\0');
  in.read(label.data(), label_len);
  if (!in) throw ParameterError("fqvp: truncated label");

  SampledPath path(static_cast<int>(dim), horizon, static_cast<std::size_t>(grid), std::move(label),
                   has_seed ? std::optional<std::uint64_t>(seed) : std::nullopt);
  auto data = path.mutable_data();
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)));
  if (!in) throw ParameterError("fqvp: truncated body");
  path.check_finite();
  return path;
}

void write_fqvp_file(const std::string& filename, const SampledPath& path) {
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw ParameterError("cannot open for writing: " + filename);
  write_fqvp(out, path);
}

SampledPath read_fqvp_file(const std::string& filename) {
  std::ifstream in(filename, std::ios::binary);
  if (!in) throw ParameterError("cannot open for reading: " + filename);
  return read_fqvp(in);
}

void write_path_csv(std::ostream& out, const SampledPath& path) {
  out << "t";
  for (int c = 1; c <= path.dim(); ++c) out << ",x" << c;
  out << "\n";
  for (std::size_t k = 0; k < path.points(); ++k) {
    out << format_double(path.time(k));
    for (int c = 0; c < path.dim(); ++c) out << ',' << format_double(path.value(k, c));
    out << "\n";
  }
}

SampledPath read_path_csv(std::istream& in, double horizon_hint) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("path csv: empty input");
  std::vector<std::vector<double>> rows;
  double last_t = 0.0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    if (row.size() < 2) throw ParameterError("path csv: row with fewer than 2 columns");
    last_t = row[0];
    rows.push_back(std::move(row));
  }
  if (rows.size() < 3) throw ParameterError("path csv: need at least 3 sample rows");
  const int dim = static_cast<int>(rows.front().size()) - 1;
  const double horizon = horizon_hint > 0.0 ? horizon_hint : last_t;
  SampledPath path(dim, horizon, rows.size() - 1, "csv");
  auto data = path.mutable_data();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (static_cast<int>(rows[k].size()) - 1 != dim) throw ParameterError("path csv: ragged rows");
    for (int c = 0; c < dim; ++c) data[k * dim + c] = rows[k][c + 1];
  }
  path.check_finite();
  return path;
}

void write_partition_csv(std::ostream& out, const PartitionSequence& seq) {
  out << "n,k,grid_index,time\n";
  for (const auto& [n, partition] : seq.levels)
    for (std::size_t k = 0; k < partition.indices.size(); ++k)
      out << n << ',' << k << ',' << partition.indices[k] << ',' << format_double(partition.time(k))
          << "\n";
}

}  // namespace fqv
