#include "mmdgen/dataset.hpp"

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <vector>

#include "binary_io.hpp"
#include "mmdgen/error.hpp"

namespace mmdgen {
namespace {

constexpr char kRawMagic[5] = "MMDD";

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

Eigen::MatrixXd read_csv(const std::string& path, bool transpose) {
  auto in = open_input(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    std::vector<double> row;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = body.find(',', start);
      const std::string_view field =
          trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start));
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size())
        throw FormatError(path + ":" + std::to_string(line_no) + ": cannot parse field " +
                          std::to_string(row.size() + 1) + " (\"" + std::string(field) + "\")");
      row.push_back(value);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " fields, got " +
                        std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(path + ": empty file");

  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[i][j];
  if (transpose) return m.transpose();
  return m;
}

Eigen::MatrixXd read_rawf64(const std::string& path) {
  auto in = open_input(path);
  detail::expect_magic(in, kRawMagic, path);
  const auto dim = detail::read_le<std::uint32_t>(in, "dim");
  const auto count = detail::read_le<std::uint32_t>(in, "count");
  if (dim == 0 || count == 0) throw FormatError(path + ": empty rawf64 block");
  Eigen::MatrixXd m(dim, count);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = detail::read_f64(in, "rawf64 payload");
  return m;
}

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) throw FormatError(path + ": truncated idx header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) |
         std::uint32_t{b[3]};
}

// IDX: two zero bytes, type code, rank, then big-endian u32 extents. The first
// extent counts items; the remaining ones are flattened row-major into a column.
Eigen::MatrixXd read_idx(const std::string& path) {
  auto in = open_input(path);
  const std::uint32_t magic = read_be32(in, path);
  if ((magic >> 16) != 0) throw FormatError(path + ": bad idx magic");
  const unsigned type = (magic >> 8) & 0xff;
  const unsigned rank = magic & 0xff;
  if (type != 0x08) throw FormatError(path + ": only unsigned-byte idx files are supported");
  if (rank < 1) throw FormatError(path + ": idx rank must be >= 1");
  const std::uint32_t count = read_be32(in, path);
  std::uint64_t dim = 1;
  for (unsigned r = 1; r < rank; ++r) dim *= read_be32(in, path);
  if (count == 0 || dim == 0) throw FormatError(path + ": empty idx file");

  std::vector<unsigned char> bytes(static_cast<std::size_t>(dim * count));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size())
    throw FormatError(path + ": truncated idx payload");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(count));
  std::size_t offset = 0;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = bytes[offset++];
  return m;
}

}  // namespace

DataFormat parse_data_format(std::string_view name) {
  if (name == "csv") return DataFormat::csv;
  if (name == "rawf64") return DataFormat::rawf64;
  if (name == "idx") return DataFormat::idx;
  throw std::invalid_argument("unknown data format: " + std::string(name));
}

ScaleMode parse_scale_mode(std::string_view name) {
  if (name == "none") return ScaleMode::none;
  if (name == "minmax") return ScaleMode::minmax;
  if (name == "fixed255") return ScaleMode::fixed255;
  throw std::invalid_argument("unknown scale mode: " + std::string(name));
}

std::string to_string(DataFormat format) {
  switch (format) {
    case DataFormat::csv: return "csv";
    case DataFormat::rawf64: return "rawf64";
    case DataFormat::idx: return "idx";
  }
  return "?";
}

std::string to_string(ScaleMode mode) {
  switch (mode) {
    case ScaleMode::none: return "none";
    case ScaleMode::minmax: return "minmax";
    case ScaleMode::fixed255: return "fixed255";
  }
  return "?";
}

DataFormat infer_data_format(const std::string& path) {
  auto ends_with = [&](std::string_view suffix) {
    return path.size() >= suffix.size() &&
           std::string_view(path).substr(path.size() - suffix.size()) == suffix;
  };
  if (ends_with(".csv")) return DataFormat::csv;
  if (ends_with(".idx") || ends_with("-ubyte") || ends_with(".ubyte")) return DataFormat::idx;
  return DataFormat::rawf64;
}

Eigen::MatrixXd read_matrix(const std::string& path, DataFormat format, bool transpose) {
  switch (format) {
    case DataFormat::csv: return read_csv(path, transpose);
    case DataFormat::rawf64: return read_rawf64(path);
    case DataFormat::idx: return read_idx(path);
  }
  throw std::invalid_argument("unknown data format");
}

void apply_scale(Eigen::MatrixXd& values, ScaleMode mode) {
  if (!values.allFinite()) throw RangeError("dataset contains non-finite values");
  switch (mode) {
    case ScaleMode::none:
      break;
    case ScaleMode::fixed255:
      values /= 255.0;
      break;
    case ScaleMode::minmax: {
      const double lo = values.minCoeff();
      const double hi = values.maxCoeff();
      if (hi > lo)
        values = (values.array() - lo) / (hi - lo);
      else
        values.setZero();
      break;
    }
  }
  for (Eigen::Index j = 0; j < values.cols(); ++j)
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      const double v = values(i, j);
      if (v < 0.0 || v > 1.0) {
        std::ostringstream msg;
        msg << "value " << v << " at row " << i << ", column " << j
            << " is outside [0, 1] (scale mode " << to_string(mode) << ")";
        throw RangeError(msg.str());
      }
    }
}

Dataset load_dataset(const std::string& path, const LoadOptions& options) {
  Dataset data;
  data.columns = read_matrix(path, options.format, options.transpose);
  apply_scale(data.columns, options.scale);
  data.source_path = path;
  data.scale = options.scale;
  return data;
}

void write_csv(const std::string& path, const Eigen::MatrixXd& columns) {
  auto out = open_output(path);
  out.precision(17);
  for (Eigen::Index i = 0; i < columns.rows(); ++i) {
    for (Eigen::Index j = 0; j < columns.cols(); ++j) {
      if (j) out << ',';
      out << columns(i, j);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

void write_rawf64(const std::string& path, const Eigen::MatrixXd& columns) {
  auto out = open_output(path);
  detail::write_magic(out, kRawMagic);
  detail::write_le(out, static_cast<std::uint32_t>(columns.rows()));
  detail::write_le(out, static_cast<std::uint32_t>(columns.cols()));
  for (Eigen::Index j = 0; j < columns.cols(); ++j)
    for (Eigen::Index i = 0; i < columns.rows(); ++i) detail::write_f64(out, columns(i, j));
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace mmdgen
