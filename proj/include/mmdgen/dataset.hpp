#pragma once

#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace mmdgen {

enum class DataFormat { csv, rawf64, idx };
enum class ScaleMode { none, minmax, fixed255 };

DataFormat parse_data_format(std::string_view name);
ScaleMode parse_scale_mode(std::string_view name);
std::string to_string(DataFormat format);
std::string to_string(ScaleMode mode);

// Guess a format from the file extension: .csv, .idx / *-ubyte, else rawf64.
DataFormat infer_data_format(const std::string& path);

/// Training vectors stored one per column, every entry in [0, 1].
struct Dataset {
  Eigen::MatrixXd columns;
  std::string source_path;
  ScaleMode scale = ScaleMode::none;

  Eigen::Index dim() const { return columns.rows(); }
  Eigen::Index count() const { return columns.cols(); }
};

struct LoadOptions {
  DataFormat format = DataFormat::csv;
  ScaleMode scale = ScaleMode::none;
  // CSV only: one vector per row instead of one per column.
  bool transpose = false;
};

// Reads a matrix without range checks or rescaling.
Eigen::MatrixXd read_matrix(const std::string& path, DataFormat format, bool transpose = false);

Dataset load_dataset(const std::string& path, const LoadOptions& options);

// Applies `mode` in place and checks the result lies in [0, 1].
void apply_scale(Eigen::MatrixXd& values, ScaleMode mode);

void write_csv(const std::string& path, const Eigen::MatrixXd& columns);
void write_rawf64(const std::string& path, const Eigen::MatrixXd& columns);

}  // namespace mmdgen
