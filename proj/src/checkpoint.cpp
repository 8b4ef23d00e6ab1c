#include "mmdgen/checkpoint.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "mmdgen/error.hpp"

namespace mmdgen {
namespace {

using nlohmann::json;

constexpr char kMagic[5] = "MMDG";

void write_rows(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) detail::write_f64(out, m(i, j));
}

Eigen::MatrixXd read_rows(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                          const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = detail::read_f64(in, what);
  return m;
}

json config_json(const TrainConfig& c) {
  return {{"latent", c.shape.latent},
          {"hidden", c.shape.hidden},
          {"output", c.shape.output},
          {"bandwidth", c.bandwidth},
          {"mu", c.mu},
          {"lambda", c.lambda},
          {"epsilon", c.epsilon},
          {"batch", c.batch},
          {"rounds", c.rounds},
          {"seed", c.seed},
          {"algorithm", to_string(c.algorithm)},
          {"power_init", to_string(c.power_init)},
          {"normalize_preliminary", c.normalize_preliminary},
          {"shuffle", c.shuffle},
          {"trace_every", c.trace_every},
          {"eval_count", c.eval_count}};
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

TrainConfig config_from(const json& j, TrainConfig c) {
  take(j, "latent", c.shape.latent);
  take(j, "hidden", c.shape.hidden);
  take(j, "output", c.shape.output);
  take(j, "bandwidth", c.bandwidth);
  take(j, "mu", c.mu);
  take(j, "lambda", c.lambda);
  take(j, "epsilon", c.epsilon);
  take(j, "batch", c.batch);
  take(j, "rounds", c.rounds);
  take(j, "seed", c.seed);
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
  if (j.contains("power_init"))
    c.power_init = parse_power_init(j.at("power_init").get<std::string>());
  take(j, "normalize_preliminary", c.normalize_preliminary);
  take(j, "shuffle", c.shuffle);
  take(j, "trace_every", c.trace_every);
  take(j, "eval_count", c.eval_count);
  return c;
}

}  // namespace

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(); }

TrainConfig config_from_json(const std::string& json_text, TrainConfig base) {
  try {
    return config_from(json::parse(json_text), std::move(base));
  } catch (const json::exception& e) {
    throw FormatError(std::string("invalid configuration JSON: ") + e.what());
  }
}

std::string sidecar_path(const std::string& checkpoint_path) { return checkpoint_path + ".json"; }

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const auto& p = checkpoint.params;
  p.validate();
  const NetShape s = p.shape();
  check_same_length("power M rows", s.output, checkpoint.power.M.rows());
  check_same_length("power M columns", s.hidden + 1, checkpoint.power.M.cols());
  check_same_length("power N rows", s.hidden, checkpoint.power.N.rows());
  check_same_length("power N columns", s.latent + 1, checkpoint.power.N.cols());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  detail::write_magic(out, kMagic);
  detail::write_le(out, kCheckpointVersion);
  detail::write_le(out, static_cast<std::uint32_t>(s.latent));
  detail::write_le(out, static_cast<std::uint32_t>(s.hidden));
  detail::write_le(out, static_cast<std::uint32_t>(s.output));
  write_rows(out, p.A);
  write_rows(out, p.a);
  write_rows(out, p.B);
  write_rows(out, p.b);
  write_rows(out, checkpoint.power.M);
  write_rows(out, checkpoint.power.N);
  detail::write_le(out, checkpoint.iteration);
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint,
                     const CheckpointMetadata& metadata) {
  save_checkpoint(path, checkpoint);
  json sidecar = {{"config", config_json(metadata.config)},
                  {"scale", to_string(metadata.scale)},
                  {"data", metadata.data_path},
                  {"format_version", kCheckpointVersion}};
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + sidecar_path(path));
  out << sidecar.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  detail::expect_magic(in, kMagic, path);
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  NetShape s;
  s.latent = detail::read_le<std::uint32_t>(in, "n");
  s.hidden = detail::read_le<std::uint32_t>(in, "m");
  s.output = detail::read_le<std::uint32_t>(in, "k");
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path + ": " + e.what());
  }

  Checkpoint c;
  c.params.A = read_rows(in, s.hidden, s.latent, "A");
  c.params.a = read_rows(in, s.hidden, 1, "a");
  c.params.B = read_rows(in, s.output, s.hidden, "B");
  c.params.b = read_rows(in, s.output, 1, "b");
  c.power.M = read_rows(in, s.output, s.hidden + 1, "M");
  c.power.N = read_rows(in, s.hidden, s.latent + 1, "N");
  c.iteration = detail::read_le<std::uint64_t>(in, "iteration");
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(path + ": trailing bytes after checkpoint payload");
  return c;
}

Checkpoint load_checkpoint(const std::string& path, const NetShape& expected) {
  Checkpoint c = load_checkpoint(path);
  const NetShape got = c.params.shape();
  if (!(got == expected)) {
    std::ostringstream msg;
    msg << path << ": checkpoint shape " << got.latent << "x" << got.hidden << "x" << got.output
        << " does not match expected " << expected.latent << "x" << expected.hidden << "x"
        << expected.output;
    throw FormatError(msg.str());
  }
  return c;
}

std::optional<CheckpointMetadata> load_checkpoint_metadata(const std::string& checkpoint_path) {
  const std::string p = sidecar_path(checkpoint_path);
  if (!std::filesystem::exists(p)) return std::nullopt;
  std::ifstream in(p);
  try {
    const json j = json::parse(in);
    CheckpointMetadata meta;
    meta.config = config_from(j.at("config"), {});
    meta.scale = parse_scale_mode(j.value("scale", std::string("none")));
    meta.data_path = j.value("data", std::string());
    return meta;
  } catch (const json::exception& e) {
    throw FormatError(p + ": " + e.what());
  }
}

}  // namespace mmdgen
