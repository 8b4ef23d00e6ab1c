// mmdgen: train kernel-distance generators, sample from them, score sample
// sets and run the stochastic-approximation benchmark.
//
// Exit codes: 0 success, 1 runtime failure, 2 bad arguments.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmdgen/checkpoint.hpp"
#include "mmdgen/dataset.hpp"
#include "mmdgen/error.hpp"
#include "mmdgen/generator.hpp"
#include "mmdgen/kernel.hpp"
#include "mmdgen/sa_lab.hpp"
#include "mmdgen/trainer.hpp"

namespace {

using nlohmann::json;

// Thrown for argument combinations CLI11 cannot check on its own.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

constexpr std::uint64_t kThetaStarStream = 0x5851f42d4c957f2dULL;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, format, scale, config_file, out, trace, eval_data;
  bool transpose = false;
  mmdgen::TrainConfig config;
  std::string algorithm = "batched";
  std::string power_init = "first_gradient";
  CLI::App* cmd = nullptr;
};

void add_train(CLI::App& app, TrainArgs& a) {
  auto* c = app.add_subcommand("train", "Train a generator by stochastic kernel-distance descent");
  a.cmd = c;
  auto& cfg = a.config;
  c->add_option("--data", a.data, "Training vectors (one per column)")->required();
  c->add_option("--format", a.format, "csv | rawf64 | idx (default: from extension)");
  c->add_option("--scale", a.scale, "none | minmax | fixed255 (default: fixed255 for idx, else none)");
  c->add_flag("--transpose", a.transpose, "CSV holds one vector per row");
  c->add_option("--config", a.config_file, "JSON file with training settings; flags take precedence");
  c->add_option("--latent", cfg.shape.latent, "Latent dimension n")->capture_default_str();
  c->add_option("--hidden", cfg.shape.hidden, "Hidden width m")->capture_default_str();
  c->add_option("--bandwidth", cfg.bandwidth, "Gaussian kernel bandwidth h")->capture_default_str();
  c->add_option("--mu", cfg.mu, "Learning rate")->capture_default_str();
  c->add_option("--lambda", cfg.lambda, "Gradient power smoothing")->capture_default_str();
  c->add_option("--epsilon", cfg.epsilon, "Normalisation guard")->capture_default_str();
  c->add_option("--batch", cfg.batch, "Columns per batched step")->capture_default_str();
  c->add_option("--rounds", cfg.rounds, "Sweeps over the dataset")->capture_default_str();
  c->add_option("--algorithm", a.algorithm, "preliminary | final | batched")
      ->check(CLI::IsMember({"preliminary", "final", "batched"}))
      ->capture_default_str();
  c->add_option("--power-init", a.power_init, "first_gradient | zero")
      ->check(CLI::IsMember({"first_gradient", "zero"}))
      ->capture_default_str();
  c->add_flag("--normalize-preliminary", cfg.normalize_preliminary,
              "Use normalised updates in the preliminary algorithm");
  c->add_flag("--shuffle", cfg.shuffle, "Shuffle the dataset each sweep");
  c->add_option("--trace-every", cfg.trace_every, "Steps between trace rows (0: once per sweep)")
      ->capture_default_str();
  c->add_option("--eval-count", cfg.eval_count, "Size of the evaluation pairing")
      ->capture_default_str();
  c->add_option("--eval-data", a.eval_data, "Held-out vectors for the trace (same format)");
  c->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  c->add_option("--out", a.out, "Checkpoint path")->required();
  c->add_option("--trace", a.trace, "Loss trace CSV path");
}

mmdgen::TrainConfig resolve_train_config(const TrainArgs& a, std::int64_t data_dim) {
  mmdgen::TrainConfig cfg;
  if (!a.config_file.empty()) cfg = mmdgen::config_from_json(read_file(a.config_file), cfg);
  auto given = [&](const char* name) { return a.cmd->get_option(name)->count() > 0; };
  const auto& f = a.config;
  if (given("--latent")) cfg.shape.latent = f.shape.latent;
  if (given("--hidden")) cfg.shape.hidden = f.shape.hidden;
  if (given("--bandwidth")) cfg.bandwidth = f.bandwidth;
  if (given("--mu")) cfg.mu = f.mu;
  if (given("--lambda")) cfg.lambda = f.lambda;
  if (given("--epsilon")) cfg.epsilon = f.epsilon;
  if (given("--batch")) cfg.batch = f.batch;
  if (given("--rounds")) cfg.rounds = f.rounds;
  if (given("--seed")) cfg.seed = f.seed;
  if (given("--algorithm")) cfg.algorithm = mmdgen::parse_algorithm(a.algorithm);
  if (given("--power-init")) cfg.power_init = mmdgen::parse_power_init(a.power_init);
  if (given("--normalize-preliminary")) cfg.normalize_preliminary = true;
  if (given("--shuffle")) cfg.shuffle = true;
  if (given("--trace-every")) cfg.trace_every = f.trace_every;
  if (given("--eval-count")) cfg.eval_count = f.eval_count;
  cfg.shape.output = data_dim;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

mmdgen::LoadOptions load_options(const std::string& path, const std::string& format,
                                 const std::string& scale, bool transpose) {
  mmdgen::LoadOptions opts;
  try {
    opts.format = format.empty() ? mmdgen::infer_data_format(path) : mmdgen::parse_data_format(format);
    if (!scale.empty())
      opts.scale = mmdgen::parse_scale_mode(scale);
    else
      opts.scale = opts.format == mmdgen::DataFormat::idx ? mmdgen::ScaleMode::fixed255
                                                           : mmdgen::ScaleMode::none;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  opts.transpose = transpose;
  return opts;
}

int run_train(const TrainArgs& a) {
  const auto opts = load_options(a.data, a.format, a.scale, a.transpose);
  const mmdgen::Dataset data = mmdgen::load_dataset(a.data, opts);
  const mmdgen::TrainConfig cfg = resolve_train_config(a, data.dim());

  std::optional<mmdgen::Dataset> eval;
  if (!a.eval_data.empty()) {
    auto eval_opts = load_options(a.eval_data, a.format, a.scale, a.transpose);
    eval = mmdgen::load_dataset(a.eval_data, eval_opts);
  }

  std::cerr << "training " << cfg.shape.latent << "x" << cfg.shape.hidden << "x"
            << cfg.shape.output << " on " << data.count() << " vectors ("
            << mmdgen::to_string(cfg.algorithm) << ")\n";
  const auto result = mmdgen::train(cfg, data, eval ? &*eval : nullptr);

  mmdgen::CheckpointMetadata meta{cfg, data.scale, data.source_path};
  mmdgen::save_checkpoint(a.out, {result.state.params, result.state.power, result.state.iteration},
                          meta);
  const json effective = {{"config", json::parse(mmdgen::config_to_json(cfg))},
                          {"scale", mmdgen::to_string(data.scale)},
                          {"data", data.source_path}};
  if (!a.trace.empty()) mmdgen::write_trace_csv(a.trace, result.trace, effective.dump());

  const auto& last = result.trace.back();
  std::cout << json{{"iterations", result.state.iteration},
                    {"empirical_loss", last.empirical_loss},
                    {"mmd_score", last.mmd_score},
                    {"checkpoint", a.out}}
                   .dump()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string model, out, format;
  std::int64_t count = 1;
  std::uint64_t seed = 0;
};

void add_generate(CLI::App& app, GenerateArgs& a) {
  auto* c = app.add_subcommand("generate", "Sample vectors from a trained generator");
  c->add_option("--model", a.model, "Checkpoint written by train")->required();
  c->add_option("--count", a.count, "Number of vectors")->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--seed", a.seed, "Latent seed")->capture_default_str();
  c->add_option("--out", a.out, "Output path (.csv or rawf64)")->required();
  c->add_option("--format", a.format, "csv | rawf64 (default: from extension)")
      ->check(CLI::IsMember({"csv", "rawf64"}));
}

int run_generate(const GenerateArgs& a) {
  const auto checkpoint = mmdgen::load_checkpoint(a.model);
  const auto samples = mmdgen::generate(checkpoint.params, a.count, a.seed);
  const auto format = a.format.empty() ? mmdgen::infer_data_format(a.out)
                                       : mmdgen::parse_data_format(a.format);
  if (format == mmdgen::DataFormat::csv)
    mmdgen::write_csv(a.out, samples.matrix());
  else
    mmdgen::write_rawf64(a.out, samples.matrix());
  std::cout << json{{"count", samples.count()}, {"dim", samples.dim()}, {"out", a.out}}.dump()
            << '\n';
  return 0;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string a, b, format, scale = "none";
  double bandwidth = 36.0;
  bool transpose = false;
};

void add_score(CLI::App& app, ScoreArgs& s) {
  auto* c = app.add_subcommand(
      "score",
      "Biased MMD^2 estimate between two sample sets. Smaller values mean the sets are closer, "
      "so better generators produce smaller scores.");
  c->add_option("--a", s.a, "First sample set")->required();
  c->add_option("--b", s.b, "Second sample set")->required();
  c->add_option("--bandwidth", s.bandwidth, "Gaussian kernel bandwidth h")->capture_default_str();
  c->add_option("--format", s.format, "csv | rawf64 | idx (default: from extension)");
  c->add_option("--scale", s.scale, "none | minmax | fixed255")->capture_default_str();
  c->add_flag("--transpose", s.transpose, "CSV holds one vector per row");
}

int run_score(const ScoreArgs& s) {
  const auto opts_a = load_options(s.a, s.format, s.scale, s.transpose);
  const auto opts_b = load_options(s.b, s.format, s.scale, s.transpose);
  Eigen::MatrixXd a = mmdgen::read_matrix(s.a, opts_a.format, s.transpose);
  Eigen::MatrixXd b = mmdgen::read_matrix(s.b, opts_b.format, s.transpose);
  if (opts_a.scale != mmdgen::ScaleMode::none) mmdgen::apply_scale(a, opts_a.scale);
  if (opts_b.scale != mmdgen::ScaleMode::none) mmdgen::apply_scale(b, opts_b.scale);
  const mmdgen::KernelSpec<double> spec(s.bandwidth);
  const double score =
      mmdgen::mmd_score(mmdgen::SampleSet<double>(a), mmdgen::SampleSet<double>(b), spec);
  std::cout << json{{"mmd_score", score}, {"bandwidth", s.bandwidth}}.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- sa-bench

struct BenchArgs {
  std::int64_t dim = 5;
  double noise_var = 0.1;
  double mu = 1e-3;
  std::string variants = "classical,batch:10,smooth:0.9,delay:5";
  std::uint64_t samples = 200000;
  std::uint64_t seed = 0;
  std::uint64_t stride = 1;
  std::uint64_t window = 100000;
  std::string out, summary;
};

void add_sa_bench(CLI::App& app, BenchArgs& a) {
  auto* c = app.add_subcommand(
      "sa-bench", "Compare SGD variants on linear regression against the classical run");
  c->add_option("--dim", a.dim, "Regression dimension")->check(CLI::PositiveNumber)->capture_default_str();
  c->add_option("--noise-var", a.noise_var, "Observation noise variance")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c->add_option("--mu", a.mu, "Classical step size (gradient of the squared error)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--variants", a.variants,
                "Comma list: classical, batch:K (mu' = K mu), smooth:RHO, delay:K; the first "
                "entry is the reference")
      ->capture_default_str();
  c->add_option("--samples", a.samples, "Samples consumed per variant")->capture_default_str();
  c->add_option("--seed", a.seed, "Seed of the shared sample stream")->capture_default_str();
  c->add_option("--stride", a.stride, "Write every stride-th sample to the CSV")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--window", a.window, "Steady-state averaging window in samples")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c->add_option("--out", a.out, "Series CSV path")->required();
  c->add_option("--summary", a.summary, "Also write the JSON summary to this path");
}

int run_sa_bench(const BenchArgs& a) {
  namespace sa = mmdgen::sa;
  std::vector<sa::SAVariant> variants;
  std::stringstream list(a.variants);
  std::string item;
  try {
    while (std::getline(list, item, ','))
      if (!item.empty()) variants.push_back(sa::parse_variant(item, a.mu));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (variants.empty()) throw UsageError("no variants given");
  if (a.samples < 1) throw UsageError("--samples must be >= 1");

  mmdgen::Rng star_rng(a.seed ^ kThetaStarStream);
  sa::RegressionModel model{mmdgen::latent_batch(star_rng, a.dim, 1).col(0), a.noise_var};
  const auto objective = sa::regression_objective(model);
  const auto report = sa::compare_variants(objective, variants, a.samples, a.seed);

  const Eigen::MatrixXd Q = sa::solve_lyapunov(*objective.hessian, *objective.grad_cov);
  const double prediction = sa::predicted_steady_state(a.mu, Q);
  const std::uint64_t start =
      std::min<std::uint64_t>(sa::steady_state_start(*objective.hessian, a.mu), a.samples - 1);
  const std::uint64_t transient = std::min<std::uint64_t>(
      sa::transient_end(objective, a.mu, Eigen::VectorXd::Zero(a.dim), prediction), a.samples);

  std::ofstream csv(a.out, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + a.out);
  csv.precision(10);
  csv << "sample_index,variant,err_power,rel_diff_power\n";
  for (std::uint64_t t = 0; t < a.samples; t += a.stride)
    for (const auto& s : report.series) {
      csv << t + 1 << ',' << s.variant.name() << ',' << s.err_power[t] << ',';
      if (!s.rel_diff_power.empty()) csv << s.rel_diff_power[t];
      csv << '\n';
    }
  if (!csv) throw std::runtime_error("failed writing " + a.out);

  json entries = json::array();
  for (const auto& s : report.series) {
    json e = {{"variant", s.variant.name()},
              {"mu", s.variant.mu},
              {"steady_err_power", sa::window_mean(s.err_power, start, a.window)}};
    if (!s.rel_diff_power.empty()) {
      e["steady_rel_diff_power"] = sa::window_mean(s.rel_diff_power, start, a.window);
      const auto last = s.rel_diff_power.begin() + static_cast<std::ptrdiff_t>(transient);
      e["max_transient_rel_diff_power"] =
          transient > 0 ? *std::max_element(s.rel_diff_power.begin(), last) : 0.0;
    }
    entries.push_back(e);
  }
  const json summary = {{"dim", a.dim},
                        {"noise_var", a.noise_var},
                        {"mu", a.mu},
                        {"samples", a.samples},
                        {"seed", a.seed},
                        {"transient_end", transient},
                        {"steady_state_start", start},
                        {"steady_state_window", a.window},
                        {"lyapunov_prediction", prediction},
                        {"variants", entries}};
  if (!a.summary.empty()) {
    std::ofstream out(a.summary, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + a.summary);
    out << summary.dump(2) << '\n';
  }
  std::cout << summary.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel-distance training of two-layer generative networks"};
  app.require_subcommand(1);
  TrainArgs train_args;
  GenerateArgs generate_args;
  ScoreArgs score_args;
  BenchArgs bench_args;
  add_train(app, train_args);
  add_generate(app, generate_args);
  add_score(app, score_args);
  add_sa_bench(app, bench_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (const auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return 2;
  }

  try {
    if (app.got_subcommand("train")) return run_train(train_args);
    if (app.got_subcommand("generate")) return run_generate(generate_args);
    if (app.got_subcommand("score")) return run_score(score_args);
    if (app.got_subcommand("sa-bench")) return run_sa_bench(bench_args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
