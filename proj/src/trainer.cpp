#include "mmdgen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "mmdgen/error.hpp"

namespace mmdgen {
namespace {

// Offsets the evaluation and shuffle streams away from the training stream.
constexpr std::uint64_t kEvalStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kShuffleStream = 0xc2b2ae3d27d4eb4fULL;

void require_finite(const LayerGradients<double>& grads, std::uint64_t iteration) {
  if (!grads.G.allFinite() || !grads.D.allFinite())
    throw NumericError("non-finite gradient", iteration);
}

void require_finite(const GeneratorParams<double>& params, std::uint64_t iteration) {
  if (!params.A.allFinite() || !params.a.allFinite() || !params.B.allFinite() ||
      !params.b.allFinite())
    throw NumericError("non-finite parameters", iteration);
}

void update_power(GradPower& power, const LayerGradients<double>& grads, const TrainConfig& config,
                  std::uint64_t iteration) {
  update_power(power, grads, config.lambda,
               iteration == 0 && config.power_init == PowerInit::first_gradient);
}

void check_history(const TrainerState& state, Eigen::Index width) {
  if (state.prev.batch() != width || state.prev_pair.V.cols() != width)
    throw std::invalid_argument("trainer state history holds " +
                                std::to_string(state.prev.batch()) + " columns, step needs " +
                                std::to_string(width));
}

}  // namespace

void update_power(GradPower& power, const LayerGradients<double>& grads, double lambda,
                  bool seed_from_gradient) {
  if (seed_from_gradient) {
    power.M = grads.G.array().square().matrix();
    power.N = grads.D.array().square().matrix();
    return;
  }
  power.M = lambda * power.M + (1.0 - lambda) * grads.G.array().square().matrix();
  power.N = lambda * power.N + (1.0 - lambda) * grads.D.array().square().matrix();
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "preliminary") return Algorithm::preliminary;
  if (name == "final") return Algorithm::final;
  if (name == "batched") return Algorithm::batched;
  throw std::invalid_argument("unknown algorithm: " + std::string(name));
}

std::string to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::preliminary: return "preliminary";
    case Algorithm::final: return "final";
    case Algorithm::batched: return "batched";
  }
  return "?";
}

PowerInit parse_power_init(std::string_view name) {
  if (name == "first_gradient") return PowerInit::first_gradient;
  if (name == "zero") return PowerInit::zero;
  throw std::invalid_argument("unknown power init: " + std::string(name));
}

std::string to_string(PowerInit init) {
  return init == PowerInit::zero ? "zero" : "first_gradient";
}

void TrainConfig::validate() const {
  shape.validate();
  KernelSpec<double>{bandwidth};
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be positive");
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("lambda must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  if (eval_count < 1) throw std::invalid_argument("eval_count must be >= 1");
}

TrainerState make_initial_state(const TrainConfig& config) {
  config.validate();
  TrainerState state;
  state.rng = Rng(config.seed);
  state.params = init_params<double>(config.shape, state.rng);
  state.power = GradPower::zeros(config.shape);
  state.prev = LayerCache<double>::zeros(config.shape, config.step_width());
  state.prev_pair = BackpropPair<double>::zeros(config.shape, config.step_width());
  return state;
}

Eigen::MatrixXd kernel_residual(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& other, double bandwidth) {
  check_same_length("residual data rows", y.rows(), x.rows());
  check_same_length("residual data columns", y.cols(), x.cols());
  check_same_length("residual pair rows", y.rows(), other.rows());
  check_same_length("residual pair columns", y.cols(), other.cols());
  const KernelSpec<double> spec(bandwidth);
  Eigen::MatrixXd r(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    const double k_yx = gaussian_kernel(y.col(j), x.col(j), spec);
    const double k_yy = gaussian_kernel(y.col(j), other.col(j), spec);
    r.col(j) = k_yx * (y.col(j) - x.col(j)) - k_yy * (y.col(j) - other.col(j));
  }
  return r;
}

void apply_normalized_update(GeneratorParams<double>& params, const LayerGradients<double>& grads,
                             const GradPower& power, double mu, double epsilon) {
  const Eigen::Index m = params.B.cols();
  const Eigen::Index n = params.A.cols();
  const Eigen::ArrayXXd step_g = mu * grads.G.array() / (power.M.array() + epsilon).sqrt();
  const Eigen::ArrayXXd step_d = mu * grads.D.array() / (power.N.array() + epsilon).sqrt();
  params.B -= step_g.leftCols(m).matrix();
  params.b -= step_g.col(m).matrix();
  params.A -= step_d.leftCols(n).matrix();
  params.a -= step_d.col(n).matrix();
}

void apply_plain_update(GeneratorParams<double>& params, const LayerGradients<double>& grads,
                        double mu) {
  const Eigen::Index m = params.B.cols();
  const Eigen::Index n = params.A.cols();
  params.B -= mu * grads.G.leftCols(m);
  params.b -= mu * grads.G.col(m);
  params.A -= mu * grads.D.leftCols(n);
  params.a -= mu * grads.D.col(n);
}

LayerGradients<double> step_preliminary(TrainerState& state, const TrainConfig& config,
                                        const Eigen::VectorXd& x) {
  const NetShape& shape = config.shape;
  check_same_length("training vector", shape.output, x.size());
  const Eigen::MatrixXd z1 = latent_batch(state.rng, shape.latent, 1);
  const Eigen::MatrixXd z2 = latent_batch(state.rng, shape.latent, 1);
  const auto c1 = forward(state.params, z1);
  const auto c2 = forward(state.params, z2);
  const Eigen::MatrixXd r1 = kernel_residual(c1.Y, x, c2.Y, config.bandwidth);
  const Eigen::MatrixXd r2 = kernel_residual(c2.Y, x, c1.Y, config.bandwidth);

  auto grads = layer_gradients(backprop_pair(state.params, c1, r1), c1);
  grads += layer_gradients(backprop_pair(state.params, c2, r2), c2);
  require_finite(grads, state.iteration + 1);

  if (config.normalize_preliminary) {
    update_power(state.power, grads, config, state.iteration);
    apply_normalized_update(state.params, grads, state.power, config.mu, config.epsilon);
  } else {
    apply_plain_update(state.params, grads, config.mu);
  }
  require_finite(state.params, state.iteration + 1);
  ++state.iteration;
  return grads;
}

LayerGradients<double> step_final(TrainerState& state, const TrainConfig& config,
                                  const Eigen::VectorXd& x) {
  const NetShape& shape = config.shape;
  check_same_length("training vector", shape.output, x.size());
  check_history(state, 1);

  const Eigen::VectorXd z = latent_batch(state.rng, shape.latent, 1);
  const auto cache = forward(state.params, z);
  const Eigen::VectorXd y = cache.Y.col(0);
  const Eigen::VectorXd y_prev = state.prev.Y.col(0);
  const KernelSpec<double> spec(config.bandwidth);
  const Eigen::VectorXd r =
      gaussian_kernel(y, x, spec) * (y - x) - gaussian_kernel(y, y_prev, spec) * (y - y_prev);
  const auto pair = backprop_pair(state.params, cache, r);

  auto grads = layer_gradients(pair, cache);
  grads += layer_gradients(state.prev_pair, state.prev);
  require_finite(grads, state.iteration + 1);

  update_power(state.power, grads, config, state.iteration);
  apply_normalized_update(state.params, grads, state.power, config.mu, config.epsilon);
  require_finite(state.params, state.iteration + 1);

  state.prev = cache;
  state.prev_pair = pair;
  ++state.iteration;
  return grads;
}

LayerGradients<double> step_batched(TrainerState& state, const TrainConfig& config,
                                    const Eigen::MatrixXd& x_batch) {
  const NetShape& shape = config.shape;
  check_same_length("batch rows", shape.output, x_batch.rows());
  check_same_length("batch columns", config.batch, x_batch.cols());
  check_history(state, config.batch);

  const Eigen::MatrixXd z = latent_batch(state.rng, shape.latent, config.batch);
  auto cache = forward(state.params, z);
  const Eigen::MatrixXd r = kernel_residual(cache.Y, x_batch, state.prev.Y, config.bandwidth);
  auto pair = backprop_pair(state.params, cache, r);

  auto grads = layer_gradients(pair, cache);
  grads += layer_gradients(state.prev_pair, state.prev);
  require_finite(grads, state.iteration + 1);

  update_power(state.power, grads, config, state.iteration);
  apply_normalized_update(state.params, grads, state.power, config.mu, config.epsilon);
  require_finite(state.params, state.iteration + 1);

  state.prev = std::move(cache);
  state.prev_pair = std::move(pair);
  ++state.iteration;
  return grads;
}

EvalPairing make_eval_pairing(const TrainConfig& config, const Eigen::MatrixXd& data) {
  check_same_length("evaluation data", config.shape.output, data.rows());
  if (data.cols() < 1) throw std::invalid_argument("evaluation data is empty");
  Rng rng(config.seed ^ kEvalStream);
  EvalPairing pairing;
  pairing.z1 = latent_batch(rng, config.shape.latent, config.eval_count);
  pairing.z2 = latent_batch(rng, config.shape.latent, config.eval_count);
  pairing.x.resize(data.rows(), config.eval_count);
  for (Eigen::Index j = 0; j < config.eval_count; ++j) pairing.x.col(j) = data.col(j % data.cols());
  return pairing;
}

TraceRow evaluate(const GeneratorParams<double>& params, const EvalPairing& pairing,
                  double bandwidth) {
  const KernelSpec<double> spec(bandwidth);
  const Eigen::MatrixXd y1 = forward(params, pairing.z1).Y;
  const Eigen::MatrixXd y2 = forward(params, pairing.z2).Y;
  double loss = 0.0;
  for (Eigen::Index j = 0; j < y1.cols(); ++j)
    loss += triple_loss(y1.col(j), y2.col(j), pairing.x.col(j), spec);
  TraceRow row;
  row.empirical_loss = loss / static_cast<double>(y1.cols());
  row.mmd_score = mmd_score(SampleSet<double>(y1), SampleSet<double>(pairing.x), spec);
  return row;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const Dataset* eval_data) {
  config.validate();
  if (data.count() < 1) throw std::invalid_argument("training dataset is empty");
  check_same_length("training data dimension", config.shape.output, data.dim());
  const Eigen::Index width = config.step_width();
  if (data.count() < width)
    throw std::invalid_argument("dataset has " + std::to_string(data.count()) +
                                " vectors, fewer than the batch size " + std::to_string(width));

  const auto start = std::chrono::steady_clock::now();
  const EvalPairing pairing =
      make_eval_pairing(config, eval_data ? eval_data->columns : data.columns);

  TrainResult result{make_initial_state(config), {}};
  TrainerState& state = result.state;
  auto record = [&] {
    TraceRow row = evaluate(state.params, pairing, config.bandwidth);
    row.iteration = state.iteration;
    row.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    result.trace.push_back(row);
  };
  record();

  // Trailing vectors that do not fill a whole batch are skipped each sweep.
  const Eigen::Index steps_per_sweep = data.count() / width;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.count()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng shuffle_rng(config.seed ^ kShuffleStream);
  Eigen::MatrixXd block(data.dim(), width);

  for (std::uint64_t round = 0; round < config.rounds; ++round) {
    if (config.shuffle) {
      for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[shuffle_rng.next_u64() % (i + 1)]);
    }
    for (Eigen::Index t = 0; t < steps_per_sweep; ++t) {
      for (Eigen::Index j = 0; j < width; ++j)
        block.col(j) = data.columns.col(order[static_cast<std::size_t>(t * width + j)]);
      switch (config.algorithm) {
        case Algorithm::preliminary: step_preliminary(state, config, block.col(0)); break;
        case Algorithm::final: step_final(state, config, block.col(0)); break;
        case Algorithm::batched: step_batched(state, config, block); break;
      }
      if (config.trace_every > 0 && state.iteration % config.trace_every == 0) record();
    }
    if (config.trace_every == 0) record();
  }
  if (result.trace.back().iteration != state.iteration) record();
  return result;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     const std::string& header_comment) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(10);
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  out << "iteration,empirical_loss,mmd_score,wall_ms\n";
  for (const auto& row : trace)
    out << row.iteration << ',' << row.empirical_loss << ',' << row.mmd_score << ','
        << row.wall_ms << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace mmdgen
