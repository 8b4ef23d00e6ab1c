#pragma once

// Training loops for the kernel-distance generator.
//
//  * preliminary: two fresh latents per step, plain gradient update.
//  * final: one fresh latent per step; the previous step's latent, output and
//    backprop vectors serve as the second independent sample. Updates are
//    normalised elementwise by a running gradient power estimate.
//  * batched: the final algorithm on blocks of K columns, column j of the
//    current block paired with column j of the previous one.
//
// Residuals are
//   R = (Y - X) k(Y, X) - (Y - Y') k(Y, Y'),
// which is h/2 times the gradient of k(Y, Y') - k(Y, X) with respect to Y.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mmdgen/dataset.hpp"
#include "mmdgen/generator.hpp"
#include "mmdgen/kernel.hpp"
#include "mmdgen/rng.hpp"

namespace mmdgen {

enum class Algorithm { preliminary, final, batched };

// How the gradient power M, N is seeded on the first step.
enum class PowerInit {
  first_gradient,  // M = G^2, N = D^2 on the very first step
  zero,            // M = N = 0, then the lambda recursion from the start
};

Algorithm parse_algorithm(std::string_view name);
std::string to_string(Algorithm algorithm);
PowerInit parse_power_init(std::string_view name);
std::string to_string(PowerInit init);

struct TrainConfig {
  NetShape shape{10, 128, 784};
  double bandwidth = 36.0;
  double mu = 1e-3;
  double lambda = 0.999;
  double epsilon = 1e-8;
  Eigen::Index batch = 32;
  std::uint64_t rounds = 1;
  std::uint64_t seed = 0;
  Algorithm algorithm = Algorithm::batched;
  PowerInit power_init = PowerInit::first_gradient;
  // Normalise the preliminary step like the final one.
  bool normalize_preliminary = false;
  // Visit the dataset in a fresh random order each sweep.
  bool shuffle = false;
  // Steps between trace rows; 0 means one row per sweep.
  std::uint64_t trace_every = 0;
  // Size of the fixed evaluation pairing used for the trace.
  Eigen::Index eval_count = 500;

  void validate() const;
  // Columns per step: batch for the batched algorithm, 1 otherwise.
  Eigen::Index step_width() const { return algorithm == Algorithm::batched ? batch : 1; }
};

/// Running elementwise power of the gradients of [B b] (M) and [A a] (N).
struct GradPower {
  Eigen::MatrixXd M;
  Eigen::MatrixXd N;

  static GradPower zeros(const NetShape& s) {
    return {Eigen::MatrixXd::Zero(s.output, s.hidden + 1),
            Eigen::MatrixXd::Zero(s.hidden, s.latent + 1)};
  }
};

struct TrainerState {
  GeneratorParams<double> params;
  GradPower power;
  LayerCache<double> prev;         // Z, S, Y of the previous step (zeros before the first)
  BackpropPair<double> prev_pair;  // V, U of the previous step
  std::uint64_t iteration = 0;
  Rng rng;
};

/// Fresh state: Glorot-style weights drawn from Rng(seed), zero biases, zero
/// history sized for `config.step_width()` columns. The same generator then
/// supplies the latents.
TrainerState make_initial_state(const TrainConfig& config);

/// Residual block R; column j pairs y.col(j) with x.col(j) and other.col(j).
Eigen::MatrixXd kernel_residual(const Eigen::MatrixXd& y, const Eigen::MatrixXd& x,
                                const Eigen::MatrixXd& other, double bandwidth);

/// Elementwise power recursion M = lambda M + (1 - lambda) G^2 (same for N).
/// With `seed_from_gradient` the estimate is reset to G^2, D^2 instead.
void update_power(GradPower& power, const LayerGradients<double>& grads, double lambda,
                  bool seed_from_gradient);

/// Entrywise theta -= mu * grad / sqrt(power + eps) on both layers.
void apply_normalized_update(GeneratorParams<double>& params, const LayerGradients<double>& grads,
                             const GradPower& power, double mu, double epsilon);

void apply_plain_update(GeneratorParams<double>& params, const LayerGradients<double>& grads,
                        double mu);

// Each step mutates `state` and returns the gradient it applied.
LayerGradients<double> step_preliminary(TrainerState& state, const TrainConfig& config,
                                        const Eigen::VectorXd& x);
LayerGradients<double> step_final(TrainerState& state, const TrainConfig& config,
                                  const Eigen::VectorXd& x);
LayerGradients<double> step_batched(TrainerState& state, const TrainConfig& config,
                                    const Eigen::MatrixXd& x_batch);

struct TraceRow {
  std::uint64_t iteration = 0;
  double empirical_loss = 0.0;
  double mmd_score = 0.0;
  double wall_ms = 0.0;
};

/// Fixed pairing used to monitor training: latents Z1, Z2 and data X, all with
/// eval_count columns.
struct EvalPairing {
  Eigen::MatrixXd z1;
  Eigen::MatrixXd z2;
  Eigen::MatrixXd x;
};

EvalPairing make_eval_pairing(const TrainConfig& config, const Eigen::MatrixXd& data);

/// Mean triple loss over the pairing and the MMD score of the generated Z1
/// outputs against X.
TraceRow evaluate(const GeneratorParams<double>& params, const EvalPairing& pairing,
                  double bandwidth);

struct TrainResult {
  TrainerState state;
  std::vector<TraceRow> trace;
};

/// Runs `config.rounds` sweeps over `data` in stored order. Evaluation uses
/// `eval_data` when given, otherwise the leading columns of `data`.
TrainResult train(const TrainConfig& config, const Dataset& data,
                  const Dataset* eval_data = nullptr);

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& trace,
                     const std::string& header_comment = {});

}  // namespace mmdgen
