#pragma once

// Stochastic-approximation lab: classical, batch, smoothed and delayed SGD on
// a pluggable objective, the relative estimation-difference power between two
// runs, the average trajectory and the Lyapunov steady-state prediction.
//
// Step counts are always in consumed samples: one call to the objective's
// gradient per sample, whatever the variant.

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mmdgen/rng.hpp"

namespace mmdgen::sa {

/// theta -> E_W[h(W, theta)] minimised through samples W.
struct StochasticObjective {
  Eigen::Index dim = 0;
  std::function<Eigen::VectorXd(Rng&)> sample;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& w, const Eigen::VectorXd& theta)> grad;
  // Analytic E_W[H(W, theta)], when known.
  std::function<Eigen::VectorXd(const Eigen::VectorXd& theta)> mean_grad;
  std::optional<Eigen::VectorXd> minimizer;
  std::optional<Eigen::MatrixXd> hessian;   // C at the minimizer
  std::optional<Eigen::MatrixXd> grad_cov;  // E[H H^T] at the minimizer
};

/// y = theta_star^T X + w, X ~ N(0, I), w ~ N(0, noise_var).
struct RegressionModel {
  Eigen::VectorXd theta_star;
  double noise_var = 0.1;
};

/// Gradient of (y - theta^T X)^2, i.e. H = -2 (y - theta^T X) X. Samples are
/// packed as [X; y]. C = 2I and E[H H^T] = 4 noise_var I at the minimizer.
StochasticObjective regression_objective(const RegressionModel& model);

enum class VariantKind { classical, batch, smoothed, delayed };

struct SAVariant {
  VariantKind kind = VariantKind::classical;
  // Step size; for `batch` this is mu' and the per-block step is mu'/K times
  // the summed gradients.
  double mu = 0.0;
  int batch = 1;
  double rho = 0.0;
  int delay = 1;

  static SAVariant classical(double mu) { return {VariantKind::classical, mu, 1, 0.0, 1}; }
  static SAVariant batched(double mu_prime, int k) { return {VariantKind::batch, mu_prime, k, 0.0, 1}; }
  static SAVariant smoothed(double mu, double rho) { return {VariantKind::smoothed, mu, 1, rho, 1}; }
  static SAVariant delayed(double mu, int k) { return {VariantKind::delayed, mu, 1, 0.0, k}; }

  void validate() const;
  std::string name() const;
};

/// Parses "classical", "batch:K", "smooth:RHO" or "delay:K". Batch variants get
/// mu' = K * mu so that their per-sample rate matches the classical one.
SAVariant parse_variant(std::string_view spec, double mu);

/// One variant's state, fed one sample at a time.
class VariantRunner {
 public:
  VariantRunner(const StochasticObjective& objective, const SAVariant& variant,
                Eigen::VectorXd theta0);

  void consume(const Eigen::VectorXd& w);

  const Eigen::VectorXd& theta() const { return theta_; }
  const Eigen::VectorXd& smoothed_gradient() const { return smoothed_; }
  std::uint64_t samples() const { return samples_; }
  std::uint64_t grad_calls() const { return grad_calls_; }
  const SAVariant& variant() const { return variant_; }

 private:
  const StochasticObjective* objective_;
  SAVariant variant_;
  Eigen::VectorXd theta_;
  Eigen::VectorXd accumulated_;
  Eigen::VectorXd smoothed_;
  std::deque<Eigen::VectorXd> history_;  // theta_{t-1}, ..., theta_{t-delay}
  std::uint64_t samples_ = 0;
  std::uint64_t grad_calls_ = 0;
};

struct Trajectory {
  Eigen::MatrixXd thetas;  // dim x (samples + 1); column t is theta after t samples
  Eigen::VectorXd smoothed_gradient;
  std::uint64_t grad_calls = 0;
};

/// Runs one variant on the sample stream of Rng(seed), starting from theta0
/// (zero when empty).
Trajectory run_variant(const StochasticObjective& objective, const SAVariant& variant,
                       std::uint64_t samples, std::uint64_t seed,
                       const Eigen::VectorXd& theta0 = {});

/// 2|a - b|^2 / (|a - theta*|^2 + |b - theta*|^2), in [0, 4].
double relative_diff_power(const Eigen::VectorXd& theta_a, const Eigen::VectorXd& theta_b,
                           const Eigen::VectorXd& theta_star);

/// theta_bar_t = theta_bar_{t-1} - mu E[H(W, theta_bar_{t-1})]; dim x (steps + 1).
Eigen::MatrixXd average_trajectory(const StochasticObjective& objective, double mu,
                                   std::uint64_t steps, const Eigen::VectorXd& theta0);

/// Solves C Q + Q C^T = R through the Kronecker form. C must have eigenvalues
/// with positive real part; the result is symmetrised.
Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& C, const Eigen::MatrixXd& R);

/// mu * trace(Q): the predicted steady-state E|theta - theta*|^2.
double predicted_steady_state(double mu, const Eigen::MatrixXd& Q);

/// First sample index at which the average-trajectory contraction
/// |1 - mu lambda|^t of the slowest mode of C falls below `threshold`.
std::uint64_t steady_state_start(const Eigen::MatrixXd& C, double mu, double threshold = 1e-3);

/// First sample index at which the average-trajectory error power
/// |theta_bar_t - theta*|^2 from theta0 drops to `factor * steady_level` or
/// below; before it the mean trajectory dominates the fluctuations. Capped at
/// `max_steps`.
std::uint64_t transient_end(const StochasticObjective& objective, double mu,
                            const Eigen::VectorXd& theta0, double steady_level,
                            double factor = 10.0, std::uint64_t max_steps = 100'000'000);

struct VariantSeries {
  SAVariant variant;
  std::vector<double> err_power;       // |theta_t - theta*|^2, t = 1..samples
  std::vector<double> rel_diff_power;  // against the reference run; empty for the reference
};

struct ComparisonReport {
  std::vector<VariantSeries> series;  // series[0] is the reference
  std::uint64_t samples = 0;
};

/// Runs every variant on one shared sample stream. The first variant is the
/// reference for the difference series. Samples where both runs sit exactly
/// at theta* record a difference of 0.
ComparisonReport compare_variants(const StochasticObjective& objective,
                                  const std::vector<SAVariant>& variants, std::uint64_t samples,
                                  std::uint64_t seed, const Eigen::VectorXd& theta0 = {});

/// Mean of `values[begin, begin + count)`, clipped to the series length.
double window_mean(const std::vector<double>& values, std::uint64_t begin, std::uint64_t count);

}  // namespace mmdgen::sa
