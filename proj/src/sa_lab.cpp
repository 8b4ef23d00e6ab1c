#include "mmdgen/sa_lab.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "mmdgen/error.hpp"

namespace mmdgen::sa {

StochasticObjective regression_objective(const RegressionModel& model) {
  const Eigen::Index d = model.theta_star.size();
  if (d < 1) throw std::invalid_argument("regression model needs a non-empty theta_star");
  if (!(model.noise_var >= 0.0)) throw std::invalid_argument("noise variance must be >= 0");

  StochasticObjective obj;
  obj.dim = d;
  const Eigen::VectorXd star = model.theta_star;
  const double noise_sd = std::sqrt(model.noise_var);
  obj.sample = [star, noise_sd, d](Rng& rng) {
    Eigen::VectorXd w(d + 1);
    for (Eigen::Index i = 0; i < d; ++i) w(i) = rng.normal();
    w(d) = star.dot(w.head(d)) + noise_sd * rng.normal();
    return w;
  };
  obj.grad = [d](const Eigen::VectorXd& w, const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    check_same_length("regression theta", d, theta.size());
    check_same_length("regression sample", d + 1, w.size());
    const double residual = w(d) - theta.dot(w.head(d));
    return -2.0 * residual * w.head(d);
  };
  obj.mean_grad = [star](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    return 2.0 * (theta - star);
  };
  obj.minimizer = star;
  obj.hessian = 2.0 * Eigen::MatrixXd::Identity(d, d);
  obj.grad_cov = 4.0 * model.noise_var * Eigen::MatrixXd::Identity(d, d);
  return obj;
}

void SAVariant::validate() const {
  if (!(mu >= 0.0)) throw std::invalid_argument("variant step size must be >= 0");
  switch (kind) {
    case VariantKind::classical:
      break;
    case VariantKind::batch:
      if (batch < 1) throw std::invalid_argument("batch variant needs K >= 1");
      break;
    case VariantKind::smoothed:
      if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("smoothing needs rho in (0, 1)");
      break;
    case VariantKind::delayed:
      if (delay < 1) throw std::invalid_argument("delayed variant needs k >= 1");
      break;
  }
}

std::string SAVariant::name() const {
  switch (kind) {
    case VariantKind::classical: return "classical";
    case VariantKind::batch: return "batch:" + std::to_string(batch);
    case VariantKind::smoothed: {
      std::string r = std::to_string(rho);
      while (r.size() > 1 && r.back() == '0') r.pop_back();
      return "smooth:" + r;
    }
    case VariantKind::delayed: return "delay:" + std::to_string(delay);
  }
  return "?";
}

SAVariant parse_variant(std::string_view spec, double mu) {
  const auto colon = spec.find(':');
  const std::string_view head = spec.substr(0, colon);
  const std::string arg = colon == spec.npos ? std::string() : std::string(spec.substr(colon + 1));
  auto need_arg = [&] {
    if (arg.empty()) throw std::invalid_argument("variant '" + std::string(spec) + "' needs a parameter");
  };
  auto to_int = [&] {
    std::size_t used = 0;
    const int v = std::stoi(arg, &used);
    if (used != arg.size()) throw std::invalid_argument("bad integer in variant " + std::string(spec));
    return v;
  };
  auto to_real = [&] {
    std::size_t used = 0;
    const double v = std::stod(arg, &used);
    if (used != arg.size()) throw std::invalid_argument("bad number in variant " + std::string(spec));
    return v;
  };

  SAVariant v;
  try {
    if (head == "classical" && colon == spec.npos) {
      v = SAVariant::classical(mu);
    } else if (head == "batch") {
      need_arg();
      const int k = to_int();
      v = SAVariant::batched(mu * k, k);
    } else if (head == "smooth") {
      need_arg();
      v = SAVariant::smoothed(mu, to_real());
    } else if (head == "delay") {
      need_arg();
      v = SAVariant::delayed(mu, to_int());
    } else {
      throw std::invalid_argument("unknown variant '" + std::string(spec) + "'");
    }
  } catch (const std::logic_error& e) {
    // std::stoi / std::stod report through invalid_argument and out_of_range.
    throw std::invalid_argument(std::string("bad variant '") + std::string(spec) + "': " + e.what());
  }
  v.validate();
  return v;
}

VariantRunner::VariantRunner(const StochasticObjective& objective, const SAVariant& variant,
                             Eigen::VectorXd theta0)
    : objective_(&objective), variant_(variant), theta_(std::move(theta0)) {
  variant_.validate();
  if (theta_.size() == 0) theta_ = Eigen::VectorXd::Zero(objective.dim);
  check_same_length("initial theta", objective.dim, theta_.size());
  accumulated_ = Eigen::VectorXd::Zero(objective.dim);
  smoothed_ = Eigen::VectorXd::Zero(objective.dim);
  history_.push_back(theta_);
}

void VariantRunner::consume(const Eigen::VectorXd& w) {
  ++samples_;
  ++grad_calls_;
  switch (variant_.kind) {
    case VariantKind::classical:
      theta_ -= variant_.mu * objective_->grad(w, theta_);
      break;
    case VariantKind::batch:
      accumulated_ += objective_->grad(w, theta_);
      if (samples_ % static_cast<std::uint64_t>(variant_.batch) == 0) {
        theta_ -= (variant_.mu / variant_.batch) * accumulated_;
        accumulated_.setZero();
      }
      break;
    case VariantKind::smoothed:
      smoothed_ = variant_.rho * smoothed_ + (1.0 - variant_.rho) * objective_->grad(w, theta_);
      theta_ -= variant_.mu * smoothed_;
      break;
    case VariantKind::delayed: {
      // history_.front() is theta_{t-k}, or theta_0 while t <= k.
      theta_ -= variant_.mu * objective_->grad(w, history_.front());
      history_.push_back(theta_);
      if (history_.size() > static_cast<std::size_t>(variant_.delay)) history_.pop_front();
      break;
    }
  }
}

Trajectory run_variant(const StochasticObjective& objective, const SAVariant& variant,
                       std::uint64_t samples, std::uint64_t seed, const Eigen::VectorXd& theta0) {
  Rng rng(seed);
  VariantRunner runner(objective, variant, theta0);
  Trajectory out;
  out.thetas.resize(objective.dim, static_cast<Eigen::Index>(samples) + 1);
  out.thetas.col(0) = runner.theta();
  for (std::uint64_t t = 1; t <= samples; ++t) {
    runner.consume(objective.sample(rng));
    out.thetas.col(static_cast<Eigen::Index>(t)) = runner.theta();
  }
  out.smoothed_gradient = runner.smoothed_gradient();
  out.grad_calls = runner.grad_calls();
  return out;
}

double relative_diff_power(const Eigen::VectorXd& theta_a, const Eigen::VectorXd& theta_b,
                           const Eigen::VectorXd& theta_star) {
  check_same_length("relative_diff_power", theta_a.size(), theta_b.size());
  check_same_length("relative_diff_power", theta_a.size(), theta_star.size());
  const double denom = (theta_a - theta_star).squaredNorm() + (theta_b - theta_star).squaredNorm();
  if (!(denom > 0.0))
    throw std::domain_error("relative_diff_power: both estimates equal the minimizer");
  return 2.0 * (theta_a - theta_b).squaredNorm() / denom;
}

Eigen::MatrixXd average_trajectory(const StochasticObjective& objective, double mu,
                                   std::uint64_t steps, const Eigen::VectorXd& theta0) {
  if (!objective.mean_grad)
    throw std::invalid_argument("average_trajectory needs an analytic mean gradient");
  check_same_length("initial theta", objective.dim, theta0.size());
  Eigen::MatrixXd out(objective.dim, static_cast<Eigen::Index>(steps) + 1);
  out.col(0) = theta0;
  for (Eigen::Index t = 1; t < out.cols(); ++t)
    out.col(t) = out.col(t - 1) - mu * objective.mean_grad(out.col(t - 1));
  return out;
}

Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& C, const Eigen::MatrixXd& R) {
  const Eigen::Index d = C.rows();
  if (C.cols() != d || R.rows() != d || R.cols() != d)
    throw std::invalid_argument("solve_lyapunov needs square C and R of equal size");
  if (d > 50) throw std::invalid_argument("solve_lyapunov supports dimension <= 50");

  const Eigen::VectorXcd eig = C.eigenvalues();
  for (Eigen::Index i = 0; i < d; ++i)
    if (!(eig(i).real() > 0.0))
      throw std::domain_error("solve_lyapunov: C has an eigenvalue with non-positive real part");

  // vec(C Q + Q C^T) = (I (x) C + C (x) I) vec(Q), column-major vec.
  const Eigen::Index dd = d * d;
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(dd, dd);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) {
      const Eigen::Index row = j * d + i;
      for (Eigen::Index l = 0; l < d; ++l) {
        system(row, j * d + l) += C(i, l);  // (C Q)_{ij} = sum_l C_il Q_lj
        system(row, l * d + i) += C(j, l);  // (Q C^T)_{ij} = sum_l Q_il C_jl
      }
    }
  const Eigen::Map<const Eigen::VectorXd> rhs(R.data(), dd);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  if (!lu.isInvertible()) throw std::domain_error("solve_lyapunov: singular system");
  const Eigen::VectorXd q = lu.solve(rhs);
  const Eigen::Map<const Eigen::MatrixXd> Q(q.data(), d, d);
  return 0.5 * (Q + Q.transpose());
}

double predicted_steady_state(double mu, const Eigen::MatrixXd& Q) { return mu * Q.trace(); }

std::uint64_t steady_state_start(const Eigen::MatrixXd& C, double mu, double threshold) {
  const Eigen::VectorXcd eig = C.eigenvalues();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < eig.size(); ++i)
    worst = std::max(worst, std::abs(1.0 - mu * eig(i)));
  if (!(worst < 1.0)) throw std::domain_error("average trajectory does not contract");
  if (worst == 0.0) return 1;
  return static_cast<std::uint64_t>(std::ceil(std::log(threshold) / std::log(worst)));
}

std::uint64_t transient_end(const StochasticObjective& objective, double mu,
                            const Eigen::VectorXd& theta0, double steady_level, double factor,
                            std::uint64_t max_steps) {
  if (!objective.mean_grad || !objective.minimizer)
    throw std::invalid_argument("transient_end needs a mean gradient and a known minimizer");
  check_same_length("initial theta", objective.dim, theta0.size());
  const double level = factor * steady_level;
  Eigen::VectorXd theta = theta0;
  std::uint64_t t = 0;
  while (t < max_steps && (theta - *objective.minimizer).squaredNorm() > level) {
    theta -= mu * objective.mean_grad(theta);
    ++t;
  }
  return t;
}

ComparisonReport compare_variants(const StochasticObjective& objective,
                                  const std::vector<SAVariant>& variants, std::uint64_t samples,
                                  std::uint64_t seed, const Eigen::VectorXd& theta0) {
  if (variants.empty()) throw std::invalid_argument("compare_variants needs at least one variant");
  if (!objective.minimizer) throw std::invalid_argument("compare_variants needs a known minimizer");
  const Eigen::VectorXd& star = *objective.minimizer;

  std::vector<VariantRunner> runners;
  runners.reserve(variants.size());
  ComparisonReport report;
  report.samples = samples;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    runners.emplace_back(objective, variants[i], theta0);
    VariantSeries s;
    s.variant = variants[i];
    s.err_power.reserve(samples);
    if (i > 0) s.rel_diff_power.reserve(samples);
    report.series.push_back(std::move(s));
  }

  Rng rng(seed);
  for (std::uint64_t t = 0; t < samples; ++t) {
    const Eigen::VectorXd w = objective.sample(rng);
    for (auto& r : runners) r.consume(w);
    const Eigen::VectorXd& ref = runners.front().theta();
    const double ref_err = (ref - star).squaredNorm();
    for (std::size_t i = 0; i < runners.size(); ++i) {
      const Eigen::VectorXd& th = runners[i].theta();
      const double err = (th - star).squaredNorm();
      report.series[i].err_power.push_back(err);
      if (i == 0) continue;
      const double denom = ref_err + err;
      report.series[i].rel_diff_power.push_back(
          denom > 0.0 ? 2.0 * (ref - th).squaredNorm() / denom : 0.0);
    }
  }
  return report;
}

double window_mean(const std::vector<double>& values, std::uint64_t begin, std::uint64_t count) {
  const std::uint64_t end = std::min<std::uint64_t>(values.size(), begin + count);
  if (begin >= end) throw std::invalid_argument("empty averaging window");
  double total = 0.0;
  for (std::uint64_t i = begin; i < end; ++i) total += values[i];
  return total / static_cast<double>(end - begin);
}

}  // namespace mmdgen::sa
