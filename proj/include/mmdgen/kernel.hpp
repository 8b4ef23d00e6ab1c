#pragma once

// Gaussian kernel k(u, v) = exp(-|u - v|^2 / h), its gradient, the
// instantaneous three-point training loss and the two-sample MMD score.

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mmdgen/error.hpp"

namespace mmdgen {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar = double>
class KernelSpec {
 public:
  explicit KernelSpec(Scalar bandwidth) : bandwidth_(bandwidth) {
    if (!(bandwidth > Scalar(0)) || !std::isfinite(static_cast<double>(bandwidth)))
      throw std::invalid_argument("kernel bandwidth must be positive and finite, got " +
                                  std::to_string(static_cast<double>(bandwidth)));
  }

  Scalar bandwidth() const { return bandwidth_; }

 private:
  Scalar bandwidth_;
};

/// Column-major collection of equally sized vectors, one sample per column.
template <typename Scalar = double>
class SampleSet {
 public:
  explicit SampleSet(Matrix<Scalar> columns) : columns_(std::move(columns)) {
    if (columns_.rows() < 1 || columns_.cols() < 1)
      throw std::invalid_argument("sample set needs dim >= 1 and count >= 1, got " +
                                  std::to_string(columns_.rows()) + "x" +
                                  std::to_string(columns_.cols()));
  }

  Eigen::Index dim() const { return columns_.rows(); }
  Eigen::Index count() const { return columns_.cols(); }
  auto col(Eigen::Index i) const { return columns_.col(i); }
  const Matrix<Scalar>& matrix() const { return columns_; }

 private:
  Matrix<Scalar> columns_;
};

/// Sum of squared coordinate differences, accumulated in index order.
template <typename DerivedU, typename DerivedV>
typename DerivedU::Scalar squared_distance(const Eigen::MatrixBase<DerivedU>& u,
                                           const Eigen::MatrixBase<DerivedV>& v) {
  check_same_length("squared_distance", u.size(), v.size());
  using Scalar = typename DerivedU::Scalar;
  Scalar acc(0);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const Scalar d = u(i) - v(i);
    acc += d * d;
  }
  return acc;
}

template <typename DerivedU, typename DerivedV, typename Scalar>
Scalar gaussian_kernel(const Eigen::MatrixBase<DerivedU>& u, const Eigen::MatrixBase<DerivedV>& v,
                       const KernelSpec<Scalar>& spec) {
  check_same_length("gaussian_kernel", u.size(), v.size());
  return std::exp(-squared_distance(u, v) / spec.bandwidth());
}

/// Gradient of k(y, u) with respect to y: -(2/h) k(y, u) (y - u).
template <typename DerivedY, typename DerivedU, typename Scalar>
Vector<Scalar> kernel_grad_first(const Eigen::MatrixBase<DerivedY>& y,
                                 const Eigen::MatrixBase<DerivedU>& u,
                                 const KernelSpec<Scalar>& spec) {
  check_same_length("kernel_grad_first", y.size(), u.size());
  const Scalar h = spec.bandwidth();
  return (-Scalar(2) / h * gaussian_kernel(y, u, spec)) * (y - u);
}

/// k(y1, y2) - k(y1, x) - k(y2, x); one sample of the training objective
/// with the data-only constant dropped. Lies in (-2, 1].
template <typename D1, typename D2, typename DX, typename Scalar>
Scalar triple_loss(const Eigen::MatrixBase<D1>& y1, const Eigen::MatrixBase<D2>& y2,
                   const Eigen::MatrixBase<DX>& x, const KernelSpec<Scalar>& spec) {
  check_same_length("triple_loss", y1.size(), y2.size());
  check_same_length("triple_loss", y1.size(), x.size());
  return gaussian_kernel(y1, y2, spec) - gaussian_kernel(y1, x, spec) -
         gaussian_kernel(y2, x, spec);
}

template <typename Scalar>
Matrix<Scalar> gram_matrix(const SampleSet<Scalar>& s, const KernelSpec<Scalar>& spec) {
  const Eigen::Index n = s.count();
  Matrix<Scalar> gram(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    gram(j, j) = Scalar(1);
    for (Eigen::Index i = j + 1; i < n; ++i) {
      const Scalar value = gaussian_kernel(s.col(i), s.col(j), spec);
      gram(i, j) = value;
      gram(j, i) = value;
    }
  }
  return gram;
}

namespace detail {

template <typename Scalar>
Scalar self_block_mean(const SampleSet<Scalar>& s, const KernelSpec<Scalar>& spec) {
  const Eigen::Index n = s.count();
  Scalar off(0);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j + 1; i < n; ++i) off += gaussian_kernel(s.col(i), s.col(j), spec);
  const Scalar total = Scalar(n) + Scalar(2) * off;
  return total / (Scalar(n) * Scalar(n));
}

template <typename Scalar>
Scalar cross_block_mean(const SampleSet<Scalar>& a, const SampleSet<Scalar>& b,
                        const KernelSpec<Scalar>& spec) {
  Scalar total(0);
  for (Eigen::Index j = 0; j < b.count(); ++j)
    for (Eigen::Index i = 0; i < a.count(); ++i) total += gaussian_kernel(a.col(i), b.col(j), spec);
  return total / (Scalar(a.count()) * Scalar(b.count()));
}

}  // namespace detail

/// Biased (V-statistic) estimate of squared MMD between two sample sets.
/// Diagonal terms are included, so the value is non-negative up to rounding.
template <typename Scalar>
Scalar mmd_score(const SampleSet<Scalar>& a, const SampleSet<Scalar>& b,
                 const KernelSpec<Scalar>& spec) {
  check_same_length("mmd_score", a.dim(), b.dim());
  return detail::self_block_mean(a, spec) + detail::self_block_mean(b, spec) -
         Scalar(2) * detail::cross_block_mean(a, b, spec);
}

}  // namespace mmdgen
