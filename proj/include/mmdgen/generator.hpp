#pragma once

// Two-layer fully connected generator
//
//   W = A Z + a,  S = relu(W),  T = B S + b,  Y = sigmoid(T)
//
// and the rank-one backpropagation of a kernel gradient through it. Every
// routine works on blocks of inputs, one column per sample; a single input
// is the one-column case. Gradients of a block are summed over its columns.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "mmdgen/error.hpp"
#include "mmdgen/kernel.hpp"
#include "mmdgen/rng.hpp"

namespace mmdgen {

/// Layer widths: latent (n) -> hidden (m) -> output (k).
struct NetShape {
  Eigen::Index latent = 0;
  Eigen::Index hidden = 0;
  Eigen::Index output = 0;

  void validate() const {
    if (latent < 1 || hidden < 1 || output < 1)
      throw std::invalid_argument("network dimensions must all be >= 1, got " +
                                  std::to_string(latent) + "x" + std::to_string(hidden) + "x" +
                                  std::to_string(output));
  }

  bool operator==(const NetShape&) const = default;
};

template <typename Scalar = double>
struct GeneratorParams {
  Matrix<Scalar> A;  // hidden x latent
  Vector<Scalar> a;  // hidden
  Matrix<Scalar> B;  // output x hidden
  Vector<Scalar> b;  // output

  NetShape shape() const { return {A.cols(), A.rows(), B.rows()}; }

  /// Throws unless the four arrays agree with each other and are finite.
  void validate() const {
    shape().validate();
    check_same_length("bias a", A.rows(), a.size());
    check_same_length("weights B columns", A.rows(), B.cols());
    check_same_length("bias b", B.rows(), b.size());
    if (!A.allFinite() || !a.allFinite() || !B.allFinite() || !b.allFinite())
      throw std::invalid_argument("generator parameters contain non-finite entries");
  }

  static GeneratorParams zeros(const NetShape& s) {
    s.validate();
    return {Matrix<Scalar>::Zero(s.hidden, s.latent), Vector<Scalar>::Zero(s.hidden),
            Matrix<Scalar>::Zero(s.output, s.hidden), Vector<Scalar>::Zero(s.output)};
  }

  bool operator==(const GeneratorParams& o) const {
    return A == o.A && a == o.a && B == o.B && b == o.b;
  }
};

/// Forward-pass intermediates, one column per input.
template <typename Scalar = double>
struct LayerCache {
  Matrix<Scalar> Z;  // latent x batch
  Matrix<Scalar> W;  // hidden x batch
  Matrix<Scalar> S;  // hidden x batch
  Matrix<Scalar> T;  // output x batch
  Matrix<Scalar> Y;  // output x batch

  Eigen::Index batch() const { return Z.cols(); }

  static LayerCache zeros(const NetShape& s, Eigen::Index batch) {
    return {Matrix<Scalar>::Zero(s.latent, batch), Matrix<Scalar>::Zero(s.hidden, batch),
            Matrix<Scalar>::Zero(s.hidden, batch), Matrix<Scalar>::Zero(s.output, batch),
            Matrix<Scalar>::Zero(s.output, batch)};
  }
};

/// Backpropagated vectors: V at the output pre-activation, U at the hidden one.
template <typename Scalar = double>
struct BackpropPair {
  Matrix<Scalar> V;  // output x batch
  Matrix<Scalar> U;  // hidden x batch

  static BackpropPair zeros(const NetShape& s, Eigen::Index batch) {
    return {Matrix<Scalar>::Zero(s.output, batch), Matrix<Scalar>::Zero(s.hidden, batch)};
  }
};

/// Gradients with respect to the augmented matrices [B b] (G) and [A a] (D).
template <typename Scalar = double>
struct LayerGradients {
  Matrix<Scalar> G;  // output x (hidden + 1)
  Matrix<Scalar> D;  // hidden x (latent + 1)

  static LayerGradients zeros(const NetShape& s) {
    return {Matrix<Scalar>::Zero(s.output, s.hidden + 1),
            Matrix<Scalar>::Zero(s.hidden, s.latent + 1)};
  }

  LayerGradients& operator+=(const LayerGradients& o) {
    G += o.G;
    D += o.D;
    return *this;
  }
};

/// Glorot-style initialisation: A ~ N(0, 2/m), B ~ N(0, 4/(k+m)), zero biases.
/// A is drawn first, then B, both column by column.
template <typename Scalar = double>
GeneratorParams<Scalar> init_params(const NetShape& shape, Rng& rng) {
  auto params = GeneratorParams<Scalar>::zeros(shape);
  const double a_scale = std::sqrt(static_cast<double>(shape.hidden) / 2.0);
  const double b_scale = std::sqrt(static_cast<double>(shape.output + shape.hidden) / 4.0);
  params.A = (latent_batch(rng, shape.hidden, shape.latent) / a_scale).template cast<Scalar>();
  params.B = (latent_batch(rng, shape.output, shape.hidden) / b_scale).template cast<Scalar>();
  return params;
}

template <typename Scalar = double>
GeneratorParams<Scalar> init_params(const NetShape& shape, std::uint64_t seed) {
  Rng rng(seed);
  return init_params<Scalar>(shape, rng);
}

template <typename Scalar, typename Derived>
LayerCache<Scalar> forward(const GeneratorParams<Scalar>& params,
                           const Eigen::MatrixBase<Derived>& z) {
  check_same_length("forward input", params.A.cols(), z.rows());
  LayerCache<Scalar> cache;
  cache.Z = z;
  cache.W = (params.A * cache.Z).colwise() + params.a;
  cache.S = cache.W.cwiseMax(Scalar(0));
  cache.T = (params.B * cache.S).colwise() + params.b;
  cache.Y = ((-cache.T.array()).exp() + Scalar(1)).inverse().matrix();
  return cache;
}

/// V = g'(T) . r with g' taken from the cached output as Y - Y^2;
/// U = relu'(W) . (B^T V), with relu'(0) = 0.
template <typename Scalar, typename Derived>
BackpropPair<Scalar> backprop_pair(const GeneratorParams<Scalar>& params,
                                   const LayerCache<Scalar>& cache,
                                   const Eigen::MatrixBase<Derived>& r) {
  check_same_length("backprop residual rows", cache.Y.rows(), r.rows());
  check_same_length("backprop residual columns", cache.Y.cols(), r.cols());
  check_same_length("backprop hidden", params.B.cols(), cache.W.rows());
  BackpropPair<Scalar> pair;
  pair.V = ((cache.Y.array() - cache.Y.array().square()) * r.array()).matrix();
  const auto active = (cache.W.array() > Scalar(0)).template cast<Scalar>();
  pair.U = (active * (params.B.transpose() * pair.V).array()).matrix();
  return pair;
}

/// G = V [S^T 1], D = U [Z^T 1], summed over the columns of the block.
template <typename Scalar>
LayerGradients<Scalar> layer_gradients(const BackpropPair<Scalar>& pair,
                                       const LayerCache<Scalar>& cache) {
  check_same_length("layer_gradients V", cache.Y.rows(), pair.V.rows());
  check_same_length("layer_gradients U", cache.S.rows(), pair.U.rows());
  check_same_length("layer_gradients batch", cache.batch(), pair.V.cols());
  check_same_length("layer_gradients batch", cache.batch(), pair.U.cols());
  const Eigen::Index m = cache.S.rows();
  const Eigen::Index n = cache.Z.rows();
  LayerGradients<Scalar> grads;
  grads.G.resize(pair.V.rows(), m + 1);
  grads.G.leftCols(m).noalias() = pair.V * cache.S.transpose();
  grads.G.col(m) = pair.V.rowwise().sum();
  grads.D.resize(pair.U.rows(), n + 1);
  grads.D.leftCols(n).noalias() = pair.U * cache.Z.transpose();
  grads.D.col(n) = pair.U.rowwise().sum();
  return grads;
}

/// Draws `count` standard normal latents and maps them through the network.
template <typename Scalar>
SampleSet<Scalar> generate(const GeneratorParams<Scalar>& params, Eigen::Index count, Rng& rng) {
  if (count < 1) throw std::invalid_argument("generate needs count >= 1");
  const Matrix<Scalar> z = latent_batch(rng, params.A.cols(), count).template cast<Scalar>();
  return SampleSet<Scalar>(forward(params, z).Y);
}

template <typename Scalar>
SampleSet<Scalar> generate(const GeneratorParams<Scalar>& params, Eigen::Index count,
                           std::uint64_t seed) {
  Rng rng(seed);
  return generate(params, count, rng);
}

}  // namespace mmdgen
