#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/SVD>

#include "mmdgen/generator.hpp"
#include "net_convert.hpp"
#include "oracles.hpp"

using namespace mmdgen;

namespace {

Eigen::MatrixXd col(std::initializer_list<double> values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double x : values) m(i++, 0) = x;
  return m;
}

double sample_variance(const Eigen::MatrixXd& m) {
  const double mean = m.mean();
  return (m.array() - mean).square().sum() / static_cast<double>(m.size() - 1);
}

}  // namespace

TEST_SUITE("generator") {
  TEST_CASE("shape validation") {
    CHECK_THROWS_AS((NetShape{0, 2, 2}.validate()), std::invalid_argument);
    CHECK_NOTHROW((NetShape{1, 1, 1}.validate()));
    auto p = GeneratorParams<double>::zeros({2, 3, 4});
    CHECK_NOTHROW(p.validate());
    p.b.resize(3);
    CHECK_THROWS_AS(p.validate(), DimensionError);
    p.b.setZero(4);
    p.A(0, 0) = std::nan("");
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }

  TEST_CASE("initialisation is deterministic with zero biases") {
    const NetShape shape{10, 128, 784};
    const auto p1 = init_params(shape, 42);
    const auto p2 = init_params(shape, 42);
    CHECK(p1 == p2);
    CHECK_FALSE(p1 == init_params(shape, 43));
    for (std::uint64_t seed : {0u, 1u, 99u}) {
      const auto p = init_params({3, 5, 2}, seed);
      CHECK(p.a.isZero(0.0));
      CHECK(p.b.isZero(0.0));
    }
  }

  TEST_CASE("initialisation variances") {
    const auto p = init_params({10, 128, 784}, 2024);
    // A has 1280 entries with variance 2/m.
    CHECK(std::abs(sample_variance(p.A) / (2.0 / 128.0) - 1.0) < 0.10);
    CHECK(std::abs(sample_variance(p.B) / (4.0 / (784.0 + 128.0)) - 1.0) < 0.02);
  }

  TEST_CASE("forward examples") {
    SUBCASE("zero parameters") {
      const auto p = GeneratorParams<double>::zeros({3, 4, 5});
      const auto c = forward(p, col({0.3, -2, 7}));
      CHECK(c.W.isZero(0.0));
      CHECK(c.S.isZero(0.0));
      CHECK(c.T.isZero(0.0));
      CHECK((c.Y.array() == 0.5).all());
    }
    SUBCASE("relu blocks negative input") {
      auto p = GeneratorParams<double>::zeros({1, 1, 1});
      p.A(0, 0) = 1;
      p.B(0, 0) = 1;
      const auto c = forward(p, col({-3}));
      CHECK(c.W(0, 0) == -3);
      CHECK(c.S(0, 0) == 0);
      CHECK(c.T(0, 0) == 0);
      CHECK(c.Y(0, 0) == 0.5);
    }
    SUBCASE("hand evaluation") {
      auto p = GeneratorParams<double>::zeros({1, 1, 1});
      p.A(0, 0) = 2;
      p.a(0) = 1;
      p.B(0, 0) = 1;
      const auto c = forward(p, col({1}));
      CHECK(c.W(0, 0) == 3);
      CHECK(c.S(0, 0) == 3);
      CHECK(c.T(0, 0) == 3);
      CHECK(c.Y(0, 0) == doctest::Approx(0.9525741268224334).epsilon(1e-15));
    }
    CHECK_THROWS_AS(forward(GeneratorParams<double>::zeros({2, 2, 2}), col({1, 2, 3})),
                    DimensionError);
  }

  TEST_CASE("forward cache invariants, range and determinism") {
    std::mt19937_64 gen(17);
    for (int trial = 0; trial < 30; ++trial) {
      const auto p = to_params(oracle::random_net(4, 6, 3, gen));
      Rng rng(static_cast<std::uint64_t>(trial));
      const Eigen::MatrixXd z = latent_batch(rng, 4, 5);
      const auto c = forward(p, z);
      const auto again = forward(p, z);
      CHECK(c.Y == again.Y);
      CHECK(c.S == c.W.cwiseMax(0.0));
      CHECK(c.Y.isApprox(((-c.T.array()).exp() + 1.0).inverse().matrix()));
      CHECK((c.Y.array() > 0.0).all());
      CHECK((c.Y.array() < 1.0).all());
      // Block forward equals per-column forward against the plain oracle.
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const auto y = oracle::forward(to_net(p), to_vec(z.col(j)));
        for (std::size_t i = 0; i < y.size(); ++i)
          CHECK(c.Y(static_cast<Eigen::Index>(i), j) == doctest::Approx(y[i]).epsilon(1e-13));
      }
    }
  }

  TEST_CASE("backprop pair examples") {
    std::mt19937_64 gen(23);
    const auto p = to_params(oracle::random_net(3, 4, 2, gen));
    const auto c = forward(p, col({0.1, 0.2, -0.4}));

    const auto zero = backprop_pair(p, c, Eigen::MatrixXd::Zero(2, 1));
    CHECK(zero.V.isZero(0.0));
    CHECK(zero.U.isZero(0.0));

    auto flat = GeneratorParams<double>::zeros({3, 4, 2});
    flat.B = p.B;
    const auto cf = forward(flat, col({1, 1, 1}));
    const Eigen::MatrixXd r = col({0.7, -1.3});
    CHECK(backprop_pair(flat, cf, r).V.isApprox(0.25 * r));

    auto negative = GeneratorParams<double>::zeros({3, 4, 2});
    negative.a.setConstant(-1.0);
    negative.B = p.B;
    const auto cn = forward(negative, col({0.0, 0.0, 0.0}));
    CHECK(backprop_pair(negative, cn, r).U.isZero(0.0));

    CHECK_THROWS_AS(backprop_pair(p, c, Eigen::MatrixXd::Zero(3, 1)), DimensionError);
  }

  TEST_CASE("layer gradient examples") {
    BackpropPair<double> pair{Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(3, 1)};
    auto cache = LayerCache<double>::zeros({2, 3, 2}, 1);
    cache.S.setConstant(1.5);
    const auto g0 = layer_gradients(pair, cache);
    CHECK(g0.G.isZero(0.0));
    CHECK(g0.G.rows() == 2);
    CHECK(g0.G.cols() == 4);
    CHECK(g0.D.rows() == 3);
    CHECK(g0.D.cols() == 3);

    BackpropPair<double> unit{col({1}), col({0})};
    auto small = LayerCache<double>::zeros({1, 1, 1}, 1);
    small.S(0, 0) = 2;
    const auto g = layer_gradients(unit, small);
    CHECK(g.G(0, 0) == 2);
    CHECK(g.G(0, 1) == 1);
  }

  TEST_CASE("gradients match finite differences of the kernel through the network") {
    std::mt19937_64 gen(101);
    std::uniform_int_distribution<std::size_t> width(1, 6);
    std::uniform_real_distribution<double> band(0.3, 4.0), unit(0.0, 1.0);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = width(gen), m = width(gen), k = width(gen);
      const oracle::Net net = oracle::random_net(n, m, k, gen);
      oracle::Vec z(n), u(k);
      for (auto& v : z) v = nd(gen);
      for (auto& v : u) v = unit(gen);
      const double h = band(gen);

      const auto params = to_params(net);
      Eigen::VectorXd ze = Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(n));
      Eigen::VectorXd ue = Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(k));
      const auto cache = forward(params, ze);
      const Eigen::VectorXd r = kernel_grad_first(cache.Y.col(0), ue, KernelSpec<double>(h));
      const auto grads = layer_gradients(backprop_pair(params, cache, r), cache);

      const auto fd = oracle::finite_difference(
          net, [&](const oracle::Net& q) { return oracle::kernel(oracle::forward(q, z), u, h); });
      const auto d_flat = flatten_rows(grads.D);
      const auto g_flat = flatten_rows(grads.G);
      for (std::size_t i = 0; i < d_flat.size(); ++i)
        CHECK(oracle::rel_error(d_flat[i], fd.d_ab[i]) < 1e-5);
      for (std::size_t i = 0; i < g_flat.size(); ++i)
        CHECK(oracle::rel_error(g_flat[i], fd.d_bb[i]) < 1e-5);
    }
  }

  TEST_CASE("per-sample gradients are rank one") {
    std::mt19937_64 gen(55);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 100; ++trial) {
      const auto p = to_params(oracle::random_net(5, 7, 4, gen));
      Eigen::MatrixXd z(5, 1), r(4, 1);
      for (int i = 0; i < 5; ++i) z(i, 0) = nd(gen);
      for (int i = 0; i < 4; ++i) r(i, 0) = nd(gen);
      const auto c = forward(p, z);
      const auto g = layer_gradients(backprop_pair(p, c, r), c);
      for (const Eigen::MatrixXd* m : {&g.G, &g.D}) {
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(*m).singularValues();
        CHECK(sv(1) <= 1e-10 * sv(0));
      }
    }
  }

  TEST_CASE("block gradients sum the per-column gradients") {
    std::mt19937_64 gen(8);
    const auto p = to_params(oracle::random_net(3, 5, 4, gen));
    Rng rng(8);
    const Eigen::MatrixXd z = latent_batch(rng, 3, 6);
    const Eigen::MatrixXd r = latent_batch(rng, 4, 6);
    const auto c = forward(p, z);
    const auto block = layer_gradients(backprop_pair(p, c, r), c);
    auto summed = LayerGradients<double>::zeros(p.shape());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const auto cj = forward(p, z.col(j));
      summed += layer_gradients(backprop_pair(p, cj, r.col(j)), cj);
    }
    CHECK(block.G.isApprox(summed.G, 1e-12));
    CHECK(block.D.isApprox(summed.D, 1e-12));
  }

  TEST_CASE("generate") {
    const auto zero = GeneratorParams<double>::zeros({3, 4, 5});
    const auto s = generate(zero, 7, std::uint64_t{1});
    CHECK(s.count() == 7);
    CHECK((s.matrix().array() == 0.5).all());

    const auto p = init_params({3, 8, 5}, 4);
    CHECK(generate(p, 50, std::uint64_t{9}).matrix() == generate(p, 50, std::uint64_t{9}).matrix());
    const auto out = generate(p, 200, std::uint64_t{10}).matrix();
    CHECK((out.array() > 0.0).all());
    CHECK((out.array() < 1.0).all());
    CHECK(generate(p, 1, std::uint64_t{3}).count() == 1);
    CHECK_THROWS_AS(generate(p, 0, std::uint64_t{3}), std::invalid_argument);
  }
}
