#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "mmdgen/kernel.hpp"
#include "oracles.hpp"

using namespace mmdgen;

namespace {

const double kInvE = std::exp(-1.0);

Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Central difference of the plain-loop kernel along each coordinate of y.
Eigen::VectorXd fd_kernel_grad(const Eigen::VectorXd& y, const Eigen::VectorXd& u, double h) {
  const double step = 1e-6;
  oracle::Vec yv(y.data(), y.data() + y.size()), uv(u.data(), u.data() + u.size());
  Eigen::VectorXd g(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    oracle::Vec up = yv, down = yv;
    up[i] += step;
    down[i] -= step;
    g(i) = (oracle::kernel(up, uv, h) - oracle::kernel(down, uv, h)) / (2 * step);
  }
  return g;
}

}  // namespace

TEST_SUITE("kernel") {
  TEST_CASE("kernel spec rejects non-positive bandwidth") {
    CHECK_THROWS_AS(KernelSpec<double>(0.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec<double>(-1.0), std::invalid_argument);
    CHECK_THROWS_AS(KernelSpec<double>(std::nan("")), std::invalid_argument);
  }

  TEST_CASE("gaussian kernel values") {
    CHECK(gaussian_kernel(vec({0, 0}), vec({0, 0}), KernelSpec<double>(3.0)) == 1.0);
    CHECK(gaussian_kernel(vec({3, 4}), vec({0, 0}), KernelSpec<double>(25.0)) ==
          doctest::Approx(kInvE).epsilon(1e-15));
    // |u - v|^2 == h
    CHECK(gaussian_kernel(vec({1, 1}), vec({0, 0}), KernelSpec<double>(2.0)) ==
          doctest::Approx(kInvE).epsilon(1e-15));
  }

  TEST_CASE("dimension mismatch names both lengths") {
    try {
      gaussian_kernel(vec({1, 2, 3}), vec({1, 2}), KernelSpec<double>(1.0));
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      CHECK(e.expected() == 3);
      CHECK(e.actual() == 2);
      CHECK(std::string(e.what()).find("3") != std::string::npos);
      CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
    CHECK_THROWS_AS(kernel_grad_first(vec({1}), vec({1, 2}), KernelSpec<double>(1.0)), DimensionError);
    CHECK_THROWS_AS(triple_loss(vec({1}), vec({1}), vec({1, 2}), KernelSpec<double>(1.0)),
                    DimensionError);
  }

  TEST_CASE("kernel gradient examples") {
    CHECK(kernel_grad_first(vec({0.3, -1}), vec({0.3, -1}), KernelSpec<double>(2.0)).norm() == 0.0);

    // Frozen from the central-difference oracle (step 1e-6).
    const Eigen::VectorXd g1 = kernel_grad_first(vec({1, 0}), vec({0, 0}), KernelSpec<double>(1.0));
    const Eigen::VectorXd fd1 = fd_kernel_grad(vec({1, 0}), vec({0, 0}), 1.0);
    CHECK(fd1(0) == doctest::Approx(-0.7357588823428847).epsilon(1e-8));
    CHECK(g1(0) == doctest::Approx(-0.7357588823428847).epsilon(1e-14));
    CHECK(g1(1) == 0.0);

    const Eigen::VectorXd g2 = kernel_grad_first(vec({0, 2}), vec({0, 0}), KernelSpec<double>(4.0));
    const Eigen::VectorXd fd2 = fd_kernel_grad(vec({0, 2}), vec({0, 0}), 4.0);
    CHECK(fd2(1) == doctest::Approx(-0.36787944117144233).epsilon(1e-8));
    CHECK(g2(0) == 0.0);
    CHECK(g2(1) == doctest::Approx(-0.36787944117144233).epsilon(1e-14));
  }

  TEST_CASE("kernel gradient matches finite differences on random inputs") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> coord(-1.5, 1.5), band(0.2, 5.0);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int trial = 0; trial < 100; ++trial) {
      const int d = dim(gen);
      Eigen::VectorXd y(d), u(d);
      for (int i = 0; i < d; ++i) {
        y(i) = coord(gen);
        u(i) = coord(gen);
      }
      const double h = band(gen);
      const Eigen::VectorXd g = kernel_grad_first(y, u, KernelSpec<double>(h));
      const Eigen::VectorXd fd = fd_kernel_grad(y, u, h);
      for (int i = 0; i < d; ++i) CHECK(oracle::rel_error(g(i), fd(i)) < 1e-6);
    }
  }

  TEST_CASE("triple loss examples") {
    const KernelSpec<double> unit(1.0);
    CHECK(triple_loss(vec({0.2}), vec({0.2}), vec({0.2}), unit) == -1.0);
    CHECK(triple_loss(vec({0}), vec({0}), vec({100}), unit) == doctest::Approx(1.0).epsilon(1e-15));
    const double direct = triple_loss(vec({0}), vec({1}), vec({0}), unit);
    const double summed = oracle::kernel({0}, {1}, 1) - oracle::kernel({0}, {0}, 1) -
                          oracle::kernel({1}, {0}, 1);
    CHECK(direct == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(direct == doctest::Approx(summed).epsilon(1e-15));
  }

  TEST_CASE("symmetry and range on random inputs") {
    std::mt19937_64 gen(11);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> band(0.01, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
      Eigen::VectorXd u(4), v(4);
      for (int i = 0; i < 4; ++i) {
        u(i) = nd(gen);
        v(i) = nd(gen);
      }
      const KernelSpec<double> spec(band(gen));
      const double kuv = gaussian_kernel(u, v, spec);
      CHECK(kuv == gaussian_kernel(v, u, spec));
      CHECK(kuv > 0.0);
      CHECK(kuv < 1.0);
      CHECK(gaussian_kernel(u, u, spec) == 1.0);
      const double loss = triple_loss(u, v, u + v, spec);
      CHECK(loss > -2.0);
      CHECK(loss <= 1.0);
    }
  }

  TEST_CASE("gram matrix") {
    const KernelSpec<double> unit(1.0);
    CHECK(gram_matrix(SampleSet<double>(Eigen::MatrixXd::Constant(3, 1, 0.4)), unit) ==
          Eigen::MatrixXd::Ones(1, 1));
    CHECK(gram_matrix(SampleSet<double>(Eigen::MatrixXd::Constant(2, 2, 0.4)), unit) ==
          Eigen::MatrixXd::Ones(2, 2));
    Eigen::MatrixXd pts(1, 2);
    pts << 0, 1;
    const Eigen::MatrixXd g = gram_matrix(SampleSet<double>(pts), unit);
    CHECK(g(0, 0) == 1.0);
    CHECK(g(1, 1) == 1.0);
    CHECK(g(0, 1) == doctest::Approx(kInvE).epsilon(1e-15));
    CHECK(g(1, 0) == g(0, 1));
  }

  TEST_CASE("gram matrix is positive semidefinite on random point sets") {
    std::mt19937_64 gen(3);
    std::normal_distribution<double> nd;
    std::uniform_int_distribution<int> count(1, 10), dim(1, 5);
    std::uniform_real_distribution<double> band(0.05, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::MatrixXd pts(dim(gen), count(gen));
      for (Eigen::Index j = 0; j < pts.cols(); ++j)
        for (Eigen::Index i = 0; i < pts.rows(); ++i) pts(i, j) = nd(gen);
      const Eigen::MatrixXd g = gram_matrix(SampleSet<double>(pts), KernelSpec<double>(band(gen)));
      CHECK((g - g.transpose()).norm() == 0.0);
      CHECK(g.diagonal().isOnes());
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff() >= -1e-10);
    }
  }

  TEST_CASE("mmd score") {
    const KernelSpec<double> unit(1.0);
    Eigen::MatrixXd zero(1, 1), one(1, 1);
    zero << 0;
    one << 1;
    CHECK(mmd_score(SampleSet<double>(zero), SampleSet<double>(zero), unit) == 0.0);
    CHECK(mmd_score(SampleSet<double>(zero), SampleSet<double>(one), unit) ==
          doctest::Approx(1.2642411176571153).epsilon(1e-15));

    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::MatrixXd a(3, 1 + trial), b(3, 2 + 2 * trial);
      for (auto* m : {&a, &b})
        for (Eigen::Index j = 0; j < m->cols(); ++j)
          for (Eigen::Index i = 0; i < 3; ++i) (*m)(i, j) = nd(gen);
      const SampleSet<double> sa(a), sb(b);
      const KernelSpec<double> spec(2.0);
      CHECK(std::abs(mmd_score(sa, sa, spec)) <= 1e-12);
      const double ab = mmd_score(sa, sb, spec);
      CHECK(ab >= -1e-12);
      CHECK(ab == doctest::Approx(mmd_score(sb, sa, spec)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(mmd_score(SampleSet<double>(Eigen::MatrixXd::Zero(2, 2)),
                              SampleSet<double>(Eigen::MatrixXd::Zero(3, 2)), unit),
                    DimensionError);
  }

  TEST_CASE("sample set validation") {
    CHECK_THROWS_AS(SampleSet<double>(Eigen::MatrixXd(0, 3)), std::invalid_argument);
    CHECK_THROWS_AS(SampleSet<double>(Eigen::MatrixXd(2, 0)), std::invalid_argument);
  }

  TEST_CASE("single precision instantiation") {
    const Eigen::VectorXf u = Eigen::VectorXf::Constant(2, 0.5f);
    const Eigen::VectorXf v = Eigen::VectorXf::Zero(2);
    const float k = gaussian_kernel(u, v, KernelSpec<float>(0.5f));
    CHECK(k == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
  }
}
