#include <gtest/gtest.h>

#include <cmath>

#include "sshlab/errors.hpp"
#include "sshlab/rng.hpp"
#include "sshlab/ssh.hpp"

using namespace sshlab;

namespace {

HamiltonianSpec make(int n, double v, double W = 0.0, Boundary b = Boundary::Open, std::uint64_t seed = 0) {
  HamiltonianSpec s;
  s.n_cells = n;
  s.v = v;
  s.disorder_amplitude = W;
  s.boundary = b;
  if (W > 0) s.disorder_seed = seed;
  return s;
}

}  // namespace

TEST(BuildHamiltonian, PeriodicThreeCells) {
  const double v = 0.7;
  const double w = 1.3;
  HamiltonianSpec s = make(3, v, 0.0, Boundary::Periodic);
  s.w = w;
  const Eigen::MatrixXd H = build_hamiltonian(s).matrix;
  Eigen::MatrixXd expected(6, 6);
  expected << 0, v, 0, 0, 0, w,
              v, 0, w, 0, 0, 0,
              0, w, 0, v, 0, 0,
              0, 0, v, 0, w, 0,
              0, 0, 0, w, 0, v,
              w, 0, 0, 0, v, 0;
  EXPECT_EQ(H, expected);
}

TEST(BuildHamiltonian, FullyDimerizedTwoCells) {
  const Eigen::MatrixXd H = build_hamiltonian(make(2, 0.0)).matrix;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(4, 4);
  expected(1, 2) = expected(2, 1) = 1.0;
  EXPECT_EQ(H, expected);
}

TEST(BuildHamiltonian, SeededDisorderMatchesReferenceStream) {
  const Hamiltonian h = build_hamiltonian(make(4, 0.3, 0.5, Boundary::Open, 7));
  const std::array<double, 4> m{0.30791626540866607, 0.277552060151572, 0.2605533654583012, 0.24734778530005247};
  const std::array<double, 3> t{1.0925134318385927, 1.1014034782022581, 0.9327422756980023};
  for (int c = 0; c < 4; ++c) {
    EXPECT_DOUBLE_EQ(h.matrix(2 * c, 2 * c + 1), m[static_cast<std::size_t>(c)]);
    EXPECT_DOUBLE_EQ(h.matrix(2 * c + 1, 2 * c), m[static_cast<std::size_t>(c)]);
  }
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(h.matrix(2 * c + 1, 2 * c + 2), t[static_cast<std::size_t>(c)]);
  EXPECT_EQ(h.matrix(0, 7), 0.0);
  ASSERT_EQ(h.disorder.t.size(), 3U);
  ASSERT_EQ(h.disorder.m.size(), 4U);

  const Hamiltonian p = build_hamiltonian(make(4, 0.3, 0.5, Boundary::Periodic, 7));
  EXPECT_DOUBLE_EQ(p.matrix(0, 7), 1.36714004789002);
  EXPECT_DOUBLE_EQ(p.matrix(7, 0), 1.36714004789002);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(p.matrix(2 * c + 1, 2 * c + 2), h.matrix(2 * c + 1, 2 * c + 2));
}

TEST(BuildHamiltonian, RejectsInvalidSpecs) {
  EXPECT_THROW(build_hamiltonian(make(1, 0.5)), InvalidArgument);
  HamiltonianSpec s = make(4, 0.5);
  s.disorder_amplitude = 0.3;
  EXPECT_THROW(build_hamiltonian(s), InvalidArgument);
  s.disorder_amplitude = -0.1;
  s.disorder_seed = 1;
  EXPECT_THROW(build_hamiltonian(s), InvalidArgument);
}

TEST(BuildHamiltonian, DisorderRelationsAndBounds) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const double W = 0.1 + 0.005 * static_cast<double>(seed % 200);
    const Hamiltonian h = build_hamiltonian(make(6, 0.8, W, Boundary::Periodic, seed));
    const auto& d = h.disorder;
    for (std::size_t i = 0; i < d.m.size(); ++i) {
      ASSERT_EQ(d.m[i], 0.8 + W * d.omega_prime[i]);
      ASSERT_LE(std::abs(d.m[i] - 0.8), W / 2);
    }
    for (std::size_t i = 0; i < d.t.size(); ++i) {
      ASSERT_EQ(d.t[i], 1.0 + 2.0 * W * d.omega[i]);
      ASSERT_LE(std::abs(d.t[i] - 1.0), W);
    }
  }
}

TEST(BuildHamiltonian, ChiralSymmetryExact) {
  Pcg32 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.bounded(20));
    const auto b = trial % 2 ? Boundary::Periodic : Boundary::Open;
    const Eigen::MatrixXd H = build_hamiltonian(make(n, rng.uniform(0, 2), rng.uniform(0, 5), b, rng())).matrix;
    Eigen::VectorXd gamma(2 * n);
    for (int i = 0; i < 2 * n; ++i) gamma(i) = i % 2 ? -1.0 : 1.0;
    const Eigen::MatrixXd g = gamma.asDiagonal();
    ASSERT_EQ(g * H * g, -H);
  }
}

TEST(BuildHamiltonian, ZeroDisorderWithSeedIsClean) {
  HamiltonianSpec s = make(5, 0.4);
  const Eigen::MatrixXd clean = build_hamiltonian(s).matrix;
  s.disorder_seed = 99;
  EXPECT_EQ(build_hamiltonian(s).matrix, clean);
}

TEST(Diagonalize, ZeroMatrixGivesIdentity) {
  const Spectrum s = diagonalize(Eigen::MatrixXd::Zero(6, 6));
  EXPECT_EQ(s.energies, Eigen::VectorXd::Zero(6));
  EXPECT_EQ(s.states, Eigen::MatrixXd::Identity(6, 6));
}

TEST(Diagonalize, RejectsAsymmetricInput) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(4, 4);
  h(0, 1) = 1.0;
  EXPECT_THROW(diagonalize(h), StructuralError);
}

TEST(Diagonalize, SpectrumInvariants) {
  Pcg32 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.bounded(31));
    const auto b = trial % 3 == 0 ? Boundary::Periodic : Boundary::Open;
    const HamiltonianSpec spec = make(n, rng.uniform(0, 2), rng.uniform(0, 5), b, rng());
    const Eigen::MatrixXd H = build_hamiltonian(spec).matrix;
    const Spectrum s = diagonalize(H);
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < s.energies.size(); ++i) {
      if (i > 0) {
        ASSERT_LE(s.energies(i - 1), s.energies(i));
      }
      const auto col = s.states.col(i);
      ASSERT_LT(std::abs(1.0 - col.norm()), 1e-12);
      ASSERT_LT((H * col - s.energies(i) * col).cwiseAbs().maxCoeff(), 1e-10 * scale);
      Eigen::Index arg = 0;
      col.cwiseAbs().maxCoeff(&arg);
      ASSERT_GT(col(arg), 0.0);
    }
    if (b == Boundary::Open) {
      const auto dim = s.energies.size();
      for (Eigen::Index i = 0; i < dim; ++i) ASSERT_LT(std::abs(s.energies(i) + s.energies(dim - 1 - i)), 1e-10);
    }
  }
}

TEST(Diagonalize, EdgeStatesInTopologicalPhase) {
  const Spectrum s = diagonalize(build_hamiltonian(make(16, 0.2)).matrix);
  for (int i : {15, 16}) {
    EXPECT_LT(std::abs(s.energies(i)), 1e-3);
    const auto col = s.states.col(i);
    const double edge = col.head(2).squaredNorm() + col.tail(2).squaredNorm();
    EXPECT_GE(edge, 0.5);
  }
  EXPECT_GT(std::abs(s.energies(14)), 0.5);
}

TEST(Diagonalize, DeterministicAcrossCalls) {
  const Eigen::MatrixXd H = build_hamiltonian(make(16, 0.6, 1.0, Boundary::Open, 3)).matrix;
  const Spectrum a = diagonalize(H);
  const Spectrum b = diagonalize(H);
  EXPECT_EQ(a.energies, b.energies);
  EXPECT_EQ(a.states, b.states);
}

TEST(SquaredModuli, ColumnsSumToOne) {
  const Eigen::MatrixXd p = squared_moduli(diagonalize(build_hamiltonian(make(8, 0.9, 0.7, Boundary::Open, 4)).matrix));
  for (Eigen::Index c = 0; c < p.cols(); ++c) EXPECT_NEAR(p.col(c).sum(), 1.0, 1e-12);
  EXPECT_GE(p.minCoeff(), 0.0);
}

TEST(RealizationSeed, IndependentOfVIndex) {
  EXPECT_EQ(realization_seed(3, 2, 1), mix_seed(3, 2, 1));
  EXPECT_NE(realization_seed(3, 2, 1), realization_seed(3, 2, 0));
  EXPECT_NE(realization_seed(3, 2, 1), realization_seed(3, 1, 1));
}
