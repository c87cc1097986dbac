#include "sshlab/ssh.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sshlab/errors.hpp"
#include "sshlab/rng.hpp"

namespace sshlab {

namespace {

constexpr std::uint64_t kOmegaPrimeStream = 1;
constexpr std::uint64_t kOmegaStream = 2;

// Relative tolerance under which two |entries| or two energies count as tied.
constexpr double kTieTolerance = 1e-12;

void fix_sign(Eigen::Ref<Eigen::VectorXd> vec) {
  const double peak = vec.cwiseAbs().maxCoeff();
  if (peak == 0.0) return;
  for (Eigen::Index i = 0; i < vec.size(); ++i) {
    if (std::abs(vec[i]) >= peak * (1.0 - 1e-10)) {
      if (vec[i] < 0.0) vec = -vec;
      return;
    }
  }
}

// Lexicographically larger vectors come first inside a degenerate cluster, so
// the identity basis keeps its natural order.
bool lex_greater(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return a[i] > b[i];
  }
  return false;
}

}  // namespace

void HamiltonianSpec::validate() const {
  if (n_cells < 2) {
    throw InvalidArgument("n_cells must be >= 2, got " + std::to_string(n_cells));
  }
  if (!std::isfinite(v) || !std::isfinite(w)) throw InvalidArgument("hoppings must be finite");
  if (!(disorder_amplitude >= 0.0) || !std::isfinite(disorder_amplitude)) {
    throw InvalidArgument("disorder amplitude must be finite and non-negative");
  }
  if (disorder_amplitude > 0.0 && !disorder_seed) {
    throw InvalidArgument("disorder amplitude > 0 requires a disorder seed");
  }
}

DisorderRealization draw_disorder(const HamiltonianSpec& spec) {
  spec.validate();
  const auto n = static_cast<std::size_t>(spec.n_cells);
  DisorderRealization d;
  d.omega.assign(n, 0.0);
  d.omega_prime.assign(n, 0.0);
  if (spec.disorder_seed) {
    Pcg32 prime_rng(*spec.disorder_seed, kOmegaPrimeStream);
    for (auto& x : d.omega_prime) x = prime_rng.centered();
    Pcg32 bond_rng(*spec.disorder_seed, kOmegaStream);
    for (auto& x : d.omega) x = bond_rng.centered();
  }
  const double amp = spec.disorder_amplitude;
  d.m.resize(n);
  for (std::size_t i = 0; i < n; ++i) d.m[i] = spec.v + amp * d.omega_prime[i];
  const std::size_t bonds = spec.boundary == Boundary::Periodic ? n : n - 1;
  d.t.resize(bonds);
  for (std::size_t i = 0; i < bonds; ++i) d.t[i] = spec.w + 2.0 * amp * d.omega[i];
  return d;
}

Hamiltonian build_hamiltonian(const HamiltonianSpec& spec) {
  Hamiltonian out;
  out.disorder = draw_disorder(spec);
  const int n = spec.n_cells;
  const int dim = spec.dimension();
  out.matrix = Eigen::MatrixXd::Zero(dim, dim);
  auto& h = out.matrix;
  for (int c = 0; c < n; ++c) {
    const double m = out.disorder.m[static_cast<std::size_t>(c)];
    h(2 * c, 2 * c + 1) = m;
    h(2 * c + 1, 2 * c) = m;
  }
  for (int c = 0; c + 1 < n; ++c) {
    const double t = out.disorder.t[static_cast<std::size_t>(c)];
    h(2 * c + 1, 2 * c + 2) = t;
    h(2 * c + 2, 2 * c + 1) = t;
  }
  if (spec.boundary == Boundary::Periodic) {
    const double t = out.disorder.t.back();
    h(0, dim - 1) = t;
    h(dim - 1, 0) = t;
  }
  return out;
}

Spectrum diagonalize(const Eigen::MatrixXd& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw ShapeError("diagonalize expects a square matrix");
  const double scale = std::max(1.0, h.cwiseAbs().maxCoeff());
  if ((h - h.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw StructuralError("diagonalize expects a symmetric matrix");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("eigensolver failed to converge");

  const Eigen::Index dim = h.rows();
  Eigen::MatrixXd vecs = solver.eigenvectors();
  const Eigen::VectorXd& vals = solver.eigenvalues();
  for (Eigen::Index i = 0; i < dim; ++i) fix_sign(vecs.col(i));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(dim));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return vals[a] < vals[b]; });

  const std::vector<Eigen::Index> by_energy = order;

  // Reorder clusters of tied energies by the sign-fixed eigenvectors. The
  // energies keep their ascending order; within a cluster they differ by at
  // most the tie tolerance.
  const double tie = kTieTolerance * scale;
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    while (end < order.size() && vals[order[end]] - vals[order[end - 1]] <= tie) ++end;
    if (end - begin > 1) {
      std::stable_sort(order.begin() + static_cast<std::ptrdiff_t>(begin),
                       order.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](Eigen::Index a, Eigen::Index b) {
                         return lex_greater(vecs.col(a), vecs.col(b));
                       });
    }
    begin = end;
  }

  Spectrum s;
  s.energies.resize(dim);
  s.states.resize(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    s.energies[i] = vals[by_energy[static_cast<std::size_t>(i)]];
    s.states.col(i) = vecs.col(order[static_cast<std::size_t>(i)]);
  }
  return s;
}

Eigen::MatrixXd squared_moduli(const Spectrum& spectrum) {
  return spectrum.states.array().square().matrix();
}

std::uint64_t realization_seed(std::uint64_t master_seed, std::uint64_t i_disorder,
                               std::uint64_t realization) noexcept {
  return mix_seed(master_seed, i_disorder, realization);
}

}  // namespace sshlab
