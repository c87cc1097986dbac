#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

namespace sshlab {

enum class Boundary { Open, Periodic };

// Parameters of one SSH chain. Sites are ordered A1,B1,A2,B2,...,AN,BN.
struct HamiltonianSpec {
  int n_cells = 16;
  double v = 0.5;  // intracell hopping
  double w = 1.0;  // intercell hopping
  double disorder_amplitude = 0.0;
  Boundary boundary = Boundary::Open;
  std::optional<std::uint64_t> disorder_seed;

  [[nodiscard]] int dimension() const noexcept { return 2 * n_cells; }
  // Throws InvalidArgument when the invariants do not hold.
  void validate() const;
  [[nodiscard]] HamiltonianSpec with_boundary(Boundary b) const {
    HamiltonianSpec s = *this;
    s.boundary = b;
    return s;
  }
};

// t_n = w + 2 W omega_n, m_n = v + W omega'_n.
// t holds N-1 bonds for open chains and N for periodic ones (the last entry
// is the wrap-around bond BN-A1). omega always carries N draws so the open
// and periodic chains of one seed share their interior bonds.
struct DisorderRealization {
  std::vector<double> t;
  std::vector<double> m;
  std::vector<double> omega;
  std::vector<double> omega_prime;
};

struct Hamiltonian {
  Eigen::MatrixXd matrix;
  DisorderRealization disorder;
};

// Draws the omega streams for a seed. Omega' uses PCG stream 1, omega uses
// stream 2; each stream yields n_cells values in [-0.5, 0.5).
DisorderRealization draw_disorder(const HamiltonianSpec& spec);

Hamiltonian build_hamiltonian(const HamiltonianSpec& spec);

// Eigenpairs sorted by ascending energy; column i of states belongs to
// energies[i]. Each eigenvector has its largest-magnitude entry positive.
struct Spectrum {
  Eigen::VectorXd energies;
  Eigen::MatrixXd states;
};

Spectrum diagonalize(const Eigen::MatrixXd& h);

// Column i = elementwise squared moduli of eigenvector i.
Eigen::MatrixXd squared_moduli(const Spectrum& spectrum);

// Seed of disorder realization r on row i_disorder of a sweep.
std::uint64_t realization_seed(std::uint64_t master_seed, std::uint64_t i_disorder,
                               std::uint64_t realization) noexcept;

}  // namespace sshlab
