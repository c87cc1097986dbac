#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "sshlab/ssh.hpp"

namespace sshlab {

// Off-diagonal block of a periodic chain rewritten in the eigenbasis of the
// chiral operator Gamma = diag(+1,-1,+1,...). permutation[i] is the 0-based
// site placed at position i: B sites in descending cell order, then A sites
// in descending cell order. h0 is the lower-left block at k = 0; boundary
// flags the entries that pick up e^{ik} when crossing the unit cell.
struct ChiralBlocks {
  std::vector<int> permutation;
  Eigen::MatrixXd h0;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> boundary;
};

using ComplexMatrix = Eigen::MatrixXcd;

// Throws StructuralError when either diagonal block of the permuted
// Hamiltonian has an entry above 1e-12, i.e. chiral symmetry is broken.
ChiralBlocks chiral_transform(const Eigen::MatrixXd& periodic_hamiltonian);

// Returns (h(k), dh/dk).
std::pair<ComplexMatrix, ComplexMatrix> assemble_h_of_k(const ChiralBlocks& blocks, double k);

// Tr(h^{-1}(k) dh/dk(k)) through an LU factorization. Throws GapClosed when
// the reciprocal condition number drops below 1e-12.
std::complex<double> winding_integrand(const ChiralBlocks& blocks, double k);

struct Winding {
  double raw = 0.0;
  int rounded = 0;
  [[nodiscard]] double deviation() const noexcept;
};

inline constexpr int kDefaultSweepKPoints = 256;
inline constexpr int kDefaultTestKPoints = 1024;

// Rectangle rule over k_j = 2 pi j / k_points on the periodic version of
// spec (boundary is forced to Periodic). Requires k_points >= 64.
Winding winding_number(const HamiltonianSpec& spec, int k_points = kDefaultTestKPoints);
Winding winding_number(const ChiralBlocks& blocks, int k_points);

// Number of energies with |E| < threshold.
int count_zero_modes(const Spectrum& spectrum, double threshold);

// Disorder-averaged grid over (v, W). Cell (iW, iv) averages the per
// realization values in samples; cells where h(k) became singular hold NaN.
struct PhaseDiagram {
  std::vector<double> v_grid;
  std::vector<double> W_grid;
  int n_realizations = 1;
  int n_cells = 16;
  double w = 1.0;
  std::uint64_t master_seed = 0;
  // Row-major |W_grid| x |v_grid|.
  std::vector<double> nu_mean;
  // Row-major |W_grid| x |v_grid| x n_realizations values (0/1 or NaN).
  std::vector<double> samples;

  [[nodiscard]] double mean(std::size_t iW, std::size_t iv) const {
    return nu_mean[iW * v_grid.size() + iv];
  }
  [[nodiscard]] double sample(std::size_t iW, std::size_t iv, std::size_t r) const {
    return samples[(iW * v_grid.size() + iv) * static_cast<std::size_t>(n_realizations) + r];
  }
  // Fills nu_mean from samples.
  void reduce();
};

struct SweepGrid {
  std::vector<double> v_grid;
  std::vector<double> W_grid;
  int n_realizations = 1;
  int n_cells = 16;
  double w = 1.0;
  std::uint64_t master_seed = 0;
};

// Spec of realization r in row iW of the sweep: the disorder seed depends on
// (master_seed, iW, r) only, so every v of a row shares one realization.
HamiltonianSpec sweep_spec(const SweepGrid& grid, std::size_t iW, std::size_t iv, std::size_t r,
                           Boundary boundary);

PhaseDiagram label_phase_diagram(const SweepGrid& grid, int k_points = kDefaultSweepKPoints,
                                 unsigned threads = 0);

// Evenly spaced grid of count points on [lo, hi] (endpoints included).
std::vector<double> linspace(double lo, double hi, std::size_t count);

}  // namespace sshlab
