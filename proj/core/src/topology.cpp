#include "sshlab/topology.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sshlab/errors.hpp"
#include "sshlab/parallel.hpp"

namespace sshlab {

namespace {

constexpr double kStructureTolerance = 1e-12;
constexpr double kMinReciprocalCondition = 1e-12;
constexpr double kLowConfidence = 0.1;

}  // namespace

ChiralBlocks chiral_transform(const Eigen::MatrixXd& hamiltonian) {
  const Eigen::Index dim = hamiltonian.rows();
  if (dim != hamiltonian.cols() || dim < 4 || dim % 2 != 0) {
    throw ShapeError("chiral_transform expects a square matrix of even dimension >= 4");
  }
  const int n = static_cast<int>(dim / 2);

  ChiralBlocks blocks;
  blocks.permutation.resize(static_cast<std::size_t>(dim));
  // B sites (Gamma = -1) of cells N..1, then A sites (Gamma = +1) of cells N..1.
  for (int i = 0; i < n; ++i) {
    blocks.permutation[static_cast<std::size_t>(i)] = 2 * (n - 1 - i) + 1;
    blocks.permutation[static_cast<std::size_t>(n + i)] = 2 * (n - 1 - i);
  }

  auto site_b = [&](int i) { return blocks.permutation[static_cast<std::size_t>(i)]; };
  auto site_a = [&](int i) { return blocks.permutation[static_cast<std::size_t>(n + i)]; };

  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      worst = std::max(worst, std::abs(hamiltonian(site_a(i), site_a(j))));
      worst = std::max(worst, std::abs(hamiltonian(site_b(i), site_b(j))));
    }
  }
  if (worst > kStructureTolerance) {
    throw StructuralError("Hamiltonian lacks chiral symmetry: diagonal block entry " +
                          std::to_string(worst));
  }

  blocks.h0.resize(n, n);
  blocks.boundary.setConstant(n, n, false);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) blocks.h0(i, j) = hamiltonian(site_a(i), site_b(j));
  }
  // The bond A1-BN is the only one that leaves the unit cell.
  blocks.boundary(n - 1, 0) = true;
  return blocks;
}

std::pair<ComplexMatrix, ComplexMatrix> assemble_h_of_k(const ChiralBlocks& blocks, double k) {
  const Eigen::Index n = blocks.h0.rows();
  ComplexMatrix h = blocks.h0.cast<std::complex<double>>();
  ComplexMatrix dh = ComplexMatrix::Zero(n, n);
  const std::complex<double> phase = std::polar(1.0, k);
  const std::complex<double> i_unit(0.0, 1.0);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (!blocks.boundary(r, c)) continue;
      h(r, c) = blocks.h0(r, c) * phase;
      dh(r, c) = i_unit * phase * blocks.h0(r, c);
    }
  }
  return {std::move(h), std::move(dh)};
}

std::complex<double> winding_integrand(const ChiralBlocks& blocks, double k) {
  const auto [h, dh] = assemble_h_of_k(blocks, k);
  const Eigen::PartialPivLU<ComplexMatrix> lu(h);
  const double rcond = lu.rcond();
  // An exactly singular factor yields NaN; report it as zero.
  if (!(rcond >= kMinReciprocalCondition)) throw GapClosed(k, std::isnan(rcond) ? 0.0 : rcond);
  // Tr(h^{-1} dh) = sum over nonzero dh(r, c) of (h^{-1})(c, r) dh(r, c).
  std::complex<double> trace{0.0, 0.0};
  const Eigen::Index n = h.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    if (dh.col(c).isZero(0.0)) continue;
    // Row c of h^{-1} is needed; solve h^T x = e_c.
    Eigen::VectorXcd unit = Eigen::VectorXcd::Zero(n);
    unit[c] = 1.0;
    const Eigen::VectorXcd inv_row = lu.transpose().solve(unit);
    for (Eigen::Index r = 0; r < n; ++r) trace += inv_row[r] * dh(r, c);
  }
  return trace;
}

double Winding::deviation() const noexcept { return std::abs(raw - static_cast<double>(rounded)); }

Winding winding_number(const ChiralBlocks& blocks, int k_points) {
  if (k_points < 64) throw InvalidArgument("winding_number requires k_points >= 64");
  const double dk = 2.0 * std::numbers::pi / static_cast<double>(k_points);
  std::complex<double> sum{0.0, 0.0};
  for (int j = 0; j < k_points; ++j) sum += winding_integrand(blocks, dk * static_cast<double>(j));
  const std::complex<double> value = sum * dk / std::complex<double>(0.0, 2.0 * std::numbers::pi);
  Winding out;
  out.raw = value.real();
  out.rounded = static_cast<int>(std::lround(out.raw));
  if (out.deviation() > kLowConfidence) {
    spdlog::debug("low-confidence winding {:.6f} rounded to {}", out.raw, out.rounded);
  }
  return out;
}

Winding winding_number(const HamiltonianSpec& spec, int k_points) {
  const Hamiltonian h = build_hamiltonian(spec.with_boundary(Boundary::Periodic));
  return winding_number(chiral_transform(h.matrix), k_points);
}

int count_zero_modes(const Spectrum& spectrum, double threshold) {
  return static_cast<int>((spectrum.energies.array().abs() < threshold).count());
}

void PhaseDiagram::reduce() {
  const std::size_t cells = W_grid.size() * v_grid.size();
  const auto nr = static_cast<std::size_t>(n_realizations);
  nu_mean.assign(cells, 0.0);
  for (std::size_t c = 0; c < cells; ++c) {
    double acc = 0.0;
    for (std::size_t r = 0; r < nr; ++r) acc += samples[c * nr + r];
    nu_mean[c] = acc / static_cast<double>(nr);
  }
}

HamiltonianSpec sweep_spec(const SweepGrid& grid, std::size_t iW, std::size_t iv, std::size_t r,
                           Boundary boundary) {
  HamiltonianSpec spec;
  spec.n_cells = grid.n_cells;
  spec.v = grid.v_grid.at(iv);
  spec.w = grid.w;
  spec.disorder_amplitude = grid.W_grid.at(iW);
  spec.boundary = boundary;
  spec.disorder_seed = realization_seed(grid.master_seed, iW, r);
  return spec;
}

PhaseDiagram label_phase_diagram(const SweepGrid& grid, int k_points, unsigned threads) {
  if (grid.v_grid.empty() || grid.W_grid.empty()) throw InvalidArgument("phase diagram grids must be nonempty");
  if (grid.n_realizations < 1) throw InvalidArgument("n_realizations must be >= 1");
  PhaseDiagram pd;
  pd.v_grid = grid.v_grid;
  pd.W_grid = grid.W_grid;
  pd.n_realizations = grid.n_realizations;
  pd.n_cells = grid.n_cells;
  pd.w = grid.w;
  pd.master_seed = grid.master_seed;

  const std::size_t nv = grid.v_grid.size();
  const auto nr = static_cast<std::size_t>(grid.n_realizations);
  const std::size_t units = grid.W_grid.size() * nv * nr;
  pd.samples.assign(units, 0.0);
  parallel_for(units, threads, [&](std::size_t u) {
    const std::size_t r = u % nr;
    const std::size_t iv = (u / nr) % nv;
    const std::size_t iW = u / (nr * nv);
    const HamiltonianSpec spec = sweep_spec(grid, iW, iv, r, Boundary::Periodic);
    try {
      pd.samples[u] = winding_number(spec, k_points).rounded;
    } catch (const GapClosed& gap) {
      spdlog::warn("gap closed at v={} W={} realization {}: {}", spec.v, spec.disorder_amplitude, r,
                   gap.what());
      pd.samples[u] = std::numeric_limits<double>::quiet_NaN();
    }
  });
  pd.reduce();
  return pd;
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return out;
}

}  // namespace sshlab
