#include "sshlab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sshlab/errors.hpp"
#include "sshlab/parallel.hpp"
#include "sshlab/ssh.hpp"

namespace sshlab {

PhaseDiagram predict_phase_diagram(const CnnModel& model, const SweepGrid& grid, unsigned threads) {
  if (grid.v_grid.empty() || grid.W_grid.empty()) throw InvalidArgument("grids must be nonempty");
  if (grid.n_realizations < 1) throw InvalidArgument("n_realizations must be >= 1");
  PhaseDiagram d;
  d.v_grid = grid.v_grid;
  d.W_grid = grid.W_grid;
  d.n_realizations = grid.n_realizations;
  d.n_cells = grid.n_cells;
  d.w = grid.w;
  d.master_seed = grid.master_seed;
  const std::size_t nv = grid.v_grid.size();
  const auto nr = static_cast<std::size_t>(grid.n_realizations);
  d.samples.assign(grid.W_grid.size() * nv * nr, 0.0);
  parallel_for(d.samples.size(), threads, [&](std::size_t unit) {
    const std::size_t r = unit % nr;
    const std::size_t iv = (unit / nr) % nv;
    const std::size_t iW = unit / (nr * nv);
    const HamiltonianSpec spec = sweep_spec(grid, iW, iv, r, Boundary::Open);
    const Eigen::MatrixXd pixels = squared_moduli(diagonalize(build_hamiltonian(spec).matrix));
    d.samples[unit] = static_cast<double>(predict(model, image_from_matrix(pixels)));
  });
  d.reduce();
  return d;
}

void check_pairing(const PhaseDiagram& t, const PhaseDiagram& p) {
  if (t.v_grid != p.v_grid || t.W_grid != p.W_grid) throw PairingError("diagrams use different grids");
  if (t.n_realizations != p.n_realizations) throw PairingError("diagrams use different realization counts");
  if (t.master_seed != p.master_seed) throw PairingError("diagrams use different master seeds");
  if (t.n_cells != p.n_cells || t.w != p.w) throw PairingError("diagrams describe different chains");
  if (t.samples.size() != p.samples.size()) throw PairingError("diagrams hold different entry counts");
}

namespace {

template <class Fn>
double paired_mean(std::span<const double> target, std::span<const double> predicted, Fn&& term) {
  if (target.size() != predicted.size()) throw ShapeError("metric inputs differ in length");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (std::isnan(target[i])) continue;
    acc += term(target[i], predicted[i]);
    ++n;
  }
  if (n == 0) throw InvalidArgument("no defined entries to compare");
  return acc / static_cast<double>(n);
}

}  // namespace

double rmse(std::span<const double> target, std::span<const double> predicted) {
  return std::sqrt(paired_mean(target, predicted, [](double y, double yh) { return (y - yh) * (y - yh); }));
}

double ood_accuracy(std::span<const double> target, std::span<const double> predicted) {
  return paired_mean(target, predicted, [](double y, double yh) { return y == yh ? 1.0 : 0.0; });
}

double rmse(const PhaseDiagram& target, const PhaseDiagram& predicted) {
  check_pairing(target, predicted);
  return rmse(std::span<const double>(target.samples), std::span<const double>(predicted.samples));
}

double ood_accuracy(const PhaseDiagram& target, const PhaseDiagram& predicted) {
  check_pairing(target, predicted);
  return ood_accuracy(std::span<const double>(target.samples), std::span<const double>(predicted.samples));
}

std::string to_string(Generalization g) { return g == Generalization::Well ? "Well" : "Poor"; }

namespace {

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd m;
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

ClassSummary summarize_class(const std::vector<SweepRow>& rows, Generalization g, std::size_t scored) {
  ClassSummary s;
  std::vector<double> tr, te, ood, err, sil;
  for (const auto& r : rows) {
    if (r.failed || r.klass != g) continue;
    tr.push_back(r.train_acc);
    te.push_back(r.test_acc);
    ood.push_back(r.ood_acc);
    err.push_back(r.rmse);
    sil.push_back(r.silhouette);
  }
  s.count = static_cast<int>(tr.size());
  s.fraction = scored ? static_cast<double>(s.count) / static_cast<double>(scored) : 0.0;
  s.train_acc = mean_std(tr);
  s.test_acc = mean_std(te);
  s.ood_acc = mean_std(ood);
  s.rmse = mean_std(err);
  s.silhouette = mean_std(sil);
  return s;
}

}  // namespace

void SweepReport::summarize() {
  failed = static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const SweepRow& r) { return r.failed; }));
  const auto scored = rows.size() - static_cast<std::size_t>(failed);
  well = summarize_class(rows, Generalization::Well, scored);
  poor = summarize_class(rows, Generalization::Poor, scored);
}

std::string SweepReport::to_csv() const {
  std::string out = "seed,train_acc,test_acc,ood_acc,rmse,class,silhouette,best_epoch,status\n";
  for (const auto& r : rows) {
    if (r.failed) {
      out += fmt::format("{},,,,,,,,failed: {}\n", r.seed, r.error);
      continue;
    }
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{},{:.17g},{},ok\n", r.seed, r.train_acc, r.test_acc,
                       r.ood_acc, r.rmse, to_string(r.klass), r.silhouette, r.best_epoch);
  }
  return out;
}

std::string SweepReport::to_table() const {
  auto pct = [](const MeanStd& m) { return fmt::format("{:.1f} +- {:.1f} %", 100 * m.mean, 100 * m.std); };
  auto num = [](const MeanStd& m) { return fmt::format("{:.3f} +- {:.3f}", m.mean, m.std); };
  std::string out = fmt::format("{:<22}{:<22}{:<22}\n", "", "Well", "Poor");
  out += fmt::format("{:<22}{:<22}{:<22}\n", "Fraction of networks", fmt::format("{:.0f} %", 100 * well.fraction),
                     fmt::format("{:.0f} %", 100 * poor.fraction));
  out += fmt::format("{:<22}{:<22}{:<22}\n", "Train accuracy", pct(well.train_acc), pct(poor.train_acc));
  out += fmt::format("{:<22}{:<22}{:<22}\n", "Test accuracy", pct(well.test_acc), pct(poor.test_acc));
  out += fmt::format("{:<22}{:<22}{:<22}\n", "OOD accuracy", pct(well.ood_acc), pct(poor.ood_acc));
  out += fmt::format("{:<22}{:<22}{:<22}\n", "RMSE", num(well.rmse), num(poor.rmse));
  if (failed) out += fmt::format("{} run(s) failed to train\n", failed);
  return out;
}

SweepReport seed_sweep(const SeedSweepPlan& plan) {
  if (!plan.train || !plan.validation || !plan.test || !plan.target) {
    throw InvalidArgument("sweep plan is missing a data set or the target diagram");
  }
  SweepReport report;
  report.rows.resize(plan.seeds.size());
  parallel_for(plan.seeds.size(), plan.threads, [&](std::size_t i) {
    SweepRow& row = report.rows[i];
    row.seed = plan.seeds[i];
    try {
      TrainConfig cfg = plan.config;
      cfg.seed = row.seed;
      const TrainResult result = train(init_model(plan.arch, row.seed), *plan.train, *plan.validation, cfg);
      const CnnModel& m = result.model;
      row.best_epoch = result.best_epoch;
      row.train_acc = evaluate(m, plan.train->inputs, plan.train->labels).accuracy;
      row.test_acc = evaluate(m, plan.test->inputs, plan.test->labels).accuracy;
      const PhaseDiagram predicted = predict_phase_diagram(m, plan.grid, 1);
      row.rmse = rmse(*plan.target, predicted);
      row.ood_acc = ood_accuracy(*plan.target, predicted);
      row.klass = row.rmse < kWellRmseThreshold ? Generalization::Well : Generalization::Poor;
      if (!plan.silhouette_inputs.empty()) {
        const ActivationMatrix acts = capture(m, plan.silhouette_inputs, plan.silhouette_meta, LayerTag::Gap);
        const Eigen::MatrixXd xy = pca_project(pca_fit(acts.values, 2), acts.values);
        std::vector<int> labels;
        for (const auto& meta : plan.silhouette_meta) labels.push_back(meta.label);
        row.silhouette = cluster_separation(xy, labels);
      }
      spdlog::info("sweep seed {}: rmse {:.4f} ood {:.4f} test {:.4f}", row.seed, row.rmse, row.ood_acc,
                   row.test_acc);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      spdlog::warn("sweep seed {} failed: {}", row.seed, e.what());
    }
  });
  report.summarize();
  return report;
}

namespace {

constexpr double kClusterTolerance = 1e-10;
constexpr double kResolvedGap = 1e-6;

double energy_scale(const Spectrum& s) { return std::max(1.0, s.energies.cwiseAbs().maxCoeff()); }

bool resolved(const Spectrum& s) {
  const double scale = energy_scale(s);
  for (Eigen::Index i = 0; i + 1 < s.energies.size(); ++i) {
    if (s.energies(i + 1) - s.energies(i) <= kResolvedGap * scale) return false;
  }
  return true;
}

// Rotates each numerically degenerate cluster of s onto the closest
// orthonormal basis (polar factor) to the guide's same-rank states.
void align_clusters(Spectrum& s, const Spectrum& guide) {
  const double scale = energy_scale(s);
  const Eigen::Index n = s.energies.size();
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && s.energies(end) - s.energies(end - 1) <= kClusterTolerance * scale) ++end;
    const Eigen::Index k = end - start;
    if (k > 1) {
      const Eigen::MatrixXd S = s.states.middleCols(start, k);
      const Eigen::MatrixXd U = S.transpose() * guide.states.middleCols(start, k);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(U, Eigen::ComputeFullU | Eigen::ComputeFullV);
      if (svd.singularValues().minCoeff() > 1e-3) {
        s.states.middleCols(start, k) = S * (svd.matrixU() * svd.matrixV().transpose());
      } else {
        spdlog::debug("fidelity: cluster at rank {} is not aligned with its guide; kept as sorted", start);
      }
    }
    start = end;
  }
}

}  // namespace

Eigen::MatrixXd fidelity_map(int n_cells, std::span<const double> v_grid, double W, std::uint64_t seed, double w) {
  if (v_grid.empty()) throw InvalidArgument("v grid is empty");
  auto spectrum_at = [&](double v) {
    HamiltonianSpec spec;
    spec.n_cells = n_cells;
    spec.v = v;
    spec.w = w;
    spec.disorder_amplitude = W;
    spec.disorder_seed = seed;
    return diagonalize(build_hamiltonian(spec).matrix);
  };
  Spectrum reference = spectrum_at(0.0);
  std::vector<Spectrum> spectra;
  for (double v : v_grid) spectra.push_back(spectrum_at(v));

  auto nearest_resolved = [&](double v) -> const Spectrum* {
    const Spectrum* best = nullptr;
    double dist = 0.0;
    for (std::size_t j = 0; j < spectra.size(); ++j) {
      if (!resolved(spectra[j])) continue;
      const double d = std::abs(v_grid[j] - v);
      if (!best || d < dist) {
        best = &spectra[j];
        dist = d;
      }
    }
    return best;
  };
  if (const Spectrum* g = nearest_resolved(0.0)) align_clusters(reference, *g);
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    if (resolved(spectra[j])) continue;
    if (const Spectrum* g = nearest_resolved(v_grid[j])) align_clusters(spectra[j], *g);
  }

  const Eigen::Index dim = reference.states.cols();
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(v_grid.size()));
  for (std::size_t j = 0; j < spectra.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out.col(col) = (reference.states.transpose() * spectra[j].states).diagonal().array().square().matrix();
  }
  return out.cwiseMin(1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i + 1;
    while (j < idx.size() && x[idx[j]] == x[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j - 1);
    for (std::size_t k = i; k < j; ++k) ranks[idx[k]] = r;
    i = j;
  }
  return ranks;
}

}  // namespace

double rank_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("rank correlation needs two equal-length series");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  // Owned (aligned) copies keep the vectorized reductions address independent.
  const Eigen::ArrayXd x = Eigen::Map<const Eigen::ArrayXd>(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::ArrayXd y = Eigen::Map<const Eigen::ArrayXd>(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Eigen::ArrayXd dx = x - x.mean();
  const Eigen::ArrayXd dy = y - y.mean();
  const double denom = std::sqrt((dx * dx).sum() * (dy * dy).sum());
  return denom > 0 ? (dx * dy).sum() / denom : 0.0;
}

}  // namespace sshlab
