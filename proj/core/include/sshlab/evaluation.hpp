#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sshlab/cnn.hpp"
#include "sshlab/latent.hpp"
#include "sshlab/topology.hpp"
#include "sshlab/train.hpp"

namespace sshlab {

// Argmax class of the open chain for every (W, v, realization) of the grid,
// built from the same realizations label_phase_diagram uses.
PhaseDiagram predict_phase_diagram(const CnnModel& model, const SweepGrid& grid, unsigned threads = 0);

// Throws PairingError unless both diagrams come from the same grid and seeds.
void check_pairing(const PhaseDiagram& target, const PhaseDiagram& predicted);

// Over per-realization entries; entries whose target is NaN are skipped.
double rmse(const PhaseDiagram& target, const PhaseDiagram& predicted);
double ood_accuracy(const PhaseDiagram& target, const PhaseDiagram& predicted);
double rmse(std::span<const double> target, std::span<const double> predicted);
double ood_accuracy(std::span<const double> target, std::span<const double> predicted);

inline constexpr double kWellRmseThreshold = 0.2;

enum class Generalization { Well, Poor };
std::string to_string(Generalization g);

struct SweepRow {
  std::uint64_t seed = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double ood_acc = 0.0;
  double rmse = 0.0;
  Generalization klass = Generalization::Poor;
  double silhouette = 0.0;
  int best_epoch = 0;
  bool failed = false;
  std::string error;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct ClassSummary {
  int count = 0;
  double fraction = 0.0;
  MeanStd train_acc, test_acc, ood_acc, rmse, silhouette;
};

struct SweepReport {
  std::vector<SweepRow> rows;
  ClassSummary well;
  ClassSummary poor;
  int failed = 0;

  // Recomputes the per-class aggregates from rows (sample standard deviation).
  void summarize();
  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_table() const;
};

struct SeedSweepPlan {
  std::vector<std::uint64_t> seeds;
  Architecture arch;
  TrainConfig config;  // seed is replaced per run
  const LabeledImages* train = nullptr;
  const LabeledImages* validation = nullptr;
  const LabeledImages* test = nullptr;
  SweepGrid grid;
  const PhaseDiagram* target = nullptr;
  // Inputs for the GAP-layer silhouette; skipped when empty.
  std::vector<Image> silhouette_inputs;
  std::vector<SampleMeta> silhouette_meta;
  unsigned threads = 0;
};

// Trains one model per seed (in parallel across seeds) and scores it.
// A seed that fails to train is reported, not rethrown.
SweepReport seed_sweep(const SeedSweepPlan& plan);

// Entry (i, j) = |<e_i(v = 0) | e_i(v_j)>|^2 for the open chain with the
// disorder realization of `seed`. Numerically degenerate clusters are
// rotated onto the same-rank states of the nearest non-degenerate spectrum
// of the grid so that paired states vary continuously with v.
Eigen::MatrixXd fidelity_map(int n_cells, std::span<const double> v_grid, double W, std::uint64_t seed,
                             double w = 1.0);

// Spearman rank correlation (average ranks for ties).
double rank_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace sshlab
