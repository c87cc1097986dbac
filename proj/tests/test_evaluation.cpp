#include <gtest/gtest.h>

#include <cmath>

#include "sshlab/errors.hpp"
#include "sshlab/evaluation.hpp"
#include "sshlab/export.hpp"
#include "sshlab/rng.hpp"
#include "sshlab/ssh.hpp"

using namespace sshlab;

namespace {

SweepGrid small_grid() {
  SweepGrid g;
  g.v_grid = linspace(0.05, 1.95, 8);
  g.W_grid = {0.0, 1.0};
  g.n_realizations = 2;
  g.n_cells = 4;
  g.master_seed = 5;
  return g;
}

CnnModel constant_model(int klass) {
  Architecture a = Architecture::for_cells(4);
  CnnModel m{a, Parameters::zeros(a), 0};
  m.params.head.bias = {klass == 0 ? 1.0 : -1.0, klass == 1 ? 1.0 : -1.0};
  return m;
}

}  // namespace

TEST(Metrics, HandValues) {
  const std::vector<double> y{0, 1};
  const std::vector<double> yh{1, 1};
  EXPECT_NEAR(rmse(y, yh), std::sqrt(0.5), 1e-15);
  EXPECT_EQ(rmse(y, y), 0.0);
  const std::vector<double> wrong{1, 0};
  EXPECT_EQ(rmse(y, wrong), 1.0);
  EXPECT_EQ(ood_accuracy(y, y), 1.0);
  EXPECT_EQ(ood_accuracy(y, wrong), 0.0);
  const std::vector<double> a{0, 1, 1, 0};
  const std::vector<double> b{0, 1, 0, 1};
  EXPECT_EQ(ood_accuracy(a, b), 0.5);
}

TEST(Metrics, SkipUndefinedTargets) {
  const std::vector<double> y{0, NAN, 1};
  const std::vector<double> yh{0, 1, 0};
  EXPECT_EQ(ood_accuracy(y, yh), 0.5);
  EXPECT_NEAR(rmse(y, yh), std::sqrt(0.5), 1e-15);
  EXPECT_THROW(rmse(std::vector<double>{1.0}, std::vector<double>{1.0, 0.0}), ShapeError);
}

TEST(Metrics, BinaryBoundsAndEquivalence) {
  Pcg32 rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> y(10);
    std::vector<double> yh(10);
    for (int i = 0; i < 10; ++i) {
      y[static_cast<std::size_t>(i)] = rng.bounded(2);
      yh[static_cast<std::size_t>(i)] = rng.bounded(2);
    }
    const double r = rmse(y, yh);
    const double acc = ood_accuracy(y, yh);
    ASSERT_GE(r, 0.0);
    ASSERT_LE(r, 1.0);
    ASSERT_EQ(r == 0.0, acc == 1.0);
    ASSERT_NEAR(r * r, 1.0 - acc, 1e-15);
  }
}

TEST(PredictDiagram, ConstantModels) {
  const SweepGrid g = small_grid();
  for (int k : {0, 1}) {
    const PhaseDiagram d = predict_phase_diagram(constant_model(k), g, 2);
    for (double x : d.nu_mean) EXPECT_EQ(x, static_cast<double>(k));
  }
}

TEST(PredictDiagram, SingleRealizationRowsAreBinaryAndPaired) {
  SweepGrid g = small_grid();
  g.n_realizations = 1;
  const CnnModel m = init_model(Architecture::for_cells(4), 3);
  const PhaseDiagram d = predict_phase_diagram(m, g, 1);
  for (double x : d.nu_mean) EXPECT_TRUE(x == 0.0 || x == 1.0);
  const PhaseDiagram t = label_phase_diagram(g, 256, 1);
  EXPECT_NO_THROW(check_pairing(t, d));
  EXPECT_EQ(d.samples, predict_phase_diagram(m, g, 3).samples);
}

TEST(PredictDiagram, SeedMismatchIsAHardError) {
  SweepGrid g = small_grid();
  const PhaseDiagram t = label_phase_diagram(g, 256, 1);
  g.master_seed = 6;
  const PhaseDiagram p = predict_phase_diagram(constant_model(1), g, 1);
  EXPECT_THROW(rmse(t, p), PairingError);
  g = small_grid();
  g.v_grid.pop_back();
  EXPECT_THROW(ood_accuracy(t, predict_phase_diagram(constant_model(1), g, 1)), PairingError);
}

TEST(SweepReport, ClassificationAndSchema) {
  SweepReport r;
  r.rows = {{1, 0.99, 0.95, 0.9, 0.1, Generalization::Well, 0.7, 10, false, ""},
            {2, 0.98, 0.93, 0.5, 0.6, Generalization::Poor, 0.2, 12, false, ""},
            {3, 0.97, 0.92, 0.6, 0.5, Generalization::Poor, 0.3, 9, false, ""},
            {4, 0, 0, 0, 0, Generalization::Poor, 0, 0, true, "diverged"}};
  r.summarize();
  EXPECT_EQ(r.well.count, 1);
  EXPECT_EQ(r.poor.count, 2);
  EXPECT_EQ(r.failed, 1);
  EXPECT_NEAR(r.poor.ood_acc.mean, 0.55, 1e-15);
  EXPECT_NEAR(r.poor.ood_acc.std, std::sqrt(0.005), 1e-15);
  EXPECT_EQ(r.well.ood_acc.std, 0.0);
  const std::string csv = r.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "seed,train_acc,test_acc,ood_acc,rmse,class,silhouette,best_epoch,status");
  const std::string table = r.to_table();
  for (const char* row : {"Train accuracy", "Test accuracy", "OOD accuracy", "RMSE"}) {
    EXPECT_NE(table.find(row), std::string::npos) << row;
  }
}

TEST(SeedSweep, SingleSeedReport) {
  GenerationPlan gp;
  gp.role = Role::Train;
  gp.n_cells = 4;
  gp.n_clean = 20;
  const Dataset tr = generate_dataset(gp, 1);
  gp.role = Role::Validation;
  gp.n_clean = 6;
  const Dataset va = generate_dataset(gp, 1);
  const LabeledImages tri = to_images(tr);
  const LabeledImages vai = to_images(va);
  const SweepGrid g = small_grid();
  const PhaseDiagram target = label_phase_diagram(g, 256, 1);
  SeedSweepPlan plan;
  plan.seeds = {7};
  plan.arch = Architecture::for_cells(4);
  plan.config.max_epochs = 3;
  plan.train = &tri;
  plan.validation = &vai;
  plan.test = &vai;
  plan.grid = g;
  plan.target = &target;
  const SweepReport r = seed_sweep(plan);
  ASSERT_EQ(r.rows.size(), 1U);
  EXPECT_FALSE(r.rows[0].failed) << r.rows[0].error;
  EXPECT_EQ(r.rows[0].klass == Generalization::Well, r.rows[0].rmse < 0.2);
}

TEST(Fidelity, ReferenceColumnAndBounds) {
  const auto grid = linspace(0.0, 2.0, 21);
  for (double W : {0.0, 0.15, 1.0}) {
    const Eigen::MatrixXd f = fidelity_map(6, grid, W, 3);
    EXPECT_EQ(f.rows(), 12);
    for (Eigen::Index i = 0; i < f.rows(); ++i) EXPECT_NEAR(f(i, 0), 1.0, 1e-12);
    EXPECT_GE(f.minCoeff(), 0.0);
    EXPECT_LE(f.maxCoeff(), 1.0);
  }
}

TEST(Fidelity, CompletenessOnSmallChain) {
  // Against the full eigenbasis at v, one fixed v = 0 state has total overlap 1.
  HamiltonianSpec s;
  s.n_cells = 3;
  s.v = 0.0;
  const Spectrum ref = diagonalize(build_hamiltonian(s).matrix);
  s.v = 0.7;
  const Spectrum other = diagonalize(build_hamiltonian(s).matrix);
  for (Eigen::Index i = 0; i < 6; ++i) {
    EXPECT_NEAR((other.states.transpose() * ref.states.col(i)).squaredNorm(), 1.0, 1e-10);
  }
}

TEST(Fidelity, OrthogonalPairGivesZero) {
  // Bonding and antibonding dimer states of a two-site block are orthogonal.
  Eigen::Vector2d a(1, 1);
  Eigen::Vector2d b(1, -1);
  EXPECT_NEAR(std::pow(a.normalized().dot(b.normalized()), 2), 0.0, 1e-15);
}

TEST(RankCorrelation, Basics) {
  const std::vector<double> a{1, 2, 3, 4};
  const std::vector<double> b{10, 20, 30, 40};
  const std::vector<double> c{4, 3, 2, 1};
  const std::vector<double> d{1, 1, 2, 2};
  EXPECT_NEAR(rank_correlation(a, b), 1.0, 1e-15);
  EXPECT_NEAR(rank_correlation(a, c), -1.0, 1e-15);
  EXPECT_NEAR(rank_correlation(a, d), 0.8944271909999159, 1e-12);
}

TEST(Export, PhaseDiagramCsvAndPgm) {
  PhaseDiagram d;
  d.v_grid = {0.5, 1.5};
  d.W_grid = {0.0, 0.1};
  d.n_realizations = 1;
  d.nu_mean = {1.0, 0.0, 0.6, NAN};
  EXPECT_EQ(phase_diagram_to_csv(d),
            "v_over_w,W_over_w,nu_mean\n0.5,0,1\n1.5,0,0\n0.5,0.10000000000000001,0.59999999999999998\n"
            "1.5,0.10000000000000001,nan\n");
  const auto pgm = phase_diagram_to_pgm(d);
  const std::string header = "P5\n2 2\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 4);
  EXPECT_EQ(std::string(pgm.begin(), pgm.begin() + static_cast<std::ptrdiff_t>(header.size())), header);
  EXPECT_EQ(pgm[header.size()], 0);
  EXPECT_EQ(pgm[header.size() + 1], 255);
  EXPECT_EQ(pgm[header.size() + 2], 102);
  EXPECT_EQ(pgm[header.size() + 3], 128);
}

TEST(Export, MatrixPgmNormalizesPerMap) {
  Eigen::MatrixXd m(1, 3);
  m << 2.0, 3.0, 4.0;
  const auto pgm = matrix_to_pgm(m);
  EXPECT_EQ(pgm[pgm.size() - 3], 0);
  EXPECT_EQ(pgm[pgm.size() - 2], 128);
  EXPECT_EQ(pgm[pgm.size() - 1], 255);
}
