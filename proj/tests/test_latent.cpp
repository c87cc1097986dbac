#include <gtest/gtest.h>

#include <cmath>

#include "sshlab/errors.hpp"
#include "sshlab/latent.hpp"
#include "sshlab/rng.hpp"

using namespace sshlab;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Pcg32& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1, 1) * (1 + i % cols);
  return m;
}

// Projector onto the span of the rows of basis.
Eigen::MatrixXd projector(const Eigen::MatrixXd& basis) { return basis.transpose() * basis; }

}  // namespace

TEST(Capture, ShapesAndDuplicates) {
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m = init_model(a, 1);
  Pcg32 rng(1);
  std::vector<Image> xs(3, Image(1, 32, 32));
  for (auto& x : xs[0].data) x = rng.uniform01();
  for (auto& x : xs[1].data) x = rng.uniform01();
  xs[2] = xs[0];
  const std::vector<SampleMeta> meta{{0.1, 0, 1}, {1.5, 0, 0}, {0.1, 0, 1}};
  const ActivationMatrix gap = capture(m, xs, meta, LayerTag::Gap, 2);
  EXPECT_EQ(gap.values.cols(), 8);
  EXPECT_EQ(gap.values.row(0), gap.values.row(2));
  const ActivationMatrix c3 = capture(m, xs, meta, LayerTag::Conv3);
  EXPECT_EQ(c3.values.cols(), 8 * 25 * 25);
  EXPECT_EQ(capture(m, xs, meta, LayerTag::Conv1).values.cols(), 4 * 29 * 29);
  EXPECT_EQ(c3.meta.size(), 3U);
  EXPECT_THROW(layer_tag_from_string("conv4"), InvalidArgument);
}

TEST(Pca, DiagonalCovariance) {
  // Points (+-2, 0) and (0, +-1): covariance diag(8/3, 2/3) with divisor 3.
  Eigen::MatrixXd X(4, 2);
  X << 2, 0, -2, 0, 0, 1, 0, -1;
  const PcaModel p = pca_fit(X, 2);
  EXPECT_NEAR(p.eigenvalues(0), 8.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.eigenvalues(1), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p.components(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(p.components(1, 1), 1.0, 1e-12);
}

TEST(Pca, CollinearPointsHaveRankOne) {
  Eigen::MatrixXd X(5, 2);
  for (int i = 0; i < 5; ++i) X.row(i) << i, 2.0 * i;
  const PcaModel p = pca_fit(X, 1);
  EXPECT_NEAR(p.components(0, 1) / p.components(0, 0), 2.0, 1e-12);
  Eigen::MatrixXd Y(5, 3);
  for (int i = 0; i < 5; ++i) Y.row(i) << i, 2.0 * i, -1.0 * i;
  EXPECT_LT(pca_fit(Y, 2).eigenvalues(1), 1e-10);
}

TEST(Pca, RejectsBadInput) {
  EXPECT_THROW(pca_fit(Eigen::MatrixXd::Ones(1, 3), 1), InvalidArgument);
  EXPECT_THROW(pca_fit(Eigen::MatrixXd::Random(4, 3), 4), RangeError);
}

TEST(Pca, MatchesSingularValueOracle) {
  Pcg32 rng(11);
  for (int t = 0; t < 20; ++t) {
    const int rows = 50;
    const int cols = t % 2 ? 7 : 70;  // both the covariance and the Gram path
    const Eigen::MatrixXd X = random_matrix(rows, cols, rng);
    const int k = 5;
    const PcaModel p = pca_fit(X, k);
    const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinV);
    const Eigen::VectorXd oracle = svd.singularValues().head(k).array().square() / (rows - 1);
    EXPECT_LT((p.eigenvalues - oracle).cwiseAbs().maxCoeff(), 1e-8);
    const Eigen::MatrixXd V = svd.matrixV().leftCols(k).transpose();
    EXPECT_LT((projector(p.components) - projector(V)).norm(), 1e-8);
    EXPECT_LT((p.components * p.components.transpose() - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff(),
              1e-10);
    for (int c = 1; c < k; ++c) EXPECT_GE(p.eigenvalues(c - 1), p.eigenvalues(c));
  }
}

TEST(Pca, VarianceAccountingAndReconstruction) {
  Pcg32 rng(12);
  const Eigen::MatrixXd X = random_matrix(30, 6, rng);
  const PcaModel p = pca_fit(X, 6);
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  EXPECT_NEAR(p.eigenvalues.sum(), (Xc.transpose() * Xc / 29.0).trace(), 1e-8);
  EXPECT_NEAR(p.total_variance, p.eigenvalues.sum(), 1e-8);
  const Eigen::MatrixXd Z = pca_project(p, X);
  const Eigen::MatrixXd back = (Z * p.components).rowwise() + p.mean;
  EXPECT_LT((back - X).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(pca_project(p, p.mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, IsometryOnComponentSpan) {
  Pcg32 rng(13);
  const Eigen::MatrixXd X = random_matrix(40, 5, rng);
  const PcaModel p = pca_fit(X, 3);
  Eigen::MatrixXd pts(10, 5);
  for (int i = 0; i < 10; ++i) {
    pts.row(i) = p.mean + rng.uniform(-3, 3) * p.components.row(0) + rng.uniform(-3, 3) * p.components.row(1) +
                 rng.uniform(-3, 3) * p.components.row(2);
  }
  const Eigen::MatrixXd z = pca_project(p, pts);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      EXPECT_NEAR((z.row(i) - z.row(j)).norm(), (pts.row(i) - pts.row(j)).norm(), 1e-8);
    }
  }
}

TEST(Pca, DeterministicSigns) {
  Pcg32 rng(14);
  const Eigen::MatrixXd X = random_matrix(20, 4, rng);
  const PcaModel a = pca_fit(X, 3);
  const PcaModel b = pca_fit(X, 3);
  EXPECT_EQ(a.components, b.components);
  for (int c = 0; c < 3; ++c) {
    Eigen::Index arg = 0;
    a.components.row(c).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(a.components(c, arg), 0.0);
  }
}

TEST(Silhouette, SeparatedBlobsAndIdenticalClouds) {
  Pcg32 rng(15);
  Eigen::MatrixXd pts(40, 2);
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    const int l = i % 2;
    pts.row(i) << (l ? 100.0 : 0.0) + rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5);
    labels.push_back(l);
  }
  EXPECT_GT(cluster_separation(pts, labels), 0.9);
  Eigen::MatrixXd same(40, 2);
  for (int i = 0; i < 20; ++i) {
    same.row(2 * i) << rng.uniform(-1, 1), rng.uniform(-1, 1);
    same.row(2 * i + 1) = same.row(2 * i);
  }
  EXPECT_LE(cluster_separation(same, labels), 0.0);
}

TEST(ProjectionCsv, HeaderAndStrata) {
  Eigen::MatrixXd z(3, 2);
  z << 1, 2, 3, 4, 5, 6;
  const std::vector<SampleMeta> meta{{0.5, 0.05, 1}, {1.5, 0.0, 0}, {0.7, 0.01, 1}};
  EXPECT_EQ(projection_to_csv(z, meta),
            "pc1,pc2,v,W,label,stratum\n1,2,0.5,0.050000000000000003,1,2\n3,4,1.5,0,0,0\n"
            "5,6,0.69999999999999996,0.01,1,1\n");
}
