#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "sshlab/binary_io.hpp"
#include "sshlab/cnn.hpp"
#include "sshlab/errors.hpp"
#include "sshlab/rng.hpp"
#include "test_util.hpp"

using namespace sshlab;

namespace {

Architecture tiny_arch(int n_cells = 4, std::array<int, 3> widths = {2, 2, 2}) {
  Architecture a = Architecture::for_cells(n_cells);
  a.widths = widths;
  return a;
}

Image random_image(const Architecture& a, Pcg32& rng) {
  Image img(a.in_channels, a.height, a.width);
  for (auto& x : img.data) x = rng.uniform01();
  return img;
}

// Loop-by-loop evaluator used as an independent reference.
std::vector<double> naive_logits(const CnnModel& m, const Image& input) {
  std::vector<double> cur = input.data;
  for (auto& x : cur) x *= m.arch.input_scale;
  int c = input.channels;
  int h = input.height;
  int w = input.width;
  for (int l = 0; l < kConvLayers; ++l) {
    const ConvLayer& L = m.params.convs[static_cast<std::size_t>(l)];
    const int k = L.kernel;
    const int ho = h - k + 1;
    const int wo = w - k + 1;
    std::vector<double> next(static_cast<std::size_t>(L.out * ho * wo));
    for (int o = 0; o < L.out; ++o) {
      for (int y = 0; y < ho; ++y) {
        for (int x = 0; x < wo; ++x) {
          double s = L.bias[static_cast<std::size_t>(o)];
          for (int i = 0; i < c; ++i) {
            for (int dy = 0; dy < k; ++dy) {
              for (int dx = 0; dx < k; ++dx) {
                s += L.weight[static_cast<std::size_t>(((o * c + i) * k + dy) * k + dx)] *
                     cur[static_cast<std::size_t>((i * h + y + dy) * w + x + dx)];
              }
            }
          }
          next[static_cast<std::size_t>((o * ho + y) * wo + x)] = std::max(s, 0.0);
        }
      }
    }
    cur = std::move(next);
    c = L.out;
    h = ho;
    w = wo;
  }
  std::vector<double> logits(static_cast<std::size_t>(m.params.head.out));
  for (int o = 0; o < m.params.head.out; ++o) {
    double s = m.params.head.bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < c; ++i) {
      double mean = 0.0;
      for (int p = 0; p < h * w; ++p) mean += cur[static_cast<std::size_t>(i * h * w + p)];
      s += m.params.head.weight[static_cast<std::size_t>(o * c + i)] * mean / (h * w);
    }
    logits[static_cast<std::size_t>(o)] = s;
  }
  return logits;
}

double objective(const CnnModel& m, std::span<const Image> batch, std::span<const int> labels, double lambda) {
  double l = loss_and_grads(m, batch, labels, 0.0).loss;
  if (lambda > 0) {
    double sq = 0.0;
    m.params.for_each([&](const std::vector<double>& t, bool is_weight) {
      if (is_weight) {
        for (double x : t) sq += x * x;
      }
    });
    l += 0.5 * lambda * sq;
  }
  return l;
}

std::vector<double*> flat(Parameters& p) {
  std::vector<double*> out;
  p.for_each([&](std::vector<double>& t, bool) {
    for (double& x : t) out.push_back(&x);
  });
  return out;
}

}  // namespace

TEST(Architecture, DefaultSizes) {
  const Architecture a = Architecture::for_cells(16);
  EXPECT_EQ(a.height, 32);
  EXPECT_EQ(a.out_height(0), 29);
  EXPECT_EQ(a.out_height(1), 27);
  EXPECT_EQ(a.out_height(2), 25);
  EXPECT_EQ(a.parameter_count(), 966U);
  EXPECT_EQ(a.input_scale, 32.0);
}

TEST(Architecture, Validation) {
  Architecture a = Architecture::for_cells(2);  // 4x4 input cannot pass three valid convolutions
  EXPECT_THROW(a.validate(), ShapeError);
  Architecture b = Architecture::for_cells(16);
  b.kernels = {3, 3, 3};
  EXPECT_THROW(b.validate(), ShapeError);
}

TEST(Init, DeterministicAndBounded) {
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m1 = init_model(a, 5);
  const CnnModel m2 = init_model(a, 5);
  EXPECT_EQ(m1.params, m2.params);
  for (double x : m1.params.convs[0].weight) EXPECT_LE(std::abs(x), 0.25);  // fan_in 16
  const double bound2 = 1.0 / std::sqrt(4.0 * 9.0);
  for (double x : m1.params.convs[1].weight) EXPECT_LE(std::abs(x), bound2);
  for (double x : m1.params.head.weight) EXPECT_LE(std::abs(x), 1.0 / std::sqrt(8.0));
}

TEST(Init, SeedsDifferAlmostEverywhere) {
  const Architecture a = Architecture::for_cells(16);
  CnnModel m0 = init_model(a, 0);
  CnnModel m1 = init_model(a, 1);
  const auto p0 = flat(m0.params);
  const auto p1 = flat(m1.params);
  std::size_t same = 0;
  for (std::size_t i = 0; i < p0.size(); ++i) same += *p0[i] == *p1[i];
  EXPECT_LT(static_cast<double>(same), 0.01 * static_cast<double>(p0.size()));
}

TEST(Forward, ZeroModelGivesEvenOdds) {
  const Architecture a = Architecture::for_cells(8);
  CnnModel m{a, Parameters::zeros(a), 0};
  Pcg32 rng(1);
  const Image img = random_image(a, rng);
  const auto f = forward(m, std::span<const Image>(&img, 1));
  EXPECT_EQ(f.probs(0, 0), 0.5);
  EXPECT_EQ(f.probs(0, 1), 0.5);
  const int label = 1;
  EXPECT_NEAR(loss_and_grads(m, std::span<const Image>(&img, 1), std::span<const int>(&label, 1)).loss, std::log(2.0),
              1e-15);
}

TEST(Forward, MatchesNaiveEvaluator) {
  Pcg32 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Architecture a = trial % 2 ? tiny_arch(5, {3, 4, 2}) : Architecture::for_cells(16);
    const CnnModel m = init_model(a, static_cast<std::uint64_t>(trial));
    const Image img = random_image(a, rng);
    const SampleTape t = forward_sample(m, img);
    const auto ref = naive_logits(m, img);
    for (std::size_t c = 0; c < ref.size(); ++c) EXPECT_NEAR(t.logits[c], ref[c], 1e-12);
  }
}

TEST(Forward, SoftmaxRowsAndDuplicates) {
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m = init_model(a, 2);
  Pcg32 rng(4);
  std::vector<Image> batch{random_image(a, rng), random_image(a, rng)};
  batch.push_back(batch[0]);
  const auto f = forward(m, batch);
  for (Eigen::Index r = 0; r < f.probs.rows(); ++r) {
    EXPECT_NEAR(f.probs.row(r).sum(), 1.0, 1e-12);
    EXPECT_GT(f.probs.row(r).minCoeff(), 0.0);
    EXPECT_LT(f.probs.row(r).maxCoeff(), 1.0);
  }
  EXPECT_EQ(f.logits.row(0), f.logits.row(2));
}

TEST(Forward, RejectsWrongShape) {
  const CnnModel m = init_model(Architecture::for_cells(16), 0);
  EXPECT_THROW(forward_sample(m, Image(1, 30, 32)), ShapeError);
}

TEST(Forward, GapIgnoresTranslationOfActivations) {
  // Identity-like single-channel network: every kernel is a delta at its
  // top-left tap, so activations are shifted copies of the input. Moving a
  // bump inside a zero background leaves the pooled value unchanged.
  Architecture a = tiny_arch(8, {1, 1, 1});
  CnnModel m{a, Parameters::zeros(a), 0};
  for (auto& c : m.params.convs) c.weight[0] = 1.0;
  m.params.head.weight = {1.0, -1.0};
  Image x(1, 16, 16);
  Image y(1, 16, 16);
  x.at(0, 3, 4) = 0.7;
  x.at(0, 4, 4) = 0.2;
  y.at(0, 7, 8) = 0.7;
  y.at(0, 8, 8) = 0.2;
  const SampleTape tx = forward_sample(m, x);
  const SampleTape ty = forward_sample(m, y);
  EXPECT_NE(tx.activations[2].data, ty.activations[2].data);
  EXPECT_EQ(tx.gap, ty.gap);
}

TEST(Loss, ConfidentCorrectPredictionApproachesZero) {
  Architecture a = tiny_arch();
  CnnModel m{a, Parameters::zeros(a), 0};
  m.params.head.bias = {-40.0, 40.0};
  Image img(1, 8, 8);
  const int label = 1;
  EXPECT_LT(loss_and_grads(m, std::span<const Image>(&img, 1), std::span<const int>(&label, 1)).loss, 1e-30);
  const int wrong = 0;
  // Probability clamp keeps the loss finite.
  const double l = loss_and_grads(m, std::span<const Image>(&img, 1), std::span<const int>(&wrong, 1)).loss;
  EXPECT_NEAR(l, -std::log(kProbabilityFloor), 1e-9);
}

TEST(Gradients, MatchCentralFiniteDifferences) {
  Pcg32 rng(99);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double lambda = trial % 2 ? 0.0 : 0.1;
    const Architecture a = tiny_arch();
    CnnModel m = init_model(a, static_cast<std::uint64_t>(100 + trial));
    std::vector<Image> batch;
    std::vector<int> labels;
    for (int i = 0; i < 3; ++i) {
      batch.push_back(random_image(a, rng));
      labels.push_back(static_cast<int>(rng.bounded(2)));
    }
    LossAndGrads lg = loss_and_grads(m, batch, labels, lambda);
    const auto g = flat(lg.grads);
    const auto p = flat(m.params);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = *p[i];
      *p[i] = saved + h;
      const double up = objective(m, batch, labels, lambda);
      *p[i] = saved - h;
      const double down = objective(m, batch, labels, lambda);
      *p[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double rel = std::abs(numeric - *g[i]) / std::max({std::abs(numeric), std::abs(*g[i]), 1e-4});
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-5);
}

// Worker threads allocate from their own malloc arena, so buffers land at
// different addresses than on the calling thread. Gradients must not care.
TEST(Gradients, BitwiseIndependentOfBufferAddresses) {
  const Architecture a = Architecture::for_cells(16);
  Pcg32 rng(41);
  std::vector<Image> batch;
  std::vector<int> labels;
  for (int i = 0; i < 8; ++i) {
    batch.push_back(random_image(a, rng));
    labels.push_back(i % 2);
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CnnModel m = init_model(a, seed);
    const LossAndGrads here = loss_and_grads(m, batch, labels, 1e-4);
    for (std::size_t pad = 8; pad <= 56; pad += 16) {
      LossAndGrads there;
      std::thread([&] {
        void* shift = std::malloc(pad);
        there = loss_and_grads(m, batch, labels, 1e-4);
        std::free(shift);
      }).join();
      EXPECT_EQ(here.loss, there.loss);
      EXPECT_EQ(here.grads, there.grads) << "seed " << seed << ", pad " << pad;
    }
  }
}

TEST(Gradients, LastLayerActivationGradientIsHeadWeightOverArea) {
  const Architecture a = tiny_arch();
  const CnnModel m = init_model(a, 8);
  Pcg32 rng(8);
  const Image img = random_image(a, rng);
  const SampleTape t = forward_sample(m, img);
  const std::vector<double> up{0.0, 1.0};
  const auto dA = activation_gradients(m, t, up);
  const Image& g = dA[2];
  for (int k = 0; k < g.channels; ++k) {
    for (std::size_t p = 0; p < g.plane(); ++p) {
      EXPECT_NEAR(g.data[k * g.plane() + p], m.params.head.weight[static_cast<std::size_t>(a.widths[2] + k)] /
                                                 static_cast<double>(g.plane()),
                  1e-15);
    }
  }
}

TEST(Forward, LogitsFromActivationReproducesTape) {
  const Architecture a = Architecture::for_cells(8);
  const CnnModel m = init_model(a, 12);
  Pcg32 rng(12);
  const SampleTape t = forward_sample(m, random_image(a, rng));
  for (int l = 0; l < kConvLayers; ++l) {
    EXPECT_EQ(logits_from_activation(m, l, t.activations[static_cast<std::size_t>(l)]), t.logits);
  }
  EXPECT_THROW(logits_from_activation(m, 0, t.activations[1]), ShapeError);
}

TEST(Evaluate, ThreadCountInvariant) {
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m = init_model(a, 1);
  Pcg32 rng(2);
  std::vector<Image> xs;
  std::vector<int> ys;
  for (int i = 0; i < 40; ++i) {
    xs.push_back(random_image(a, rng));
    ys.push_back(i % 2);
  }
  const Evaluation e1 = evaluate(m, xs, ys, 1);
  const Evaluation e4 = evaluate(m, xs, ys, 4);
  EXPECT_EQ(e1.loss, e4.loss);
  EXPECT_EQ(e1.accuracy, e4.accuracy);
  EXPECT_EQ(e1.count, 40U);
}

TEST(Checkpoint, RoundTripPreservesOutputs) {
  sshlab::testutil::TempDir dir;
  const Architecture a = Architecture::for_cells(16);
  const CnnModel m = init_model(a, 77);
  save_checkpoint(dir / "m.sshw", m);
  const CnnModel back = load_checkpoint(dir / "m.sshw");
  EXPECT_EQ(back, m);
  Pcg32 rng(1);
  const Image img = random_image(a, rng);
  EXPECT_EQ(forward_sample(m, img).logits, forward_sample(back, img).logits);
  EXPECT_EQ(encode_checkpoint(back), read_file(dir / "m.sshw"));
}

TEST(Checkpoint, LayoutAndErrors) {
  const CnnModel m = init_model(tiny_arch(), 1);
  auto bytes = encode_checkpoint(m);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SSHW");
  auto truncated = bytes;
  truncated.resize(bytes.size() / 2);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto flipped = bytes;
  flipped[bytes.size() - 20] ^= 1;
  EXPECT_THROW(decode_checkpoint(flipped), ChecksumError);
  auto magic = bytes;
  magic[3] = 'X';
  EXPECT_THROW(decode_checkpoint(magic), FormatError);
}

TEST(Checkpoint, RandomModelsRoundTrip) {
  Pcg32 rng(5);
  for (int i = 0; i < 100; ++i) {
    Architecture a = Architecture::for_cells(4 + static_cast<int>(rng.bounded(13)));
    a.widths = {1 + static_cast<int>(rng.bounded(6)), 1 + static_cast<int>(rng.bounded(6)),
                1 + static_cast<int>(rng.bounded(6))};
    const CnnModel m = init_model(a, rng());
    const auto bytes = encode_checkpoint(m);
    const CnnModel back = decode_checkpoint(bytes);
    ASSERT_EQ(back, m);
    ASSERT_EQ(crc32(encode_checkpoint(back)), crc32(bytes));
  }
}
