#include "sshlab/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sshlab/errors.hpp"
#include "sshlab/rng.hpp"
#include "sshlab/ssh.hpp"

namespace sshlab {

Eigen::MatrixXd weighted_activation_map(const Image& activations, const std::vector<double>& alphas) {
  if (alphas.size() != static_cast<std::size_t>(activations.channels)) {
    throw ShapeError("one weight per activation channel expected");
  }
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(activations.height, activations.width);
  for (int k = 0; k < activations.channels; ++k) {
    const double a = alphas[static_cast<std::size_t>(k)];
    for (int y = 0; y < activations.height; ++y) {
      for (int x = 0; x < activations.width; ++x) map(y, x) += a * activations.at(k, y, x);
    }
  }
  return map.cwiseMax(0.0);
}

Eigen::MatrixXd upsample_bilinear(const Eigen::MatrixXd& src, int rows, int cols) {
  if (src.rows() == rows && src.cols() == cols) return src;
  Eigen::MatrixXd out(rows, cols);
  auto coord = [](int i, int out_size, Eigen::Index in_size) {
    if (out_size <= 1 || in_size <= 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in_size - 1) / static_cast<double>(out_size - 1);
  };
  for (int r = 0; r < rows; ++r) {
    const double sy = coord(r, rows, src.rows());
    const auto y0 = static_cast<Eigen::Index>(std::floor(sy));
    const Eigen::Index y1 = std::min<Eigen::Index>(y0 + 1, src.rows() - 1);
    const double fy = sy - static_cast<double>(y0);
    for (int c = 0; c < cols; ++c) {
      const double sx = coord(c, cols, src.cols());
      const auto x0 = static_cast<Eigen::Index>(std::floor(sx));
      const Eigen::Index x1 = std::min<Eigen::Index>(x0 + 1, src.cols() - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = (1.0 - fx) * src(y0, x0) + fx * src(y0, x1);
      const double bottom = (1.0 - fx) * src(y1, x0) + fx * src(y1, x1);
      out(r, c) = (1.0 - fy) * top + fy * bottom;
    }
  }
  return out;
}

namespace {

void check_class(const CnnModel& model, int class_index) {
  if (class_index < 0 || class_index >= model.arch.classes) throw RangeError("class index out of range");
}

}  // namespace

CamMap cam(const CnnModel& model, const Image& input, int class_index) {
  check_class(model, class_index);
  const auto& head = model.params.head;
  if (head.in != model.arch.widths.back()) throw StructuralError("CAM needs a GAP + linear head");
  const SampleTape tape = forward_sample(model, input);
  CamMap m;
  m.method = CamMethod::Cam;
  m.class_index = class_index;
  m.layer = kConvLayers - 1;
  m.alphas.assign(head.weight.begin() + static_cast<std::ptrdiff_t>(class_index * head.in),
                  head.weight.begin() + static_cast<std::ptrdiff_t>((class_index + 1) * head.in));
  m.coarse = weighted_activation_map(tape.activations.back(), m.alphas);
  m.values = upsample_bilinear(m.coarse, input.height, input.width);
  return m;
}

CamMap grad_cam(const CnnModel& model, const Image& input, int class_index, int layer) {
  check_class(model, class_index);
  if (layer < 0 || layer >= kConvLayers) throw RangeError("Grad-CAM layer out of range");
  const SampleTape tape = forward_sample(model, input);
  std::vector<double> upstream(static_cast<std::size_t>(model.arch.classes), 0.0);
  upstream[static_cast<std::size_t>(class_index)] = 1.0;
  const auto grads = activation_gradients(model, tape, upstream);
  const Image& g = grads[static_cast<std::size_t>(layer)];
  const Image& a = tape.activations[static_cast<std::size_t>(layer)];
  CamMap m;
  m.method = CamMethod::GradCam;
  m.class_index = class_index;
  m.layer = layer;
  m.alphas.assign(static_cast<std::size_t>(g.channels), 0.0);
  for (int k = 0; k < g.channels; ++k) {
    const double* p = &g.data[static_cast<std::size_t>(k) * g.plane()];
    m.alphas[static_cast<std::size_t>(k)] = std::accumulate(p, p + g.plane(), 0.0);
  }
  m.coarse = weighted_activation_map(a, m.alphas);
  m.values = upsample_bilinear(m.coarse, input.height, input.width);
  return m;
}

std::set<std::pair<int, int>> toy_target_pixels(int n_cells) {
  const int last = 2 * n_cells - 1;
  return {{0, n_cells - 1}, {0, n_cells}, {last, n_cells - 1}, {last, n_cells}};
}

Dataset make_toy_dataset(int n_samples, int n_cells, std::uint64_t seed) {
  if (n_samples < 0 || n_samples % 2 != 0) throw InvalidArgument("toy data needs an even sample count");
  if (n_cells < 2) throw InvalidArgument("n_cells must be >= 2");
  const int dim = 2 * n_cells;
  Pcg32 rng(seed);
  Dataset ds;
  ds.manifest.role = Role::Train;
  ds.manifest.n_cells = n_cells;
  ds.manifest.master_seed = seed;
  ds.manifest.v_offset = 0.0;
  ds.manifest.strata = {{0.0, n_samples}};
  const auto targets = toy_target_pixels(n_cells);
  for (int i = 0; i < n_samples; ++i) {
    EigenSample s;
    s.pixels.resize(dim, dim);
    for (int r = 0; r < dim; ++r) {
      for (int c = 0; c < dim; ++c) s.pixels(r, c) = rng.uniform(0.0, 0.1);
    }
    s.label = i % 2 == 0 ? 1 : 0;
    if (s.label == 1) {
      for (const auto& [r, c] : targets) s.pixels(r, c) = 1.0;
    }
    s.realization = i;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

double cam_peak_alignment(const CamMap& map, const std::set<std::pair<int, int>>& targets) {
  if (targets.empty()) throw InvalidArgument("target set is empty");
  const Eigen::Index rows = map.values.rows();
  const Eigen::Index cols = map.values.cols();
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(rows * cols));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  auto value = [&](Eigen::Index i) { return map.values(i / cols, i % cols); };
  const std::size_t top = std::min(targets.size(), idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(top), idx.end(),
                    [&](Eigen::Index a, Eigen::Index b) {
                      const double va = value(a);
                      const double vb = value(b);
                      return va != vb ? va > vb : a < b;
                    });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < top; ++i) {
    const auto r = static_cast<int>(idx[i] / cols);
    const auto c = static_cast<int>(idx[i] % cols);
    if (targets.contains({r, c})) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(targets.size());
}

double pearson_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("correlation of differently shaped maps");
  const Eigen::ArrayXd x = a.reshaped().array() - a.mean();
  const Eigen::ArrayXd y = b.reshaped().array() - b.mean();
  const double sx = std::sqrt((x * x).sum());
  const double sy = std::sqrt((y * y).sum());
  if (sx == 0.0 || sy == 0.0) return a == b ? 1.0 : 0.0;
  return (x * y).sum() / (sx * sy);
}

double cam_fragility(const CnnModel& model, int n_cells, double v, double W, int n_realizations,
                     std::uint64_t master_seed, int class_index) {
  if (n_realizations < 2) throw InvalidArgument("fragility needs at least two realizations");
  std::vector<Eigen::MatrixXd> maps;
  for (int r = 0; r < n_realizations; ++r) {
    HamiltonianSpec spec;
    spec.n_cells = n_cells;
    spec.v = v;
    spec.disorder_amplitude = W;
    spec.disorder_seed = realization_seed(master_seed, 0, static_cast<std::uint64_t>(r));
    const Eigen::MatrixXd pixels = squared_moduli(diagonalize(build_hamiltonian(spec).matrix));
    maps.push_back(cam(model, image_from_matrix(pixels), class_index).values);
  }
  double acc = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    for (std::size_t j = i + 1; j < maps.size(); ++j) {
      acc += pearson_correlation(maps[i], maps[j]);
      ++pairs;
    }
  }
  return acc / pairs;
}

}  // namespace sshlab
