#include "sshlab/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sshlab/errors.hpp"
#include "sshlab/parallel.hpp"

namespace sshlab {

std::string to_string(LayerTag tag) {
  switch (tag) {
    case LayerTag::Conv1: return "conv1";
    case LayerTag::Conv2: return "conv2";
    case LayerTag::Conv3: return "conv3";
    case LayerTag::Gap: return "gap";
  }
  return "gap";
}

LayerTag layer_tag_from_string(const std::string& name) {
  if (name == "conv1") return LayerTag::Conv1;
  if (name == "conv2") return LayerTag::Conv2;
  if (name == "conv3") return LayerTag::Conv3;
  if (name == "gap") return LayerTag::Gap;
  throw InvalidArgument("unknown layer tag '" + name + "'");
}

int activation_width(const Architecture& arch, LayerTag tag) {
  if (tag == LayerTag::Gap) return arch.widths.back();
  const int l = static_cast<int>(tag);
  if (l >= kConvLayers) throw InvalidArgument("layer tag absent from architecture");
  return arch.widths[static_cast<std::size_t>(l)] * arch.out_height(l) * arch.out_width(l);
}

ActivationMatrix capture(const CnnModel& model, std::span<const Image> inputs, std::span<const SampleMeta> meta,
                         LayerTag tag, unsigned threads) {
  if (!meta.empty() && meta.size() != inputs.size()) throw ShapeError("metadata rows differ from inputs");
  const int cols = activation_width(model.arch, tag);
  ActivationMatrix out;
  out.tag = tag;
  out.values.resize(static_cast<Eigen::Index>(inputs.size()), cols);
  out.meta.assign(meta.begin(), meta.end());
  std::vector<std::vector<double>> rows(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t i) {
    const SampleTape tape = forward_sample(model, inputs[i]);
    rows[i] = tag == LayerTag::Gap ? tape.gap : tape.activations[static_cast<std::size_t>(tag)].data;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), cols);
  }
  return out;
}

namespace {

void fix_sign(Eigen::Ref<Eigen::RowVectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v(arg) < 0) v = -v;
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& X, int n_components) {
  const Eigen::Index rows = X.rows();
  const Eigen::Index cols = X.cols();
  if (rows < 2) throw InvalidArgument("PCA needs at least two rows");
  if (n_components < 1 || n_components > std::min<Eigen::Index>(rows - 1, cols)) {
    throw RangeError("n_components must lie in [1, min(rows - 1, cols)]");
  }
  PcaModel m;
  m.mean = X.colwise().mean();
  const Eigen::MatrixXd Xc = X.rowwise() - m.mean;
  const double denom = static_cast<double>(rows - 1);
  const bool dual = cols > rows;
  const Eigen::MatrixXd C = dual ? Eigen::MatrixXd(Xc * Xc.transpose() / denom)
                                 : Eigen::MatrixXd(Xc.transpose() * Xc / denom);
  m.total_variance = C.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigensolver failed");
  const Eigen::Index n = C.rows();
  m.eigenvalues.resize(n_components);
  m.components.resize(n_components, cols);
  for (int c = 0; c < n_components; ++c) {
    const Eigen::Index src = n - 1 - c;
    const double lambda = std::max(es.eigenvalues()(src), 0.0);
    m.eigenvalues(c) = lambda;
    Eigen::RowVectorXd comp;
    if (dual) {
      comp = (Xc.transpose() * es.eigenvectors().col(src)).transpose();
      const double norm = comp.norm();
      if (norm > 0) comp /= norm;
    } else {
      comp = es.eigenvectors().col(src).transpose();
    }
    fix_sign(comp);
    m.components.row(c) = comp;
  }
  const double scale = std::max(m.total_variance, 1e-300);
  for (int c = 0; c < n_components && c + 1 < n; ++c) {
    const double a = std::max(es.eigenvalues()(n - 1 - c), 0.0);
    const double b = std::max(es.eigenvalues()(n - 2 - c), 0.0);
    if (a > 0 && std::abs(a - b) <= 1e-10 * scale) {
      spdlog::warn("pca: eigenvalues {} and {} are degenerate ({:.3e}); component basis is not unique", c + 1,
                   c + 2, a);
    }
  }
  return m;
}

Eigen::MatrixXd pca_project(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.mean.size()) throw ShapeError("projected rows differ in width from the fit");
  return (X.rowwise() - model.mean) * model.components.transpose();
}

double cluster_separation(const Eigen::MatrixXd& points, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(points.rows());
  if (labels.size() != n) throw ShapeError("one label per point expected");
  if (n < 2) throw InvalidArgument("silhouette needs at least two points");
  std::map<int, std::size_t> sizes;
  for (int l : labels) ++sizes[l];
  if (sizes.size() < 2) throw InvalidArgument("silhouette needs at least two clusters");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::map<int, double> dist;
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      dist[labels[j]] += (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
    }
    const std::size_t own = sizes[labels[i]];
    if (own < 2) continue;  // singleton clusters score 0
    const double a = dist[labels[i]] / static_cast<double>(own - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, size] : sizes) {
      if (label != labels[i]) b = std::min(b, dist[label] / static_cast<double>(size));
    }
    const double d = std::max(a, b);
    total += d > 0 ? (b - a) / d : 0.0;
  }
  return total / static_cast<double>(n);
}

std::string projection_to_csv(const Eigen::MatrixXd& projected, std::span<const SampleMeta> meta) {
  if (static_cast<std::size_t>(projected.rows()) != meta.size()) throw ShapeError("one metadata row per point expected");
  if (projected.cols() < 2) throw ShapeError("need at least two components");
  std::vector<double> ws;
  for (const auto& m : meta) ws.push_back(m.W);
  std::sort(ws.begin(), ws.end());
  ws.erase(std::unique(ws.begin(), ws.end()), ws.end());
  std::string out = "pc1,pc2,v,W,label,stratum\n";
  for (std::size_t i = 0; i < meta.size(); ++i) {
    const auto stratum = std::lower_bound(ws.begin(), ws.end(), meta[i].W) - ws.begin();
    out += fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{},{}\n", projected(static_cast<Eigen::Index>(i), 0),
                       projected(static_cast<Eigen::Index>(i), 1), meta[i].v, meta[i].W, meta[i].label, stratum);
  }
  return out;
}

}  // namespace sshlab
