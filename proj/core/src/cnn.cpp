#include "sshlab/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sshlab/errors.hpp"
#include "sshlab/parallel.hpp"
#include "sshlab/rng.hpp"

namespace sshlab {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

// cols((c*k + ky)*k + kx, y*wo + x) = in(c, y + ky, x + kx)
void im2col(const Image& in, int k, int ho, int wo, RowMat& cols) {
  cols.resize(static_cast<Eigen::Index>(in.channels) * k * k, static_cast<Eigen::Index>(ho) * wo);
  for (int c = 0; c < in.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = cols.row((c * k + ky) * k + kx).data();
        for (int y = 0; y < ho; ++y) {
          const double* src = &in.data[static_cast<std::size_t>((c * in.height + y + ky) * in.width + kx)];
          std::copy(src, src + wo, dst + static_cast<std::ptrdiff_t>(y) * wo);
        }
      }
    }
  }
}

void col2im_add(const RowMat& dcols, int k, int ho, int wo, Image& din) {
  for (int c = 0; c < din.channels; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = dcols.row((c * k + ky) * k + kx).data();
        for (int y = 0; y < ho; ++y) {
          double* dst = &din.data[static_cast<std::size_t>((c * din.height + y + ky) * din.width + kx)];
          const double* row = src + static_cast<std::ptrdiff_t>(y) * wo;
          for (int x = 0; x < wo; ++x) dst[x] += row[x];
        }
      }
    }
  }
}

void conv_forward(const ConvLayer& layer, const Image& in, Image& out) {
  const int ho = in.height - layer.kernel + 1;
  const int wo = in.width - layer.kernel + 1;
  RowMat cols;
  im2col(in, layer.kernel, ho, wo, cols);
  out = Image(layer.out, ho, wo);
  const ConstRowMap weight(layer.weight.data(), layer.out, static_cast<Eigen::Index>(layer.in) * layer.kernel * layer.kernel);
  RowMap result(out.data.data(), layer.out, static_cast<Eigen::Index>(ho) * wo);
  result.noalias() = weight * cols;
  for (int o = 0; o < layer.out; ++o) {
    const double b = layer.bias[static_cast<std::size_t>(o)];
    for (auto& x : result.row(o)) x = std::max(0.0, x + b);
  }
}

void check_input(const Architecture& arch, const Image& in) {
  if (in.channels != arch.in_channels || in.height != arch.height || in.width != arch.width ||
      in.data.size() != static_cast<std::size_t>(in.channels * in.height * in.width)) {
    throw ShapeError("input " + std::to_string(in.channels) + "x" + std::to_string(in.height) + "x" +
                     std::to_string(in.width) + " does not match architecture " + std::to_string(arch.in_channels) +
                     "x" + std::to_string(arch.height) + "x" + std::to_string(arch.width));
  }
}

// Reverse pass from d(objective)/d(logits). Accumulates parameter gradients
// into grads and/or stores d(objective)/d(activation) per conv layer.
void gap_and_head(const CnnModel& model, const Image& last, std::vector<double>& gap, std::vector<double>& logits) {
  gap.assign(static_cast<std::size_t>(last.channels), 0.0);
  for (int k = 0; k < last.channels; ++k) {
    double acc = 0.0;
    const double* p = &last.data[static_cast<std::size_t>(k) * last.plane()];
    for (std::size_t i = 0; i < last.plane(); ++i) acc += p[i];
    gap[static_cast<std::size_t>(k)] = acc / static_cast<double>(last.plane());
  }
  const auto& head = model.params.head;
  logits.assign(static_cast<std::size_t>(head.out), 0.0);
  for (int c = 0; c < head.out; ++c) {
    double acc = head.bias[static_cast<std::size_t>(c)];
    for (int k = 0; k < head.in; ++k) acc += head.weight[static_cast<std::size_t>(c * head.in + k)] * gap[static_cast<std::size_t>(k)];
    logits[static_cast<std::size_t>(c)] = acc;
  }
}

void backprop(const CnnModel& model, const SampleTape& tape, std::span<const double> upstream, Parameters* grads,
              std::array<Image, kConvLayers>* act_grads) {
  const auto& head = model.params.head;
  const auto& last = tape.activations[kConvLayers - 1];
  std::vector<double> dgap(static_cast<std::size_t>(head.in), 0.0);
  for (int c = 0; c < head.out; ++c) {
    const double g = upstream[static_cast<std::size_t>(c)];
    for (int k = 0; k < head.in; ++k) {
      dgap[static_cast<std::size_t>(k)] += head.weight[static_cast<std::size_t>(c * head.in + k)] * g;
      if (grads != nullptr) grads->head.weight[static_cast<std::size_t>(c * head.in + k)] += g * tape.gap[static_cast<std::size_t>(k)];
    }
    if (grads != nullptr) grads->head.bias[static_cast<std::size_t>(c)] += g;
  }

  Image dact(last.channels, last.height, last.width);
  const double inv_area = 1.0 / static_cast<double>(last.plane());
  for (int k = 0; k < last.channels; ++k) {
    const double g = dgap[static_cast<std::size_t>(k)] * inv_area;
    std::fill_n(dact.data.begin() + static_cast<std::ptrdiff_t>(k * last.plane()), last.plane(), g);
  }

  RowMat cols;
  RowMat dcols;
  for (int l = kConvLayers - 1; l >= 0; --l) {
    const auto& layer = model.params.convs[static_cast<std::size_t>(l)];
    const Image& act = tape.activations[static_cast<std::size_t>(l)];
    const Image& in = l == 0 ? tape.input : tape.activations[static_cast<std::size_t>(l - 1)];
    if (act_grads != nullptr) (*act_grads)[static_cast<std::size_t>(l)] = dact;
    if (grads == nullptr && act_grads != nullptr && l == 0) break;

    // Rectifier mask.
    for (std::size_t i = 0; i < dact.data.size(); ++i) {
      if (!(act.data[i] > 0.0)) dact.data[i] = 0.0;
    }
    const int ho = act.height;
    const int wo = act.width;
    const Eigen::Index patch = static_cast<Eigen::Index>(layer.in) * layer.kernel * layer.kernel;
    const ConstRowMap dz(dact.data.data(), layer.out, static_cast<Eigen::Index>(ho) * wo);
    im2col(in, layer.kernel, ho, wo, cols);
    if (grads != nullptr) {
      auto& g = grads->convs[static_cast<std::size_t>(l)];
      RowMap dw(g.weight.data(), layer.out, patch);
      dw.noalias() += dz * cols.transpose();
      // Plain loop: Eigen's vectorized sum over mapped memory peels by address,
      // which would make the result depend on heap layout.
      for (int o = 0; o < layer.out; ++o) {
        double acc = 0.0;
        for (const double x : dz.row(o)) acc += x;
        g.bias[static_cast<std::size_t>(o)] += acc;
      }
    }
    if (l == 0) break;
    const ConstRowMap weight(layer.weight.data(), layer.out, patch);
    dcols.noalias() = weight.transpose() * dz;
    Image dprev(in.channels, in.height, in.width);
    col2im_add(dcols, layer.kernel, ho, wo, dprev);
    dact = std::move(dprev);
  }
}

}  // namespace

Image image_from_matrix(const Eigen::MatrixXd& pixels) {
  Image img(1, static_cast<int>(pixels.rows()), static_cast<int>(pixels.cols()));
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) img.at(0, r, c) = pixels(r, c);
  }
  return img;
}

Architecture Architecture::for_cells(int n_cells, int in_channels) {
  Architecture a;
  a.in_channels = in_channels;
  a.height = 2 * n_cells;
  a.width = 2 * n_cells;
  a.input_scale = 2.0 * n_cells;
  return a;
}

void Architecture::validate() const {
  if (in_channels < 1 || classes < 2) throw ShapeError("architecture needs >= 1 input channel and >= 2 classes");
  if (kernels != kKernelSizes) throw ShapeError("convolution kernels must be 4, 3, 3");
  for (int w : widths) {
    if (w < 1) throw ShapeError("convolution widths must be positive");
  }
  if (out_height(kConvLayers - 1) < 1 || out_width(kConvLayers - 1) < 1) {
    throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is too small for three valid convolutions");
  }
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw ShapeError("input scale must be positive");
}

int Architecture::out_height(int layer) const {
  int h = height;
  for (int l = 0; l <= layer; ++l) h -= kernels[static_cast<std::size_t>(l)] - 1;
  return h;
}

int Architecture::out_width(int layer) const {
  int w = width;
  for (int l = 0; l <= layer; ++l) w -= kernels[static_cast<std::size_t>(l)] - 1;
  return w;
}

std::size_t Architecture::parameter_count() const { return Parameters::zeros(*this).size(); }

Parameters Parameters::zeros(const Architecture& arch) {
  Parameters p;
  for (int l = 0; l < kConvLayers; ++l) {
    auto& c = p.convs[static_cast<std::size_t>(l)];
    c.in = arch.layer_in_channels(l);
    c.out = arch.widths[static_cast<std::size_t>(l)];
    c.kernel = arch.kernels[static_cast<std::size_t>(l)];
    c.weight.assign(static_cast<std::size_t>(c.out * c.in * c.kernel * c.kernel), 0.0);
    c.bias.assign(static_cast<std::size_t>(c.out), 0.0);
  }
  p.head.in = arch.widths.back();
  p.head.out = arch.classes;
  p.head.weight.assign(static_cast<std::size_t>(p.head.in * p.head.out), 0.0);
  p.head.bias.assign(static_cast<std::size_t>(p.head.out), 0.0);
  return p;
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for_each([&](const std::vector<double>& t, bool) { n += t.size(); });
  return n;
}

void Parameters::set_zero() {
  for_each([](std::vector<double>& t, bool) { std::fill(t.begin(), t.end(), 0.0); });
}

CnnModel init_model(const Architecture& arch, std::uint64_t seed) {
  arch.validate();
  CnnModel m;
  m.arch = arch;
  m.seed = seed;
  m.params = Parameters::zeros(arch);
  Pcg32 rng(seed);
  for (auto& c : m.params.convs) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.in * c.kernel * c.kernel));
    for (auto& x : c.weight) x = rng.uniform(-bound, bound);
    for (auto& x : c.bias) x = rng.uniform(-bound, bound);
  }
  const double bound = 1.0 / std::sqrt(static_cast<double>(m.params.head.in));
  for (auto& x : m.params.head.weight) x = rng.uniform(-bound, bound);
  for (auto& x : m.params.head.bias) x = rng.uniform(-bound, bound);
  return m;
}

SampleTape forward_sample(const CnnModel& model, const Image& input) {
  check_input(model.arch, input);
  SampleTape t;
  t.input = input;
  if (model.arch.input_scale != 1.0) {
    for (auto& x : t.input.data) x *= model.arch.input_scale;
  }
  const Image* prev = &t.input;
  for (int l = 0; l < kConvLayers; ++l) {
    conv_forward(model.params.convs[static_cast<std::size_t>(l)], *prev, t.activations[static_cast<std::size_t>(l)]);
    prev = &t.activations[static_cast<std::size_t>(l)];
  }
  gap_and_head(model, *prev, t.gap, t.logits);
  const double peak = *std::max_element(t.logits.begin(), t.logits.end());
  t.probs.resize(t.logits.size());
  double z = 0.0;
  for (std::size_t c = 0; c < t.logits.size(); ++c) {
    t.probs[c] = std::exp(t.logits[c] - peak);
    z += t.probs[c];
  }
  for (auto& p : t.probs) p /= z;
  return t;
}

ForwardResult forward(const CnnModel& model, std::span<const Image> batch) {
  ForwardResult r;
  const auto n = static_cast<Eigen::Index>(batch.size());
  r.logits.resize(n, model.arch.classes);
  r.probs.resize(n, model.arch.classes);
  r.tape.reserve(batch.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    r.tape.push_back(forward_sample(model, batch[static_cast<std::size_t>(i)]));
    for (int c = 0; c < model.arch.classes; ++c) {
      r.logits(i, c) = r.tape.back().logits[static_cast<std::size_t>(c)];
      r.probs(i, c) = r.tape.back().probs[static_cast<std::size_t>(c)];
    }
  }
  return r;
}

std::vector<double> logits_from_activation(const CnnModel& model, int layer, const Image& activation) {
  if (layer < 0 || layer >= kConvLayers) throw RangeError("layer out of range");
  if (activation.channels != model.arch.widths[static_cast<std::size_t>(layer)] ||
      activation.height != model.arch.out_height(layer) || activation.width != model.arch.out_width(layer)) {
    throw ShapeError("activation shape does not match the layer");
  }
  Image cur = activation;
  for (int l = layer + 1; l < kConvLayers; ++l) {
    Image next;
    conv_forward(model.params.convs[static_cast<std::size_t>(l)], cur, next);
    cur = std::move(next);
  }
  std::vector<double> gap;
  std::vector<double> logits;
  gap_and_head(model, cur, gap, logits);
  return logits;
}

int predict(const CnnModel& model, const Image& input) {
  const SampleTape t = forward_sample(model, input);
  return static_cast<int>(std::max_element(t.logits.begin(), t.logits.end()) - t.logits.begin());
}

std::array<Image, kConvLayers> activation_gradients(const CnnModel& model, const SampleTape& tape,
                                                    std::span<const double> upstream) {
  if (upstream.size() != static_cast<std::size_t>(model.arch.classes)) throw ShapeError("upstream gradient size");
  std::array<Image, kConvLayers> out;
  backprop(model, tape, upstream, nullptr, &out);
  return out;
}

LossAndGrads loss_and_grads(const CnnModel& model, std::span<const Image> batch, std::span<const int> labels,
                            double weight_decay) {
  if (batch.size() != labels.size()) throw ShapeError("batch and label counts differ");
  if (batch.empty()) throw ShapeError("empty batch");
  LossAndGrads out;
  out.grads = Parameters::zeros(model.arch);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> upstream(static_cast<std::size_t>(model.arch.classes));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const int label = labels[i];
    if (label < 0 || label >= model.arch.classes) throw RangeError("label outside class range");
    const SampleTape tape = forward_sample(model, batch[i]);
    const double p = tape.probs[static_cast<std::size_t>(label)];
    out.loss += -std::log(std::max(p, kProbabilityFloor)) * inv_n;
    const auto best = std::max_element(tape.logits.begin(), tape.logits.end()) - tape.logits.begin();
    if (best == label) ++out.correct;
    for (std::size_t c = 0; c < upstream.size(); ++c) {
      upstream[c] = (tape.probs[c] - (static_cast<int>(c) == label ? 1.0 : 0.0)) * inv_n;
    }
    backprop(model, tape, upstream, &out.grads, nullptr);
  }
  if (weight_decay != 0.0) {
    auto src = model.params.convs.begin();
    for (auto& g : out.grads.convs) {
      for (std::size_t j = 0; j < g.weight.size(); ++j) g.weight[j] += weight_decay * src->weight[j];
      ++src;
    }
    for (std::size_t j = 0; j < out.grads.head.weight.size(); ++j) {
      out.grads.head.weight[j] += weight_decay * model.params.head.weight[j];
    }
  }
  return out;
}

Evaluation evaluate(const CnnModel& model, std::span<const Image> inputs, std::span<const int> labels,
                    unsigned threads) {
  if (inputs.size() != labels.size()) throw ShapeError("input and label counts differ");
  std::vector<double> losses(inputs.size());
  std::vector<int> hits(inputs.size());
  parallel_for(inputs.size(), threads, [&](std::size_t i) {
    const SampleTape t = forward_sample(model, inputs[i]);
    const int label = labels[i];
    losses[i] = -std::log(std::max(t.probs[static_cast<std::size_t>(label)], kProbabilityFloor));
    hits[i] = (std::max_element(t.logits.begin(), t.logits.end()) - t.logits.begin()) == label ? 1 : 0;
  });
  Evaluation e;
  e.count = inputs.size();
  if (inputs.empty()) return e;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    loss += losses[i];
    correct += static_cast<std::size_t>(hits[i]);
  }
  e.loss = loss / static_cast<double>(inputs.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(inputs.size());
  return e;
}

}  // namespace sshlab
