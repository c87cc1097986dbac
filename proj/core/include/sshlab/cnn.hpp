#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace sshlab {

// Channel-major (C x H x W) image, row-major inside each channel.
struct Image {
  int channels = 1;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Image() = default;
  Image(int c, int h, int w) : channels(c), height(h), width(w), data(static_cast<std::size_t>(c * h * w), 0.0) {}

  [[nodiscard]] double& at(int c, int y, int x) { return data[static_cast<std::size_t>((c * height + y) * width + x)]; }
  [[nodiscard]] double at(int c, int y, int x) const {
    return data[static_cast<std::size_t>((c * height + y) * width + x)];
  }
  [[nodiscard]] std::size_t plane() const noexcept { return static_cast<std::size_t>(height * width); }
};

// Single-channel image from a pixel matrix (row r of the matrix is image row r).
Image image_from_matrix(const Eigen::MatrixXd& pixels);

inline constexpr int kConvLayers = 3;
inline constexpr std::array<int, kConvLayers> kKernelSizes{4, 3, 3};

// Three valid (unpadded, stride 1) rectified convolutions with kernels
// 4, 3, 3, global average pooling, and a linear layer to the class logits.
// Inputs are multiplied by input_scale before the first convolution.
struct Architecture {
  int in_channels = 1;
  int height = 32;
  int width = 32;
  std::array<int, kConvLayers> widths{4, 8, 8};
  std::array<int, kConvLayers> kernels = kKernelSizes;
  int classes = 2;
  double input_scale = 1.0;

  static Architecture for_cells(int n_cells, int in_channels = 1);

  // Throws ShapeError if a layer shrinks the map below 1x1 or the kernel
  // layout differs from 4, 3, 3.
  void validate() const;
  [[nodiscard]] int out_height(int layer) const;
  [[nodiscard]] int out_width(int layer) const;
  [[nodiscard]] int layer_in_channels(int layer) const { return layer == 0 ? in_channels : widths[static_cast<std::size_t>(layer - 1)]; }
  [[nodiscard]] std::size_t parameter_count() const;
  bool operator==(const Architecture&) const = default;
};

struct ConvLayer {
  int in = 0;
  int out = 0;
  int kernel = 0;
  std::vector<double> weight;  // out x in x kernel x kernel
  std::vector<double> bias;    // out

  bool operator==(const ConvLayer&) const = default;
};

struct LinearLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weight;  // out x in
  std::vector<double> bias;    // out

  bool operator==(const LinearLayer&) const = default;
};

// Trainable tensors; also used as the gradient container.
struct Parameters {
  std::array<ConvLayer, kConvLayers> convs;
  LinearLayer head;

  static Parameters zeros(const Architecture& arch);

  // Visits every tensor in declaration order: conv1.w, conv1.b, ..., head.w,
  // head.b. The flag tells weights from biases.
  template <class Fn>
  void for_each(Fn&& fn) {
    for (auto& c : convs) {
      fn(c.weight, true);
      fn(c.bias, false);
    }
    fn(head.weight, true);
    fn(head.bias, false);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (const auto& c : convs) {
      fn(c.weight, true);
      fn(c.bias, false);
    }
    fn(head.weight, true);
    fn(head.bias, false);
  }

  [[nodiscard]] std::size_t size() const;
  void set_zero();
  bool operator==(const Parameters&) const = default;
};

struct CnnModel {
  Architecture arch;
  Parameters params;
  std::uint64_t seed = 0;

  bool operator==(const CnnModel&) const = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias, drawn
// in declaration order from Pcg32(seed).
CnnModel init_model(const Architecture& arch, std::uint64_t seed);

// Intermediate values of one forward pass, kept for backprop, CAM and
// activation capture. activations[l] is the rectified output of conv l.
struct SampleTape {
  Image input;  // after input_scale
  std::array<Image, kConvLayers> activations;
  std::vector<double> gap;
  std::vector<double> logits;
  std::vector<double> probs;
};

struct ForwardResult {
  Eigen::MatrixXd logits;  // batch x classes
  Eigen::MatrixXd probs;   // batch x classes
  std::vector<SampleTape> tape;
};

SampleTape forward_sample(const CnnModel& model, const Image& input);
ForwardResult forward(const CnnModel& model, std::span<const Image> batch);
// Logits obtained by feeding a given (rectified) activation of `layer`
// through the remaining layers.
std::vector<double> logits_from_activation(const CnnModel& model, int layer, const Image& activation);
// Predicted class (argmax, lowest index on ties) of one input.
int predict(const CnnModel& model, const Image& input);

// Gradients of chosen scalar logit combinations w.r.t. every activation,
// for Grad-CAM. upstream is d(objective)/d(logits).
std::array<Image, kConvLayers> activation_gradients(const CnnModel& model, const SampleTape& tape,
                                                    std::span<const double> upstream);

// Probabilities below this are clamped before taking the logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossAndGrads {
  double loss = 0.0;
  Parameters grads;
  int correct = 0;
};

// Mean softmax cross-entropy against one-hot labels and its exact gradient;
// weight_decay * w is added to the gradient of every weight (not biases).
LossAndGrads loss_and_grads(const CnnModel& model, std::span<const Image> batch, std::span<const int> labels,
                            double weight_decay = 0.0);

// Mean cross-entropy and correct count without gradients.
struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};
Evaluation evaluate(const CnnModel& model, std::span<const Image> inputs, std::span<const int> labels,
                    unsigned threads = 1);

// Checkpoint layout: "SSHW", u16 version, architecture block, u64 seed,
// every tensor in declaration order as little-endian f64, CRC32 trailer.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const CnnModel& model);
CnnModel decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const CnnModel& model);
CnnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace sshlab
