#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sshlab/cnn.hpp"
#include "sshlab/dataset.hpp"

namespace sshlab {

struct TrainConfig {
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 64;
  int max_epochs = 500;
  int patience = 10;
  int warmup_epochs = 50;
  std::uint64_t seed = 0;

  // Hyperparameters as published for the original study: lr 1e-4,
  // momentum 0.1, weight decay 0.1.
  static TrainConfig published();
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  CnnModel model;  // parameters of the best-validation-loss epoch
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  bool early_stopped = false;
};

struct LabeledImages {
  std::vector<Image> inputs;
  std::vector<int> labels;
  [[nodiscard]] std::size_t size() const noexcept { return inputs.size(); }
};

LabeledImages to_images(const Dataset& dataset);

// One SGD step with momentum: buffer = momentum * buffer + grad, param -= lr * buffer.
void sgd_step(Parameters& params, Parameters& buffer, const Parameters& grads, double lr, double momentum);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Minibatch SGD over train with a per-epoch seeded shuffle. Stops after
// `patience` consecutive strict rises of the validation loss once the epoch
// exceeds warmup_epochs. Throws DivergenceError on a non-finite loss.
TrainResult train(const CnnModel& initial, const LabeledImages& train_set, const LabeledImages& validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {}, unsigned eval_threads = 1);

std::string history_to_csv(const std::vector<EpochRecord>& history);

}  // namespace sshlab
