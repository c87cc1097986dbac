#include "sshlab/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sshlab/errors.hpp"
#include "sshlab/rng.hpp"

namespace sshlab {

TrainConfig TrainConfig::published() {
  TrainConfig c;
  c.lr = 1e-4;
  c.momentum = 0.1;
  c.weight_decay = 0.1;
  return c;
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw InvalidArgument("lr, momentum and weight decay must be non-negative");
  }
  if (batch_size < 1) throw InvalidArgument("batch size must be positive");
  if (max_epochs < 0 || patience < 1 || warmup_epochs < 0) throw InvalidArgument("invalid epoch limits");
}

LabeledImages to_images(const Dataset& dataset) {
  LabeledImages out;
  out.inputs.reserve(dataset.size());
  out.labels.reserve(dataset.size());
  for (const auto& s : dataset.samples) {
    out.inputs.push_back(image_from_matrix(s.pixels));
    out.labels.push_back(s.label);
  }
  return out;
}

void sgd_step(Parameters& params, Parameters& buffer, const Parameters& grads, double lr, double momentum) {
  std::vector<std::vector<double>*> p;
  std::vector<std::vector<double>*> b;
  std::vector<const std::vector<double>*> g;
  params.for_each([&](std::vector<double>& t, bool) { p.push_back(&t); });
  buffer.for_each([&](std::vector<double>& t, bool) { b.push_back(&t); });
  grads.for_each([&](const std::vector<double>& t, bool) { g.push_back(&t); });
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& pt = *p[i];
    auto& bt = *b[i];
    const auto& gt = *g[i];
    for (std::size_t j = 0; j < pt.size(); ++j) {
      bt[j] = momentum * bt[j] + gt[j];
      pt[j] -= lr * bt[j];
    }
  }
}

TrainResult train(const CnnModel& initial, const LabeledImages& train_set, const LabeledImages& validation_set,
                  const TrainConfig& config, const EpochCallback& on_epoch, unsigned eval_threads) {
  config.validate();
  if (train_set.size() == 0 || validation_set.size() == 0) throw InvalidArgument("training needs nonempty data sets");

  TrainResult result;
  result.model = initial;
  CnnModel current = initial;
  Parameters buffer = Parameters::zeros(initial.arch);

  double best_val = std::numeric_limits<double>::infinity();
  double prev_val = std::numeric_limits<double>::infinity();
  int rises = 0;

  std::vector<std::size_t> order(train_set.size());
  std::vector<Image> batch;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Pcg32 rng(mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    shuffle(std::span<std::size_t>(order), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch.push_back(train_set.inputs[order[i]]);
        labels.push_back(train_set.labels[order[i]]);
      }
      const LossAndGrads lg = loss_and_grads(current, batch, labels, config.weight_decay);
      if (!std::isfinite(lg.loss)) {
        throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += lg.loss * static_cast<double>(stop - start);
      correct += static_cast<std::size_t>(lg.correct);
      sgd_step(current.params, buffer, lg.grads, config.lr, config.momentum);
    }

    const Evaluation val = evaluate(current, validation_set.inputs, validation_set.labels, eval_threads);
    if (!std::isfinite(val.loss)) throw DivergenceError("non-finite validation loss at epoch " + std::to_string(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (val.loss < best_val) {
      best_val = val.loss;
      result.best_epoch = epoch;
      result.model = current;
    }
    rises = val.loss > prev_val ? rises + 1 : 0;
    prev_val = val.loss;
    if (rises >= config.patience && epoch > config.warmup_epochs) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

std::string history_to_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.train_loss << ',' << r.train_acc << ',' << r.val_loss << ',' << r.val_acc << '\n';
  }
  return os.str();
}

}  // namespace sshlab
