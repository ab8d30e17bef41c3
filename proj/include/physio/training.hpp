#pragma once

#include "physio/dataset.hpp"
#include "physio/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace physio {

struct LossValue {
  double total = 0.0;
  double ce = 0.0;   // mean cross-entropy over labelled windows
  double reg = 0.0;  // lambda * mean (alpha - 1)^2 over indicators and windows
  std::size_t labeled = 0;
};

// labels has one entry per window; kIgnoreLabel windows do not enter the
// cross-entropy term (they still enter the regulariser).
LossValue loss(const ForwardTrace& trace, std::span<const int> labels, double lambda);

// Exact gradient of loss() with respect to every parameter, returned in a
// model-shaped container (see Model::zeros_like).
Model backward(const Model& model, const ForwardTrace& trace, std::span<const int> labels, double lambda);

struct RmsProp {
  double decay = 0.9;
  double eps = 1e-8;
  std::vector<Vector> v;  // one accumulator per parameter tensor

  // v <- decay v + (1 - decay) g^2;  p <- p - lr g / sqrt(v + eps)
  void step(Model& params, Model& grads, double lr);
};

struct TrainConfig {
  std::size_t max_epochs = 150;
  double lr = 1e-4;
  double lambda = 0.01;
  std::size_t step_epochs = 100;
  double step_gamma = 0.5;
  std::size_t patience = 15;
  double min_delta = 1e-4;
  bool early_stopping = true;
  bool shuffle_each_epoch = false;
  std::uint64_t seed = 7;
  double rms_decay = 0.9;
  double rms_eps = 1e-8;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;  // mean over subject steps, train mode, before each step
  double train_ce = 0.0;
  double train_reg = 0.0;
  double val_loss = 0.0;  // pooled cross-entropy on validation windows, subject-batch BN
  double val_acc = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;  // "max_epochs" | "early_stopping"
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<std::string> subject_order;
  double wall_time_s = 0.0;
};

struct TrainResult {
  Model model;  // parameters of the best epoch
  TrainReport report;
};

// Full-length label vector with only the listed windows labelled.
std::vector<int> masked_labels(const LabeledWindows& subject, const std::vector<std::size_t>& windows);

struct PooledEval {
  double ce = 0.0;  // mean over all listed windows of all subjects
  double acc = 0.0;
  std::size_t windows = 0;
};
// Forward over each subject's full sequence, scored on the listed windows.
PooledEval pooled_eval(const Model& model, const Dataset& ds, const std::vector<std::vector<std::size_t>>& windows,
                       Mode mode = Mode::Subject);

// Attribute vectors of the subjects that have training windows.
std::vector<Vector> training_attributes(const Dataset& ds, const Split& split);

// One forward/backward/RMSprop step per subject per epoch. The validation
// side of the split drives early stopping; when it is empty the training
// windows are used instead. Throws TrainingFault on non-finite values.
TrainResult train(Model model, const Dataset& ds, const Split& split, const TrainConfig& cfg);

}  // namespace physio
