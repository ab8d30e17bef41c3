#pragma once

#include "physio/dataset.hpp"
#include "physio/model.hpp"
#include "physio/training.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace physio {

// Raised when a metric is requested over zero windows.
class UndefinedMetricError : public InputError {
 public:
  using InputError::InputError;
};

// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t& at(int truth, int pred) { return counts[truth][pred]; }
  std::size_t at(int truth, int pred) const { return counts[truth][pred]; }
  std::size_t total() const;
  std::size_t correct() const;
};

// Windows labelled kIgnoreLabel are skipped.
ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels);

double accuracy(const ConfusionMatrix& cm);

struct F1Scores {
  std::array<double, kNumClasses> precision{}, recall{}, f1{};  // 0/0 read as 0
  double macro = 0.0;
  double weighted = 0.0;  // by class support
};
F1Scores f1(const ConfusionMatrix& cm);

// Mean squared difference of class indices.
double mse(std::span<const int> preds, std::span<const int> labels);

struct MetricsReport {
  ConfusionMatrix cm;
  double acc = 0.0;
  std::array<double, kNumClasses> f1_per_class{};
  double f1_macro = 0.0;
  double f1_weighted = 0.0;
  double mse = 0.0;
  std::size_t n = 0;
};
MetricsReport metrics(std::span<const int> preds, std::span<const int> labels);
std::string metrics_json(const MetricsReport& r);

// Predictions of the model on the listed windows of every subject, pooled.
struct PooledPredictions {
  std::vector<int> preds, labels;
  std::vector<std::string> subjects;  // per entry
  std::vector<std::size_t> windows;   // per entry
};
PooledPredictions predict(const Model& model, const Dataset& ds, const std::vector<std::vector<std::size_t>>& windows,
                          Mode mode = Mode::Subject);
MetricsReport evaluate(const Model& model, const Dataset& ds, const std::vector<std::vector<std::size_t>>& windows,
                       Mode mode = Mode::Subject);

// --- studies -----------------------------------------------------------------

enum class StudyKind { WindowSweep, WidthSweep, NoEmbedding, NoAttributes };
std::string_view to_string(StudyKind k);
StudyKind parse_study(std::string_view s);

struct StudyConfig {
  Device device = Device::Wrist;
  PrepConfig prep;
  ModelConfig model;
  TrainConfig train;
  SplitPolicy split;
  std::vector<double> windows_s = {30.0, 60.0, 90.0, 120.0};
  std::vector<std::size_t> widths = {50, 100, 200, 500};
  int jobs = 1;
};

struct StudyRow {
  std::string variant;
  double window_s = 0.0;
  std::size_t windows = 0;  // total windows in the dataset
  std::size_t contrib_hidden = 0, affect_hidden = 0;
  bool use_embedding = true, use_attributes = true;
  MetricsReport test;
  std::size_t epochs = 0, best_epoch = 0;
  std::string stop_reason;
  double mean_alpha = 0.0;  // over all test windows and indicators
};

struct StudyReport {
  StudyKind kind = StudyKind::WindowSweep;
  std::vector<StudyRow> rows;
};

// Ablation studies train the base configuration and the ablated one.
StudyReport run_study(StudyKind kind, const std::vector<SubjectRecording>& recordings, const StudyConfig& cfg);

// study_<kind>.csv; the width sweep also writes an accuracy matrix.
void write_study(const StudyReport& report, const std::filesystem::path& dir);

}  // namespace physio
