#pragma once

#include "physio/common.hpp"
#include "physio/features.hpp"
#include "physio/signal_prep.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace physio {

// One subject's raw recording in the neutral columnar layout:
//   <root>/<subject>/<INDICATOR>.csv   time_s,value   (ACC: time_s,x,y,z)
//   <root>/<subject>/attributes.csv    age,gender,height_cm,weight_kg,smoker,exercised_today
//   <root>/<subject>/labels.csv        time_s,label   (label in {0,1,2})
struct SubjectRecording {
  std::string id;
  RawAttributes attributes;
  std::vector<RawSignal> signals;
  LabelStream labels;

  const RawSignal& signal(Channel c) const;
};

SubjectRecording read_recording(const std::filesystem::path& subject_dir, Device device);
void write_recording(const std::filesystem::path& root, const SubjectRecording& rec, Device device);
// Subject directories under root, sorted by name.
std::vector<std::string> list_subjects(const std::filesystem::path& root);

struct PrepConfig {
  WindowPlan plan;
  FeatureConfig features;
  int filter_order = 4;
  // Optional per-indicator cutoff overrides (Hz); ACC applies to all axes.
  std::map<Indicator, double> cutoff_hz;
  // Model indicator order; empty means the device default.
  std::vector<Indicator> indicator_order;

  FilterSpec filter_for(Channel c, double rate_hz) const;
};

struct LabeledWindows {
  std::string subject_id;
  SubjectFeatures features;
  std::vector<int> labels;                // per kept window, in {0,1,2}
  std::vector<std::size_t> window_index;  // original window q of each kept row
};

struct Dataset {
  Device device = Device::Wrist;
  FeatureCatalog catalog;
  WindowPlan plan;
  std::vector<LabeledWindows> subjects;

  std::size_t total_windows() const;
};

// Filter, segment, extract and assemble one subject. Windows without a
// study label are dropped.
LabeledWindows preprocess_subject(const SubjectRecording& rec, Device device, const PrepConfig& cfg,
                                  FeatureCatalog* catalog_out = nullptr);

Dataset build_dataset(const std::vector<SubjectRecording>& recordings, Device device, const PrepConfig& cfg,
                      int jobs = 1);

// Reads every subject under root and preprocesses it.
Dataset load(const std::filesystem::path& root, Device device, const PrepConfig& cfg, int jobs = 1);

// Feature-level persistence: catalog.json, manifest.json, <subject>.csv
// (window,label,<catalog names>) and <subject>_quality.csv.
void save_features(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_features(const std::filesystem::path& dir);

// Synthetic desk-scale recordings with planted physiology. Every subject
// follows the same block protocol: baseline, condition, baseline, condition.
// One condition signature raises EDA tonic level, SCR rate and heart rate and
// cools skin; the other raises movement and moderately raises EDA and heart
// rate. Males show the first signature under stress and the second under
// amusement, females the reverse. Subjects come in male/female pairs that run
// opposite condition orders from one shared physiology stream, so partners
// record the same signals under conflicting labels and only the attributes
// separate them. Condition intensity per window is stimulus-locked (shared by
// everyone); a subject-level offset and sensor noise come on top.
struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t subjects = 6;
  std::size_t windows = 60;
  Device device = Device::Wrist;
  double window_len_s = 30.0;
  // Window-to-window variability of the planted state effects.
  double state_jitter = 0.3;
};

std::vector<SubjectRecording> synthesize_recordings(const SynthConfig& cfg);
Dataset synthesize(const SynthConfig& cfg, const PrepConfig& prep);
// Uses the default PrepConfig with the window length taken from cfg.
Dataset synthesize(const SynthConfig& cfg);

// Windows of each subject used for training and for testing. Vectors are
// indexed like Dataset::subjects; an empty list means the subject does not
// take part in that side.
struct Split {
  std::vector<std::vector<std::size_t>> train;
  std::vector<std::vector<std::size_t>> test;

  std::size_t train_count() const;
  std::size_t test_count() const;
};

struct SplitPolicy {
  enum class Kind { Stratified, LeaveOneSubjectOut };
  Kind kind = Kind::Stratified;
  double train_fraction = 0.8;
  std::size_t held_out_subject = 0;  // LeaveOneSubjectOut
  std::uint64_t seed = 7;
};

Split split(const Dataset& ds, const SplitPolicy& policy);
std::vector<Split> leave_one_subject_out(const Dataset& ds);

}  // namespace physio
