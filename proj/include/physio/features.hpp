#pragma once

#include "physio/common.hpp"
#include "physio/signal_prep.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace physio {

// Population statistics (variance divides by N).
struct BasicStats {
  double mean = 0.0;
  double std = 0.0;
  double max = 0.0;
  double min = 0.0;
};

BasicStats basic_stats(std::span<const double> samples);

struct FeatureConfig {
  // Beat detection for ECG/BVP: local maxima above mean + k * std, with a
  // refractory period in which only the tallest candidate survives.
  double peak_threshold_std = 1.5;
  double refractory_s = 0.3;
  // BVP "peak frequency": beats per second, or the dominant spectral
  // frequency in [0.5, 4] Hz when set.
  bool bvp_dominant_frequency = false;
  // EDA decomposition: tonic = low-pass, phasic = residual.
  double eda_tonic_cutoff_hz = 0.05;
  int eda_tonic_order = 2;
  double scr_threshold = 0.01;
  double scr_min_separation_s = 1.0;
};

// One indicator's features over all windows of a subject.
struct IndicatorFeatures {
  Indicator indicator = Indicator::ACC;
  std::vector<std::string> names;
  Matrix values;                     // windows x features
  std::vector<std::uint8_t> quality; // 1 = window was zero-filled (too few events)
};

// Feature-name catalog of one indicator, in normative column order.
std::vector<std::string> indicator_feature_names(Indicator indicator);

// --- per-window primitives ---------------------------------------------

std::vector<std::size_t> detect_peaks(std::span<const double> x, double rate_hz,
                                      double threshold_std, double refractory_s);
double sdnn(std::span<const double> rr_ms);
double rmssd(std::span<const double> rr_ms);
// Least-squares slope of x against t = i / rate_hz, in units per second.
double linear_slope(std::span<const double> x, double rate_hz);

struct HrvResult {
  std::vector<std::size_t> peaks;
  std::vector<double> rr_ms;
  double sdnn_ms = 0.0;
  double rmssd_ms = 0.0;
  double mean_rr_ms = 0.0;
  double peak_rate_hz = 0.0;
  bool ok = false;  // >= 3 beats
};
HrvResult analyze_beats(std::span<const double> x, double rate_hz, const FeatureConfig& cfg);

struct EdaDecomposition {
  std::vector<double> tonic;
  std::vector<double> phasic;
  std::vector<std::size_t> scr_peaks;
  std::vector<double> scr_amplitudes;
};
EdaDecomposition decompose_eda(std::span<const double> x, double rate_hz, const FeatureConfig& cfg);

// Breath onsets: upward zero crossings of the mean-centred signal.
std::vector<double> breath_onsets_s(std::span<const double> x, double rate_hz);

// --- per-indicator extraction over windows --------------------------------

IndicatorFeatures acc_features(const std::vector<Window>& x, const std::vector<Window>& y,
                               const std::vector<Window>& z);
IndicatorFeatures eda_features(const std::vector<Window>& windows, const FeatureConfig& cfg);
IndicatorFeatures hrv_features(const std::vector<Window>& windows, Indicator source,
                               const FeatureConfig& cfg);
IndicatorFeatures temp_features(const std::vector<Window>& windows);
IndicatorFeatures emg_features(const std::vector<Window>& windows);
IndicatorFeatures resp_features(const std::vector<Window>& windows);

// --- attributes -------------------------------------------------------------

struct RawAttributes {
  double age = 0.0;
  std::string gender;  // male | female
  double height_cm = 0.0;
  double weight_kg = 0.0;
  std::string smoker;           // yes | no
  std::string exercised_today;  // yes | no
};

// Continuous values raw; categoricals one-hot. k = 9.
struct AttributeVector {
  std::vector<std::string> names;
  Vector values;
};

AttributeVector encode_attributes(const RawAttributes& raw);
std::vector<std::string> attribute_names();

// --- assembly ------------------------------------------------------------------

// Global column layout: attributes first, then indicators in model order.
struct FeatureCatalog {
  std::vector<std::string> attribute_names;
  std::vector<Indicator> indicators;
  std::vector<std::vector<std::string>> feature_names;  // per indicator

  std::size_t k() const { return attribute_names.size(); }
  std::size_t m() const;
  std::size_t m_of(std::size_t j) const { return feature_names.at(j).size(); }
  // Column of indicator j's first feature within the fused PF row.
  std::size_t pf_offset(std::size_t j) const;
  std::vector<std::string> pf_names() const;
  // Attribute names followed by indicator j's feature names (the gamma layout).
  std::vector<std::string> gamma_names(std::size_t j) const;
  std::size_t index_of(Indicator ind) const;
  std::uint64_t hash() const;

  bool operator==(const FeatureCatalog&) const = default;
};

struct SubjectFeatures {
  std::string subject_id;
  Vector attributes;                            // k
  std::vector<Matrix> blocks;                   // per indicator: windows x m_j
  Matrix pf;                                    // windows x (k + m)
  std::vector<std::vector<std::uint8_t>> quality;  // per indicator, per window

  std::size_t window_count() const { return static_cast<std::size_t>(pf.rows()); }
  // Keep only the listed windows (in the given order).
  SubjectFeatures select_windows(const std::vector<std::size_t>& rows) const;
};

// PF = A (+) concat_j B_j per window. Throws AlignmentError when indicator
// window counts differ.
SubjectFeatures assemble(const std::string& subject_id, const AttributeVector& attributes,
                         const std::vector<IndicatorFeatures>& indicators,
                         FeatureCatalog* catalog_out = nullptr);

// Rebuilds pf from attributes and blocks.
void rebuild_pf(SubjectFeatures& f);

}  // namespace physio
