#pragma once

#include "physio/common.hpp"

#include <complex>
#include <span>
#include <string>
#include <vector>

namespace physio {

// One channel's sample stream. Sample i is taken at start_time_s + i / rate_hz.
struct RawSignal {
  std::string subject_id;
  Channel channel = Channel::EDA;
  double rate_hz = 1.0;
  std::vector<double> samples;
  double start_time_s = 0.0;

  double duration_s() const { return static_cast<double>(samples.size()) / rate_hz; }
  // Throws PreprocessError on non-positive rate, empty or non-finite samples.
  void validate() const;
};

struct FilterSpec {
  int order = 4;
  double cutoff_hz = 1.0;
};

// Direct-form II transposed second-order section, a0 == 1.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

// Digital Butterworth low-pass as a cascade of second-order sections
// (one first-order section with b2 = a2 = 0 when the order is odd).
struct FilterCoefficients {
  std::vector<Biquad> sections;
  int order = 0;
  double cutoff_hz = 0.0;
  double rate_hz = 0.0;

  std::complex<double> response(double freq_hz) const;
  double gain(double freq_hz) const { return std::abs(response(freq_hz)); }
};

// Bilinear transform with frequency prewarping, so the digital gain at the
// cutoff is exactly 1/sqrt(2). Every section is normalised to unit DC gain.
FilterCoefficients design_lowpass(const FilterSpec& spec, double rate_hz);

// Analog Butterworth magnitude 1/sqrt(1 + (f/fc)^(2n)).
double butterworth_magnitude(double freq_hz, double cutoff_hz, int order);

// Single causal pass with zero initial state.
std::vector<double> lfilter(const FilterCoefficients& coeffs, std::span<const double> x);

// Forward-backward (zero-phase) filtering with odd-extension padding and
// steady-state initial conditions. Requires x.size() > 3 * order.
std::vector<double> filtfilt(const FilterCoefficients& coeffs, std::span<const double> x);

RawSignal apply_filter(const RawSignal& signal, const FilterCoefficients& coeffs);

// Default low-pass per channel: EDA 1 Hz; EMG min(250 Hz, 0.45 * Nyquist);
// everything else 0.4 * Nyquist. Order 4.
FilterSpec default_filter_spec(Channel channel, double rate_hz);

struct WindowPlan {
  double window_len_s = 30.0;

  // xi = floor(L / T).
  std::size_t window_count(double duration_s) const;
  // First sample index of window q (0-based) for a stream at rate_hz.
  std::size_t window_begin(std::size_t q, double rate_hz) const;
};

struct Window {
  std::size_t index = 0;
  double start_s = 0.0;  // relative to the stream start
  double rate_hz = 1.0;
  std::vector<double> samples;
};

// Non-overlapping windows [qT, (q+1)T) relative to the stream start; the
// trailing remainder is dropped. max_windows caps the count (used to align
// streams of one subject). Throws PreprocessError when L < T.
std::vector<Window> segment(const RawSignal& signal, const WindowPlan& plan,
                            std::size_t max_windows = static_cast<std::size_t>(-1));

// Label stream sampled at a constant rate, values in {0,1,2}.
struct LabelStream {
  double rate_hz = 1.0;
  double start_time_s = 0.0;
  std::vector<int> labels;

  double duration_s() const { return static_cast<double>(labels.size()) / rate_hz; }
};

// Majority label of each window (ties to the lower class); windows without
// any valid label get kIgnoreLabel.
std::vector<int> window_labels(const LabelStream& stream, const WindowPlan& plan,
                               std::size_t window_count);

}  // namespace physio
