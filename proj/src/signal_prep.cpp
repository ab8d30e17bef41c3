#include "physio/signal_prep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace physio {

void RawSignal::validate() const {
  const std::string where = "subject '" + subject_id + "', channel " + std::string(to_string(channel));
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw PreprocessError(where + ": sampling rate must be positive");
  }
  if (samples.empty()) throw PreprocessError(where + ": no samples");
  for (double v : samples) {
    if (!std::isfinite(v)) throw PreprocessError(where + ": non-finite sample");
  }
}

double butterworth_magnitude(double freq_hz, double cutoff_hz, int order) {
  return 1.0 / std::sqrt(1.0 + std::pow(freq_hz / cutoff_hz, 2.0 * order));
}

FilterCoefficients design_lowpass(const FilterSpec& spec, double rate_hz) {
  if (spec.order < 1 || spec.order > 8) {
    throw ConfigError("filter order must be in [1, 8], got " + std::to_string(spec.order));
  }
  const double nyquist = rate_hz / 2.0;
  if (!(spec.cutoff_hz > 0.0) || !(spec.cutoff_hz < nyquist)) {
    throw ConfigError("filter cutoff " + std::to_string(spec.cutoff_hz) +
                      " Hz must lie in (0, Nyquist = " + std::to_string(nyquist) + " Hz)");
  }

  FilterCoefficients out;
  out.order = spec.order;
  out.cutoff_hz = spec.cutoff_hz;
  out.rate_hz = rate_hz;

  const int n = spec.order;
  const double fs2 = 2.0 * rate_hz;
  const double warped = fs2 * std::tan(std::numbers::pi * spec.cutoff_hz / rate_hz);

  // Analog poles in the left half plane; pair k with its conjugate n-1-k.
  for (int k = 0; k < n / 2; ++k) {
    const double angle = std::numbers::pi * (2.0 * k + n + 1.0) / (2.0 * n);
    const std::complex<double> pole = warped * std::polar(1.0, angle);
    const std::complex<double> zp = (fs2 + pole) / (fs2 - pole);
    Biquad s;
    s.a1 = -2.0 * zp.real();
    s.a2 = std::norm(zp);
    const double g = (1.0 + s.a1 + s.a2) / 4.0;
    s.b0 = g;
    s.b1 = 2.0 * g;
    s.b2 = g;
    out.sections.push_back(s);
  }
  if (n % 2 == 1) {
    const double zp = (fs2 - warped) / (fs2 + warped);
    Biquad s;
    s.a1 = -zp;
    s.a2 = 0.0;
    const double g = (1.0 + s.a1) / 2.0;
    s.b0 = g;
    s.b1 = g;
    s.b2 = 0.0;
    out.sections.push_back(s);
  }
  return out;
}

std::complex<double> FilterCoefficients::response(double freq_hz) const {
  const double w = 2.0 * std::numbers::pi * freq_hz / rate_hz;
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h(1.0, 0.0);
  for (const auto& s : sections) {
    h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  }
  return h;
}

namespace {

struct SectionState {
  double s1 = 0.0, s2 = 0.0;
};

void run_cascade(const FilterCoefficients& c, std::vector<double>& x,
                 std::vector<SectionState> state) {
  for (std::size_t k = 0; k < c.sections.size(); ++k) {
    const Biquad& s = c.sections[k];
    double s1 = state[k].s1, s2 = state[k].s2;
    for (double& v : x) {
      const double in = v;
      const double y = s.b0 * in + s1;
      s1 = s.b1 * in - s.a1 * y + s2;
      s2 = s.b2 * in - s.a2 * y;
      v = y;
    }
  }
}

// Steady-state section states for a constant input level; every section has
// unit DC gain so the level is the same at each stage.
std::vector<SectionState> steady_state(const FilterCoefficients& c, double level) {
  std::vector<SectionState> st(c.sections.size());
  for (std::size_t k = 0; k < c.sections.size(); ++k) {
    const Biquad& s = c.sections[k];
    st[k].s2 = level * (s.b2 - s.a2);
    st[k].s1 = level * (s.b1 + s.b2 - s.a1 - s.a2);
  }
  return st;
}

}  // namespace

std::vector<double> lfilter(const FilterCoefficients& coeffs, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  run_cascade(coeffs, y, std::vector<SectionState>(coeffs.sections.size()));
  return y;
}

std::vector<double> filtfilt(const FilterCoefficients& coeffs, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n <= static_cast<std::size_t>(3 * coeffs.order)) {
    throw PreprocessError("signal of " + std::to_string(n) + " samples is too short for an order-" +
                          std::to_string(coeffs.order) + " zero-phase filter");
  }
  const std::size_t pad = std::min<std::size_t>(3 * (2 * coeffs.sections.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  run_cascade(coeffs, ext, steady_state(coeffs, ext.front()));
  std::reverse(ext.begin(), ext.end());
  run_cascade(coeffs, ext, steady_state(coeffs, ext.front()));
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + static_cast<std::ptrdiff_t>(pad),
                             ext.begin() + static_cast<std::ptrdiff_t>(pad + n));
}

RawSignal apply_filter(const RawSignal& signal, const FilterCoefficients& coeffs) {
  signal.validate();
  if (std::abs(signal.rate_hz - coeffs.rate_hz) > 1e-9 * signal.rate_hz) {
    throw PreprocessError("subject '" + signal.subject_id + "', channel " +
                          std::string(to_string(signal.channel)) +
                          ": filter designed for a different sampling rate");
  }
  RawSignal out = signal;
  try {
    out.samples = filtfilt(coeffs, signal.samples);
  } catch (const PreprocessError& e) {
    throw PreprocessError("subject '" + signal.subject_id + "', channel " +
                          std::string(to_string(signal.channel)) + ": " + e.what());
  }
  return out;
}

FilterSpec default_filter_spec(Channel channel, double rate_hz) {
  const double nyquist = rate_hz / 2.0;
  FilterSpec spec;
  spec.order = 4;
  switch (channel) {
    case Channel::EDA: spec.cutoff_hz = std::min(1.0, 0.4 * nyquist); break;
    case Channel::EMG: spec.cutoff_hz = std::min(250.0, 0.45 * nyquist); break;
    default: spec.cutoff_hz = 0.4 * nyquist; break;
  }
  return spec;
}

std::size_t WindowPlan::window_count(double duration_s) const {
  if (!(window_len_s > 0.0)) throw ConfigError("window length must be positive");
  if (duration_s <= 0.0) return 0;
  return static_cast<std::size_t>(std::floor(duration_s / window_len_s + 1e-9));
}

std::size_t WindowPlan::window_begin(std::size_t q, double rate_hz) const {
  const double pos = static_cast<double>(q) * window_len_s * rate_hz;
  return static_cast<std::size_t>(std::ceil(pos - 1e-9));
}

std::vector<Window> segment(const RawSignal& signal, const WindowPlan& plan,
                            std::size_t max_windows) {
  signal.validate();
  const std::size_t xi = std::min(plan.window_count(signal.duration_s()), max_windows);
  if (xi == 0) {
    throw PreprocessError("subject '" + signal.subject_id + "', channel " +
                          std::string(to_string(signal.channel)) + ": duration " +
                          std::to_string(signal.duration_s()) + " s is shorter than the " +
                          std::to_string(plan.window_len_s) + " s window");
  }
  std::vector<Window> out;
  out.reserve(xi);
  for (std::size_t q = 0; q < xi; ++q) {
    const std::size_t lo = plan.window_begin(q, signal.rate_hz);
    const std::size_t hi = std::min(plan.window_begin(q + 1, signal.rate_hz), signal.samples.size());
    Window w;
    w.index = q;
    w.start_s = static_cast<double>(q) * plan.window_len_s;
    w.rate_hz = signal.rate_hz;
    w.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(lo),
                     signal.samples.begin() + static_cast<std::ptrdiff_t>(hi));
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<int> window_labels(const LabelStream& stream, const WindowPlan& plan,
                               std::size_t window_count) {
  std::vector<int> out(window_count, kIgnoreLabel);
  for (std::size_t q = 0; q < window_count; ++q) {
    const std::size_t lo = plan.window_begin(q, stream.rate_hz);
    const std::size_t hi = std::min(plan.window_begin(q + 1, stream.rate_hz), stream.labels.size());
    std::array<std::size_t, kNumClasses> counts{};
    for (std::size_t i = lo; i < hi; ++i) {
      const int l = stream.labels[i];
      if (l >= 0 && l < kNumClasses) ++counts[static_cast<std::size_t>(l)];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
      if (counts[c] > counts[best]) best = c;
    }
    if (counts[best] > 0) out[q] = static_cast<int>(best);
  }
  return out;
}

}  // namespace physio
