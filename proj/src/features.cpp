#include "physio/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <numeric>

namespace physio {

BasicStats basic_stats(std::span<const double> x) {
  if (x.empty()) throw ExtractionError("basic_stats: empty input");
  BasicStats s;
  s.max = x[0];
  s.min = x[0];
  double sum = 0.0;
  for (double v : x) {
    sum += v;
    s.max = std::max(s.max, v);
    s.min = std::min(s.min, v);
  }
  const double n = static_cast<double>(x.size());
  s.mean = sum / n;
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / n);
  // Rounding can nudge the mean a hair outside [min, max] on constant input.
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

namespace {

void push_stats(std::vector<double>& row, const BasicStats& s) {
  row.push_back(s.mean);
  row.push_back(s.std);
  row.push_back(s.max);
  row.push_back(s.min);
}

void add_stat_names(std::vector<std::string>& names, const std::string& prefix) {
  for (const char* s : {"mean", "std", "max", "min"}) names.push_back(prefix + "_" + s);
}

IndicatorFeatures make_features(Indicator ind, std::size_t windows) {
  IndicatorFeatures f;
  f.indicator = ind;
  f.names = indicator_feature_names(ind);
  f.values = Matrix::Zero(static_cast<Eigen::Index>(windows), static_cast<Eigen::Index>(f.names.size()));
  f.quality.assign(windows, 0);
  return f;
}

void set_row(IndicatorFeatures& f, std::size_t q, const std::vector<double>& row) {
  if (row.size() != f.names.size()) {
    throw ExtractionError("internal: feature row width mismatch for " + std::string(to_string(f.indicator)));
  }
  for (std::size_t c = 0; c < row.size(); ++c) {
    const double v = row[c];
    if (!std::isfinite(v)) {
      throw ExtractionError("non-finite feature " + f.names[c] + " in window " + std::to_string(q));
    }
    f.values(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(c)) = v;
  }
}

}  // namespace

std::vector<std::string> indicator_feature_names(Indicator ind) {
  std::vector<std::string> n;
  const std::string p(to_string(ind));
  switch (ind) {
    case Indicator::ACC:
      add_stat_names(n, p + "_x");
      add_stat_names(n, p + "_y");
      add_stat_names(n, p + "_z");
      add_stat_names(n, p + "_net");
      break;
    case Indicator::EDA:
      add_stat_names(n, p + "_tonic");
      add_stat_names(n, p + "_phasic");
      n.push_back(p + "_scr_count");
      n.push_back(p + "_scr_amp_mean");
      n.push_back(p + "_scr_amp_std");
      n.push_back(p + "_scr_amp_max");
      break;
    case Indicator::ECG:
      add_stat_names(n, p);
      n.push_back(p + "_hr_mean");
      n.push_back(p + "_sdnn");
      n.push_back(p + "_rmssd");
      break;
    case Indicator::BVP:
      add_stat_names(n, p);
      n.push_back(p + "_peak_freq");
      n.push_back(p + "_sdnn");
      n.push_back(p + "_rmssd");
      break;
    case Indicator::TEMP:
      add_stat_names(n, p);
      n.push_back(p + "_slope");
      break;
    case Indicator::EMG:
      add_stat_names(n, p);
      break;
    case Indicator::RESP:
      add_stat_names(n, p + "_rate");
      break;
  }
  return n;
}

std::vector<std::size_t> detect_peaks(std::span<const double> x, double rate_hz,
                                      double threshold_std, double refractory_s) {
  std::vector<std::size_t> peaks;
  if (x.size() < 3) return peaks;
  const BasicStats s = basic_stats(x);
  const double thr = s.mean + threshold_std * s.std;
  const double refractory = refractory_s * rate_hz;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (!(x[i] > x[i - 1] && x[i] >= x[i + 1] && x[i] > thr)) continue;
    if (!peaks.empty() && static_cast<double>(i - peaks.back()) < refractory) {
      if (x[i] > x[peaks.back()]) peaks.back() = i;
      continue;
    }
    peaks.push_back(i);
  }
  return peaks;
}

double sdnn(std::span<const double> rr_ms) {
  if (rr_ms.empty()) return 0.0;
  return basic_stats(rr_ms).std;
}

double rmssd(std::span<const double> rr_ms) {
  if (rr_ms.size() < 2) return 0.0;
  double ss = 0.0;
  for (std::size_t i = 1; i < rr_ms.size(); ++i) {
    const double d = rr_ms[i] - rr_ms[i - 1];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(rr_ms.size() - 1));
}

double linear_slope(std::span<const double> x, double rate_hz) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  double tm = 0.0, xm = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tm += static_cast<double>(i) / rate_hz;
    xm += x[i];
  }
  tm /= static_cast<double>(n);
  xm /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) / rate_hz - tm;
    sxy += dt * (x[i] - xm);
    sxx += dt * dt;
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

namespace {

double dominant_frequency(std::span<const double> x, double rate_hz) {
  const std::size_t n = x.size();
  const double duration = static_cast<double>(n) / rate_hz;
  const double mean = basic_stats(x).mean;
  double best_f = 0.0, best_p = -1.0;
  for (double f = 0.5; f <= 4.0 + 1e-12; f += 1.0 / duration) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * f * static_cast<double>(i) / rate_hz;
      re += (x[i] - mean) * std::cos(a);
      im -= (x[i] - mean) * std::sin(a);
    }
    const double p = re * re + im * im;
    if (p > best_p) {
      best_p = p;
      best_f = f;
    }
  }
  return best_f;
}

}  // namespace

HrvResult analyze_beats(std::span<const double> x, double rate_hz, const FeatureConfig& cfg) {
  HrvResult r;
  r.peaks = detect_peaks(x, rate_hz, cfg.peak_threshold_std, cfg.refractory_s);
  const double duration = static_cast<double>(x.size()) / rate_hz;
  r.peak_rate_hz = duration > 0.0 ? static_cast<double>(r.peaks.size()) / duration : 0.0;
  for (std::size_t i = 1; i < r.peaks.size(); ++i) {
    r.rr_ms.push_back(1000.0 * static_cast<double>(r.peaks[i] - r.peaks[i - 1]) / rate_hz);
  }
  r.ok = r.peaks.size() >= 3;
  if (r.ok) {
    r.sdnn_ms = sdnn(r.rr_ms);
    r.rmssd_ms = rmssd(r.rr_ms);
    r.mean_rr_ms = basic_stats(r.rr_ms).mean;
  }
  return r;
}

EdaDecomposition decompose_eda(std::span<const double> x, double rate_hz, const FeatureConfig& cfg) {
  EdaDecomposition d;
  const FilterCoefficients lp = design_lowpass({cfg.eda_tonic_order, cfg.eda_tonic_cutoff_hz}, rate_hz);
  d.tonic = filtfilt(lp, x);
  d.phasic.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d.phasic[i] = x[i] - d.tonic[i];

  const double min_sep = cfg.scr_min_separation_s * rate_hz;
  const auto& p = d.phasic;
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    if (!(p[i] > p[i - 1] && p[i] >= p[i + 1] && p[i] > cfg.scr_threshold)) continue;
    if (!d.scr_peaks.empty() && static_cast<double>(i - d.scr_peaks.back()) < min_sep) {
      if (p[i] > p[d.scr_peaks.back()]) {
        d.scr_peaks.back() = i;
        d.scr_amplitudes.back() = p[i];
      }
      continue;
    }
    d.scr_peaks.push_back(i);
    d.scr_amplitudes.push_back(p[i]);
  }
  return d;
}

std::vector<double> breath_onsets_s(std::span<const double> x, double rate_hz) {
  std::vector<double> onsets;
  if (x.size() < 3) return onsets;
  const BasicStats s = basic_stats(x);
  if (s.std <= 0.0) return onsets;
  // Hysteresis: the signal must dip below -h before the next upward crossing counts.
  const double h = 0.1 * s.std;
  bool armed = false;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double prev = x[i - 1] - s.mean;
    const double cur = x[i] - s.mean;
    if (cur < -h) armed = true;
    if (armed && prev < 0.0 && cur >= 0.0) {
      const double frac = prev / (prev - cur);
      onsets.push_back((static_cast<double>(i - 1) + frac) / rate_hz);
      armed = false;
    }
  }
  return onsets;
}

IndicatorFeatures acc_features(const std::vector<Window>& x, const std::vector<Window>& y,
                               const std::vector<Window>& z) {
  if (x.size() != y.size() || x.size() != z.size()) {
    throw ExtractionError("ACC axes have different window counts");
  }
  IndicatorFeatures f = make_features(Indicator::ACC, x.size());
  for (std::size_t q = 0; q < x.size(); ++q) {
    const auto& xs = x[q].samples;
    const auto& ys = y[q].samples;
    const auto& zs = z[q].samples;
    if (xs.size() != ys.size() || xs.size() != zs.size()) {
      throw ExtractionError("ACC axis length mismatch in window " + std::to_string(q));
    }
    std::vector<double> net(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) net[i] = xs[i] + ys[i] + zs[i];
    std::vector<double> row;
    push_stats(row, basic_stats(xs));
    push_stats(row, basic_stats(ys));
    push_stats(row, basic_stats(zs));
    push_stats(row, basic_stats(net));
    set_row(f, q, row);
  }
  return f;
}

IndicatorFeatures eda_features(const std::vector<Window>& windows, const FeatureConfig& cfg) {
  IndicatorFeatures f = make_features(Indicator::EDA, windows.size());
  for (std::size_t q = 0; q < windows.size(); ++q) {
    const auto d = decompose_eda(windows[q].samples, windows[q].rate_hz, cfg);
    std::vector<double> row;
    push_stats(row, basic_stats(d.tonic));
    push_stats(row, basic_stats(d.phasic));
    row.push_back(static_cast<double>(d.scr_peaks.size()));
    if (d.scr_amplitudes.empty()) {
      row.insert(row.end(), {0.0, 0.0, 0.0});
    } else {
      const BasicStats a = basic_stats(d.scr_amplitudes);
      row.insert(row.end(), {a.mean, a.std, a.max});
    }
    set_row(f, q, row);
  }
  return f;
}

IndicatorFeatures hrv_features(const std::vector<Window>& windows, Indicator source,
                               const FeatureConfig& cfg) {
  if (source != Indicator::ECG && source != Indicator::BVP) {
    throw ExtractionError("hrv_features: source must be ECG or BVP");
  }
  IndicatorFeatures f = make_features(source, windows.size());
  for (std::size_t q = 0; q < windows.size(); ++q) {
    const auto& w = windows[q];
    const HrvResult r = analyze_beats(w.samples, w.rate_hz, cfg);
    std::vector<double> row;
    push_stats(row, basic_stats(w.samples));
    if (source == Indicator::ECG) {
      row.push_back(r.ok ? 60000.0 / r.mean_rr_ms : 0.0);
    } else if (cfg.bvp_dominant_frequency) {
      row.push_back(dominant_frequency(w.samples, w.rate_hz));
    } else {
      row.push_back(r.peak_rate_hz);
    }
    row.push_back(r.ok ? r.sdnn_ms : 0.0);
    row.push_back(r.ok ? r.rmssd_ms : 0.0);
    f.quality[q] = r.ok ? 0 : 1;
    set_row(f, q, row);
  }
  return f;
}

IndicatorFeatures temp_features(const std::vector<Window>& windows) {
  IndicatorFeatures f = make_features(Indicator::TEMP, windows.size());
  for (std::size_t q = 0; q < windows.size(); ++q) {
    std::vector<double> row;
    push_stats(row, basic_stats(windows[q].samples));
    row.push_back(linear_slope(windows[q].samples, windows[q].rate_hz));
    set_row(f, q, row);
  }
  return f;
}

IndicatorFeatures emg_features(const std::vector<Window>& windows) {
  IndicatorFeatures f = make_features(Indicator::EMG, windows.size());
  for (std::size_t q = 0; q < windows.size(); ++q) {
    std::vector<double> row;
    push_stats(row, basic_stats(windows[q].samples));
    set_row(f, q, row);
  }
  return f;
}

IndicatorFeatures resp_features(const std::vector<Window>& windows) {
  IndicatorFeatures f = make_features(Indicator::RESP, windows.size());
  for (std::size_t q = 0; q < windows.size(); ++q) {
    const auto onsets = breath_onsets_s(windows[q].samples, windows[q].rate_hz);
    std::vector<double> rates;
    for (std::size_t i = 1; i < onsets.size(); ++i) rates.push_back(1.0 / (onsets[i] - onsets[i - 1]));
    std::vector<double> row;
    if (rates.empty()) {
      row.assign(4, 0.0);
      f.quality[q] = 1;
    } else {
      push_stats(row, basic_stats(rates));
    }
    set_row(f, q, row);
  }
  return f;
}

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Returns true for the first category, false for the second.
bool one_hot_choice(const std::string& field, const std::string& value,
                    std::initializer_list<const char*> first, std::initializer_list<const char*> second) {
  const std::string v = lower(value);
  for (const char* s : first) {
    if (v == s) return true;
  }
  for (const char* s : second) {
    if (v == s) return false;
  }
  throw SchemaError("unknown " + field + " category '" + value + "'");
}

}  // namespace

std::vector<std::string> attribute_names() {
  return {"age",       "gender_male", "gender_female", "height",       "weight",
          "smoker_yes", "smoker_no",  "exercised_yes", "exercised_no"};
}

AttributeVector encode_attributes(const RawAttributes& raw) {
  for (double v : {raw.age, raw.height_cm, raw.weight_kg}) {
    if (!std::isfinite(v)) throw SchemaError("non-finite continuous attribute");
  }
  const bool male = one_hot_choice("gender", raw.gender, {"male", "m"}, {"female", "f"});
  const bool smoker = one_hot_choice("smoker", raw.smoker, {"yes", "y", "true", "1"}, {"no", "n", "false", "0"});
  const bool exercised =
      one_hot_choice("exercised_today", raw.exercised_today, {"yes", "y", "true", "1"}, {"no", "n", "false", "0"});
  AttributeVector a;
  a.names = attribute_names();
  a.values.resize(9);
  a.values << raw.age, male ? 1.0 : 0.0, male ? 0.0 : 1.0, raw.height_cm, raw.weight_kg, smoker ? 1.0 : 0.0,
      smoker ? 0.0 : 1.0, exercised ? 1.0 : 0.0, exercised ? 0.0 : 1.0;
  return a;
}

std::size_t FeatureCatalog::m() const {
  std::size_t s = 0;
  for (const auto& n : feature_names) s += n.size();
  return s;
}

std::size_t FeatureCatalog::pf_offset(std::size_t j) const {
  std::size_t off = k();
  for (std::size_t i = 0; i < j; ++i) off += feature_names.at(i).size();
  return off;
}

std::vector<std::string> FeatureCatalog::pf_names() const {
  std::vector<std::string> out = attribute_names;
  for (const auto& n : feature_names) out.insert(out.end(), n.begin(), n.end());
  return out;
}

std::vector<std::string> FeatureCatalog::gamma_names(std::size_t j) const {
  std::vector<std::string> out = attribute_names;
  const auto& n = feature_names.at(j);
  out.insert(out.end(), n.begin(), n.end());
  return out;
}

std::size_t FeatureCatalog::index_of(Indicator ind) const {
  for (std::size_t j = 0; j < indicators.size(); ++j) {
    if (indicators[j] == ind) return j;
  }
  throw ConfigError("indicator " + std::string(to_string(ind)) + " is not part of this catalog");
}

std::uint64_t FeatureCatalog::hash() const {
  std::string text = "attributes:";
  for (const auto& a : attribute_names) text += a + ",";
  for (std::size_t j = 0; j < indicators.size(); ++j) {
    text += ";" + std::string(to_string(indicators[j])) + ":";
    for (const auto& n : feature_names[j]) text += n + ",";
  }
  return fnv1a64(text);
}

SubjectFeatures SubjectFeatures::select_windows(const std::vector<std::size_t>& rows) const {
  SubjectFeatures out;
  out.subject_id = subject_id;
  out.attributes = attributes;
  const auto idx = [&](const Matrix& m) {
    Matrix r(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) r.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
    return r;
  };
  for (const auto& b : blocks) out.blocks.push_back(idx(b));
  out.pf = idx(pf);
  for (const auto& q : quality) {
    std::vector<std::uint8_t> qq;
    for (auto r : rows) qq.push_back(q.at(r));
    out.quality.push_back(std::move(qq));
  }
  return out;
}

void rebuild_pf(SubjectFeatures& f) {
  const Eigen::Index xi = f.blocks.empty() ? 0 : f.blocks.front().rows();
  Eigen::Index width = f.attributes.size();
  for (const auto& b : f.blocks) {
    if (b.rows() != xi) throw AlignmentError("subject '" + f.subject_id + "': indicator window counts differ");
    width += b.cols();
  }
  f.pf.resize(xi, width);
  for (Eigen::Index q = 0; q < xi; ++q) f.pf.row(q).head(f.attributes.size()) = f.attributes.transpose();
  Eigen::Index off = f.attributes.size();
  for (const auto& b : f.blocks) {
    f.pf.block(0, off, xi, b.cols()) = b;
    off += b.cols();
  }
}

SubjectFeatures assemble(const std::string& subject_id, const AttributeVector& attributes,
                         const std::vector<IndicatorFeatures>& indicators, FeatureCatalog* catalog_out) {
  if (indicators.empty()) throw AlignmentError("subject '" + subject_id + "': no indicators");
  const Eigen::Index xi = indicators.front().values.rows();
  SubjectFeatures f;
  f.subject_id = subject_id;
  f.attributes = attributes.values;
  FeatureCatalog cat;
  cat.attribute_names = attributes.names;
  for (const auto& ind : indicators) {
    if (ind.values.rows() != xi) {
      throw AlignmentError("subject '" + subject_id + "': indicator " + std::string(to_string(ind.indicator)) +
                           " has " + std::to_string(ind.values.rows()) + " windows, expected " +
                           std::to_string(xi));
    }
    f.blocks.push_back(ind.values);
    f.quality.push_back(ind.quality);
    cat.indicators.push_back(ind.indicator);
    cat.feature_names.push_back(ind.names);
  }
  rebuild_pf(f);
  if (catalog_out) *catalog_out = std::move(cat);
  return f;
}

}  // namespace physio
