#include "physio/dataset.hpp"

#include "physio/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

namespace physio {

namespace fs = std::filesystem;
using nlohmann::json;

const RawSignal& SubjectRecording::signal(Channel c) const {
  for (const auto& s : signals) {
    if (s.channel == c) return s;
  }
  throw SchemaError("subject '" + id + "': missing channel " + std::string(to_string(c)));
}

std::size_t Dataset::total_windows() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.labels.size();
  return n;
}

// ---------------------------------------------------------------------------
// Neutral columnar format

namespace {

std::vector<Channel> channels_of(Indicator ind) {
  if (ind == Indicator::ACC) return {Channel::AccX, Channel::AccY, Channel::AccZ};
  switch (ind) {
    case Indicator::BVP: return {Channel::BVP};
    case Indicator::ECG: return {Channel::ECG};
    case Indicator::EDA: return {Channel::EDA};
    case Indicator::EMG: return {Channel::EMG};
    case Indicator::RESP: return {Channel::RESP};
    case Indicator::TEMP: return {Channel::TEMP};
    default: break;
  }
  return {};
}

std::vector<std::string> value_columns(Indicator ind) {
  if (ind == Indicator::ACC) return {"x", "y", "z"};
  return {"value"};
}

// Rate from a time column; snapped to 1 mHz when the data is consistent with it.
double infer_rate(const io::CsvTable& t, std::size_t tcol, double& start) {
  if (t.rows.size() < 2) throw SchemaError(t.path.string() + ": need at least two samples");
  start = t.number(t.rows.front(), tcol);
  const double last = t.number(t.rows.back(), tcol);
  const double span = last - start;
  if (!(span > 0.0)) throw SchemaError(t.path.string() + ": timestamps must increase");
  double rate = static_cast<double>(t.rows.size() - 1) / span;
  const double snapped = std::round(rate * 1000.0) / 1000.0;
  if (std::abs(snapped - rate) <= 1e-7 * rate) rate = snapped;
  // Constant step check, tolerant to the 1e-6 s quantisation of the writer.
  const double step = 1.0 / rate;
  double prev = start;
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const double cur = t.number(t.rows[i], tcol);
    if (std::abs((cur - prev) - step) > 0.25 * step + 2e-6) {
      throw SchemaError(t.path.string() + ":" + std::to_string(t.rows[i].line) +
                        ": timestamp step deviates from constant sampling");
    }
    prev = cur;
  }
  return rate;
}

RawAttributes read_attributes(const fs::path& path) {
  const auto t = io::read_csv(path);
  if (t.rows.size() != 1) throw SchemaError(path.string() + ": expected exactly one attribute row");
  const auto& r = t.rows.front();
  RawAttributes a;
  a.age = t.number(r, t.column("age"));
  a.gender = r.fields[t.column("gender")];
  a.height_cm = t.number(r, t.column("height_cm"));
  a.weight_kg = t.number(r, t.column("weight_kg"));
  a.smoker = r.fields[t.column("smoker")];
  a.exercised_today = r.fields[t.column("exercised_today")];
  // Validate categories early so errors point at the file.
  try {
    (void)encode_attributes(a);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ":" + std::to_string(r.line) + ": " + e.what());
  }
  return a;
}

}  // namespace

SubjectRecording read_recording(const fs::path& dir, Device device) {
  SubjectRecording rec;
  rec.id = dir.filename().string();
  if (!fs::is_directory(dir)) throw SchemaError("subject directory " + dir.string() + " does not exist");

  const fs::path attr = dir / "attributes.csv";
  if (!fs::exists(attr)) throw SchemaError("subject '" + rec.id + "': missing attributes file " + attr.string());
  rec.attributes = read_attributes(attr);

  for (Indicator ind : device_indicators(device)) {
    const fs::path p = dir / (std::string(to_string(ind)) + ".csv");
    if (!fs::exists(p)) {
      throw SchemaError("subject '" + rec.id + "': missing indicator " + std::string(to_string(ind)) + " (" +
                        p.string() + ")");
    }
    const auto t = io::read_csv(p);
    const std::size_t tcol = t.column("time_s");
    double start = 0.0;
    const double rate = infer_rate(t, tcol, start);
    const auto chans = channels_of(ind);
    const auto cols = value_columns(ind);
    for (std::size_t c = 0; c < chans.size(); ++c) {
      RawSignal s;
      s.subject_id = rec.id;
      s.channel = chans[c];
      s.rate_hz = rate;
      s.start_time_s = start;
      const std::size_t vcol = t.column(cols[c]);
      s.samples.reserve(t.rows.size());
      for (const auto& r : t.rows) {
        const double v = t.number(r, vcol);
        if (!std::isfinite(v)) throw SchemaError(p.string() + ":" + std::to_string(r.line) + ": non-finite value");
        s.samples.push_back(v);
      }
      rec.signals.push_back(std::move(s));
    }
  }

  const fs::path lp = dir / "labels.csv";
  if (!fs::exists(lp)) throw SchemaError("subject '" + rec.id + "': missing labels file " + lp.string());
  const auto lt = io::read_csv(lp);
  const std::size_t tcol = lt.column("time_s");
  const std::size_t lcol = lt.column("label");
  rec.labels.rate_hz = infer_rate(lt, tcol, rec.labels.start_time_s);
  for (const auto& r : lt.rows) {
    const int l = lt.integer(r, lcol);
    if (l < 0 || l >= kNumClasses) {
      throw SchemaError(lp.string() + ":" + std::to_string(r.line) + ": label " + std::to_string(l) +
                        " outside {0,1,2}");
    }
    rec.labels.labels.push_back(l);
  }

  // Streams share one time origin.
  for (const auto& s : rec.signals) {
    const double tol = 0.5 / std::min(s.rate_hz, rec.labels.rate_hz) + 1e-6;
    if (std::abs(s.start_time_s - rec.labels.start_time_s) > tol) {
      throw SchemaError("subject '" + rec.id + "': " + std::string(to_string(s.channel)) +
                        " starts at a different time than labels.csv");
    }
  }
  return rec;
}

void write_recording(const fs::path& root, const SubjectRecording& rec, Device device) {
  const fs::path dir = root / rec.id;
  fs::create_directories(dir);
  {
    const auto& a = rec.attributes;
    std::string text = "age,gender,height_cm,weight_kg,smoker,exercised_today\n";
    text += io::fmt_g(a.age, 10) + "," + a.gender + "," + io::fmt_g(a.height_cm, 10) + "," +
            io::fmt_g(a.weight_kg, 10) + "," + a.smoker + "," + a.exercised_today + "\n";
    io::write_text(dir / "attributes.csv", text);
  }
  for (Indicator ind : device_indicators(device)) {
    const auto chans = channels_of(ind);
    std::vector<const RawSignal*> sigs;
    for (Channel c : chans) sigs.push_back(&rec.signal(c));
    std::string text = "time_s";
    for (const auto& c : value_columns(ind)) text += "," + c;
    text += "\n";
    const RawSignal& first = *sigs.front();
    for (std::size_t i = 0; i < first.samples.size(); ++i) {
      text += io::fmt_f(first.start_time_s + static_cast<double>(i) / first.rate_hz, 6);
      for (const RawSignal* s : sigs) {
        text += ",";
        text += io::fmt_g(s->samples.at(i), 10);
      }
      text += "\n";
    }
    io::write_text(dir / (std::string(to_string(ind)) + ".csv"), text);
  }
  std::string text = "time_s,label\n";
  for (std::size_t i = 0; i < rec.labels.labels.size(); ++i) {
    text += io::fmt_f(rec.labels.start_time_s + static_cast<double>(i) / rec.labels.rate_hz, 6) + "," +
            std::to_string(rec.labels.labels[i]) + "\n";
  }
  io::write_text(dir / "labels.csv", text);
}

std::vector<std::string> list_subjects(const fs::path& root) {
  if (!fs::is_directory(root)) throw SchemaError("data root " + root.string() + " is not a directory");
  std::vector<std::string> ids;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) ids.push_back(e.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  if (ids.empty()) throw SchemaError("data root " + root.string() + " contains no subject directories");
  return ids;
}

// ---------------------------------------------------------------------------
// Preprocessing

FilterSpec PrepConfig::filter_for(Channel c, double rate_hz) const {
  FilterSpec spec = default_filter_spec(c, rate_hz);
  spec.order = filter_order;
  if (auto it = cutoff_hz.find(indicator_of(c)); it != cutoff_hz.end()) spec.cutoff_hz = it->second;
  return spec;
}

LabeledWindows preprocess_subject(const SubjectRecording& rec, Device device, const PrepConfig& cfg,
                                  FeatureCatalog* catalog_out) {
  const std::vector<Indicator> order = cfg.indicator_order.empty() ? device_indicators(device) : cfg.indicator_order;

  std::map<Channel, RawSignal> filtered;
  std::size_t xi = cfg.plan.window_count(rec.labels.duration_s());
  for (Indicator ind : order) {
    for (Channel c : channels_of(ind)) {
      const RawSignal& raw = rec.signal(c);
      raw.validate();
      const FilterCoefficients coeffs = design_lowpass(cfg.filter_for(c, raw.rate_hz), raw.rate_hz);
      RawSignal f = apply_filter(raw, coeffs);
      xi = std::min(xi, cfg.plan.window_count(f.duration_s()));
      filtered.emplace(c, std::move(f));
    }
  }
  if (xi == 0) {
    throw PreprocessError("subject '" + rec.id + "': recording is shorter than one " +
                          io::fmt_g(cfg.plan.window_len_s, 6) + " s window");
  }

  std::vector<IndicatorFeatures> blocks;
  for (Indicator ind : order) {
    const auto win = [&](Channel c) { return segment(filtered.at(c), cfg.plan, xi); };
    switch (ind) {
      case Indicator::ACC: blocks.push_back(acc_features(win(Channel::AccX), win(Channel::AccY), win(Channel::AccZ))); break;
      case Indicator::EDA: blocks.push_back(eda_features(win(Channel::EDA), cfg.features)); break;
      case Indicator::ECG: blocks.push_back(hrv_features(win(Channel::ECG), Indicator::ECG, cfg.features)); break;
      case Indicator::BVP: blocks.push_back(hrv_features(win(Channel::BVP), Indicator::BVP, cfg.features)); break;
      case Indicator::TEMP: blocks.push_back(temp_features(win(Channel::TEMP))); break;
      case Indicator::EMG: blocks.push_back(emg_features(win(Channel::EMG))); break;
      case Indicator::RESP: blocks.push_back(resp_features(win(Channel::RESP))); break;
    }
  }

  FeatureCatalog cat;
  SubjectFeatures all = assemble(rec.id, encode_attributes(rec.attributes), blocks, &cat);
  const std::vector<int> labels = window_labels(rec.labels, cfg.plan, xi);

  LabeledWindows out;
  out.subject_id = rec.id;
  std::vector<std::size_t> keep;
  for (std::size_t q = 0; q < xi; ++q) {
    if (labels[q] == kIgnoreLabel) continue;
    keep.push_back(q);
    out.labels.push_back(labels[q]);
  }
  if (keep.empty()) throw PreprocessError("subject '" + rec.id + "': no window carries a study label");
  out.window_index = keep;
  out.features = keep.size() == xi ? std::move(all) : all.select_windows(keep);
  if (catalog_out) *catalog_out = std::move(cat);
  return out;
}

Dataset build_dataset(const std::vector<SubjectRecording>& recordings, Device device, const PrepConfig& cfg,
                      int jobs) {
  Dataset ds;
  ds.device = device;
  ds.plan = cfg.plan;
  const std::size_t n = recordings.size();
  std::vector<LabeledWindows> subjects(n);
  std::vector<FeatureCatalog> catalogs(n);
  const std::size_t workers = static_cast<std::size_t>(std::max(1, jobs));
  // Results land at fixed indices, so output is independent of scheduling.
  for (std::size_t base = 0; base < n; base += workers) {
    std::vector<std::future<void>> pending;
    for (std::size_t i = base; i < std::min(n, base + workers); ++i) {
      pending.push_back(std::async(workers == 1 ? std::launch::deferred : std::launch::async, [&, i] {
        subjects[i] = preprocess_subject(recordings[i], device, cfg, &catalogs[i]);
      }));
    }
    for (auto& f : pending) f.get();
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ids.insert(subjects[i].subject_id).second) {
      throw SchemaError("duplicate subject id '" + subjects[i].subject_id + "'");
    }
    if (i > 0 && !(catalogs[i] == catalogs[0])) {
      throw SchemaError("subject '" + subjects[i].subject_id + "': feature catalog differs from other subjects");
    }
  }
  if (n > 0) ds.catalog = catalogs[0];
  ds.subjects = std::move(subjects);
  return ds;
}

Dataset load(const fs::path& root, Device device, const PrepConfig& cfg, int jobs) {
  std::vector<SubjectRecording> recs;
  for (const auto& id : list_subjects(root)) recs.push_back(read_recording(root / id, device));
  return build_dataset(recs, device, cfg, jobs);
}

// ---------------------------------------------------------------------------
// Feature files

void save_features(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  const auto names = ds.catalog.pf_names();

  json cat;
  cat["catalog_hash"] = hex64(ds.catalog.hash());
  cat["attributes"] = ds.catalog.attribute_names;
  json inds = json::array();
  for (Indicator i : ds.catalog.indicators) inds.push_back(std::string(to_string(i)));
  cat["indicators"] = inds;
  json feats = json::array();
  std::size_t idx = 0;
  for (const auto& a : ds.catalog.attribute_names) feats.push_back({{"name", a}, {"indicator", "ATTR"}, {"index", idx++}});
  for (std::size_t j = 0; j < ds.catalog.indicators.size(); ++j) {
    for (const auto& n : ds.catalog.feature_names[j]) {
      feats.push_back({{"name", n}, {"indicator", std::string(to_string(ds.catalog.indicators[j]))}, {"index", idx++}});
    }
  }
  cat["features"] = feats;
  io::write_text(dir / "catalog.json", cat.dump(2) + "\n");

  json man;
  man["format"] = "physioformer-features";
  man["version"] = 1;
  man["device"] = std::string(to_string(ds.device));
  man["window_length_s"] = ds.plan.window_len_s;
  man["catalog_hash"] = hex64(ds.catalog.hash());
  json subs = json::array();
  for (const auto& s : ds.subjects) {
    std::array<int, kNumClasses> hist{};
    for (int l : s.labels) ++hist[static_cast<std::size_t>(l)];
    subs.push_back({{"id", s.subject_id}, {"windows", s.labels.size()}, {"label_histogram", hist}});
  }
  man["subjects"] = subs;
  io::write_text(dir / "manifest.json", man.dump(2) + "\n");

  for (const auto& s : ds.subjects) {
    std::string text = "window,label";
    for (const auto& n : names) text += "," + n;
    text += "\n";
    for (std::size_t q = 0; q < s.labels.size(); ++q) {
      text += std::to_string(s.window_index[q]) + "," + std::to_string(s.labels[q]);
      for (Eigen::Index c = 0; c < s.features.pf.cols(); ++c) {
        text += "," + io::fmt_g(s.features.pf(static_cast<Eigen::Index>(q), c), 17);
      }
      text += "\n";
    }
    io::write_text(dir / (s.subject_id + ".csv"), text);

    std::string qtext = "window";
    for (Indicator i : ds.catalog.indicators) qtext += "," + std::string(to_string(i));
    qtext += "\n";
    for (std::size_t q = 0; q < s.labels.size(); ++q) {
      qtext += std::to_string(s.window_index[q]);
      for (const auto& flags : s.features.quality) qtext += "," + std::to_string(int(flags[q]));
      qtext += "\n";
    }
    io::write_text(dir / (s.subject_id + "_quality.csv"), qtext);
  }
}

Dataset load_features(const fs::path& dir) {
  json man, cat;
  try {
    man = json::parse(io::read_text(dir / "manifest.json"));
    cat = json::parse(io::read_text(dir / "catalog.json"));
  } catch (const json::exception& e) {
    throw SchemaError(dir.string() + ": malformed feature manifest: " + e.what());
  }
  Dataset ds;
  try {
    ds.device = parse_device(man.at("device").get<std::string>());
    ds.plan.window_len_s = man.at("window_length_s").get<double>();
    ds.catalog.attribute_names = cat.at("attributes").get<std::vector<std::string>>();
    for (const auto& i : cat.at("indicators")) {
      ds.catalog.indicators.push_back(parse_indicator(i.get<std::string>()));
      ds.catalog.feature_names.emplace_back();
    }
    for (const auto& f : cat.at("features")) {
      const auto ind = f.at("indicator").get<std::string>();
      if (ind == "ATTR") continue;
      ds.catalog.feature_names.at(ds.catalog.index_of(parse_indicator(ind))).push_back(f.at("name").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw SchemaError(dir.string() + ": malformed feature manifest: " + e.what());
  }
  if (hex64(ds.catalog.hash()) != man.value("catalog_hash", std::string()) ||
      hex64(ds.catalog.hash()) != cat.value("catalog_hash", std::string())) {
    throw SchemaError(dir.string() + ": catalog hash mismatch");
  }

  const auto names = ds.catalog.pf_names();
  const std::size_t k = ds.catalog.k();
  for (const auto& sj : man.at("subjects")) {
    const std::string id = sj.at("id").get<std::string>();
    const auto t = io::read_csv(dir / (id + ".csv"));
    if (t.header.size() != names.size() + 2) throw SchemaError(t.path.string() + ": column count differs from catalog");
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (t.header[c + 2] != names[c]) {
        throw SchemaError(t.path.string() + ": column '" + t.header[c + 2] + "' does not match catalog '" + names[c] + "'");
      }
    }
    LabeledWindows lw;
    lw.subject_id = id;
    const Eigen::Index xi = static_cast<Eigen::Index>(t.rows.size());
    Matrix pf(xi, static_cast<Eigen::Index>(names.size()));
    for (Eigen::Index q = 0; q < xi; ++q) {
      const auto& r = t.rows[static_cast<std::size_t>(q)];
      lw.window_index.push_back(static_cast<std::size_t>(t.integer(r, 0)));
      const int label = t.integer(r, 1);
      if (label < 0 || label >= kNumClasses) {
        throw SchemaError(t.path.string() + ":" + std::to_string(r.line) + ": label outside {0,1,2}");
      }
      lw.labels.push_back(label);
      for (std::size_t c = 0; c < names.size(); ++c) pf(q, static_cast<Eigen::Index>(c)) = t.number(r, c + 2);
    }
    if (xi == 0) throw SchemaError(t.path.string() + ": no windows");
    auto& f = lw.features;
    f.subject_id = id;
    f.attributes = pf.row(0).head(static_cast<Eigen::Index>(k)).transpose();
    for (std::size_t j = 0; j < ds.catalog.indicators.size(); ++j) {
      f.blocks.push_back(pf.block(0, static_cast<Eigen::Index>(ds.catalog.pf_offset(j)), xi,
                                  static_cast<Eigen::Index>(ds.catalog.m_of(j))));
    }
    f.pf = std::move(pf);
    const fs::path qp = dir / (id + "_quality.csv");
    f.quality.assign(ds.catalog.indicators.size(), std::vector<std::uint8_t>(static_cast<std::size_t>(xi), 0));
    if (fs::exists(qp)) {
      const auto qt = io::read_csv(qp);
      for (std::size_t q = 0; q < qt.rows.size() && q < static_cast<std::size_t>(xi); ++q) {
        for (std::size_t j = 0; j < ds.catalog.indicators.size(); ++j) {
          f.quality[j][q] = static_cast<std::uint8_t>(qt.integer(qt.rows[q], j + 1));
        }
      }
    }
    ds.subjects.push_back(std::move(lw));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic recordings

namespace {

struct SubjectPhysiology {
  double eda_base, eda_reactivity;
  double hr_base;
  double temp_base;
  double resp_base;
  std::array<double, 3> gravity;
};

// Condition effects indexed by response profile (0 baseline, 1 and 2 the
// two condition signatures).
const std::array<double, 3> kEdaShift = {0.0, 0.5, 1.2};      // uS
const std::array<double, 3> kScrPerMinute = {1.0, 3.0, 6.0};
const std::array<double, 3> kHrShift = {0.0, 6.0, 14.0};      // bpm
const std::array<double, 3> kTempShift = {0.0, 0.15, -0.4};   // degC target offset
const std::array<double, 3> kMotion = {0.02, 0.10, 0.05};     // g
const std::array<double, 3> kRespShift = {0.0, 0.04, 0.10};   // Hz
const std::array<double, 3> kEmgLevel = {0.01, 0.02, 0.04};

// baseline / condition / baseline / condition, same block lengths for everyone.
std::vector<int> protocol(std::size_t windows, bool stress_first) {
  const std::array<double, 4> frac = {0.30, 0.25, 0.20, 0.25};
  const std::array<int, 4> states = {0, stress_first ? 2 : 1, 0, stress_first ? 1 : 2};
  std::vector<int> out;
  std::size_t used = 0;
  for (std::size_t b = 0; b < 4; ++b) {
    std::size_t len = b == 3 ? windows - used
                             : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(frac[b] * windows)));
    len = std::min(len, windows - used);
    out.insert(out.end(), len, states[b]);
    used += len;
  }
  return out;
}

}  // namespace

std::vector<SubjectRecording> synthesize_recordings(const SynthConfig& cfg) {
  if (cfg.windows == 0 || cfg.subjects == 0) throw ConfigError("synthesize: need at least one subject and window");
  const bool wrist = cfg.device == Device::Wrist;
  const double T = cfg.window_len_s;
  const double L = T * static_cast<double>(cfg.windows);
  Rng master(cfg.seed);

  std::vector<SubjectRecording> out;
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    Rng rng = master.split(s);
    SubjectRecording rec;
    char id[16];
    std::snprintf(id, sizeof id, "S%02zu", s + 1);
    rec.id = id;

    // Subjects come in pairs (S01/S02, S03/S04, ...). Within a pair one is
    // male and one female, and females show the amusement signature under
    // stress and vice versa. The pair runs opposite condition orders and
    // shares one physiology stream, so both partners produce the same
    // recordings with conflicting labels: only the attributes tell them apart.
    const bool male = s % 2 == 0;
    const bool stress_first = (s % 2 + s / 2) % 2 == 1;

    auto& a = rec.attributes;
    a.age = std::round(rng.uniform(20.0, 45.0));
    a.gender = male ? "male" : "female";
    a.height_cm = std::round(rng.normal(male ? 178.0 : 166.0, 6.0));
    a.weight_kg = std::round(rng.normal(male ? 76.0 : 62.0, 8.0));
    a.smoker = rng.bernoulli(0.2) ? "yes" : "no";
    a.exercised_today = rng.bernoulli(0.4) ? "yes" : "no";

    rng = Rng(cfg.seed * 131 + 1000 + s / 2);
    SubjectPhysiology p;
    p.eda_base = std::max(0.2, 1.0 + rng.normal(0.0, 0.15));
    p.eda_reactivity = std::max(0.4, 1.0 + rng.normal(0.0, 0.2));
    p.hr_base = 65.0 + rng.normal(0.0, 2.0);
    p.temp_base = 32.5 + rng.normal(0.0, 0.2);
    p.resp_base = 0.25 + rng.normal(0.0, 0.02);
    {
      std::array<double, 3> g{rng.normal(), rng.normal(), rng.normal()};
      const double n = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) + 1e-12;
      for (std::size_t i = 0; i < 3; ++i) p.gravity[i] = g[i] / n;
    }

    const std::vector<int> states = protocol(cfg.windows, stress_first);
    std::vector<int> prof = states;
    if (!male) {
      for (int& v : prof) v = v == 0 ? 0 : 3 - v;
    }
    // Per-window expression of the condition, locked to the stimulus and so
    // common to all subjects.
    std::vector<double> expression(cfg.windows);
    Rng stim(cfg.seed * 31 + 0xabcdef);
    for (auto& e : expression) e = std::max(0.0, 1.0 + cfg.state_jitter * stim.normal());
    const auto window_of = [&](double t) {
      return std::min(cfg.windows - 1, static_cast<std::size_t>(std::max(0.0, t) / T));
    };
    const auto effect = [&](const std::array<double, 3>& table, double t) {
      const std::size_t q = window_of(t);
      return table[static_cast<std::size_t>(prof[q])] * expression[q];
    };

    // Smoothed level per second for EDA, HR and temperature targets.
    const std::size_t seconds = static_cast<std::size_t>(std::ceil(L)) + 1;
    std::vector<double> eda_level(seconds), hr_level(seconds), temp_level(seconds), resp_rate(seconds);
    {
      double e = p.eda_base, h = p.hr_base, tp = p.temp_base, r = p.resp_base;
      for (std::size_t i = 0; i < seconds; ++i) {
        const double t = static_cast<double>(i);
        e += (p.eda_base + p.eda_reactivity * effect(kEdaShift, t) - e) / 8.0;
        h += (p.hr_base + effect(kHrShift, t) - h) / 5.0;
        tp += (p.temp_base + effect(kTempShift, t) - tp) / 90.0;
        r += (p.resp_base + effect(kRespShift, t) - r) / 5.0;
        eda_level[i] = e + rng.normal(0.0, 0.01);
        hr_level[i] = h;
        temp_level[i] = tp;
        resp_rate[i] = r;
      }
    }
    const auto interp = [&](const std::vector<double>& v, double t) {
      const double c = std::clamp(t, 0.0, static_cast<double>(v.size() - 1));
      const std::size_t i = std::min(v.size() - 2, static_cast<std::size_t>(c));
      const double f = c - static_cast<double>(i);
      return v[i] * (1.0 - f) + v[i + 1] * f;
    };
    const auto make = [&](Channel c, double rate) {
      RawSignal sig;
      sig.subject_id = rec.id;
      sig.channel = c;
      sig.rate_hz = rate;
      sig.samples.assign(static_cast<std::size_t>(std::llround(L * rate)), 0.0);
      return sig;
    };

    // EDA: tonic level + skin-conductance responses + sensor noise.
    {
      const double rate = wrist ? 4.0 : 8.0;
      RawSignal eda = make(Channel::EDA, rate);
      std::vector<std::pair<double, double>> scrs;  // onset, amplitude
      for (double t = 0.0; t < L;) {
        const std::size_t q = window_of(t);
        const double per_min = kScrPerMinute[static_cast<std::size_t>(prof[q])] * std::max(0.3, expression[q]);
        t += -std::log(1.0 - rng.uniform()) * 60.0 / per_min;
        if (t < L) scrs.emplace_back(t, rng.uniform(0.05, 0.25) * p.eda_reactivity);
      }
      for (std::size_t i = 0; i < eda.samples.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        double v = interp(eda_level, t);
        for (const auto& [on, amp] : scrs) {
          const double d = t - on;
          if (d <= 0.0 || d > 30.0) continue;
          v += amp * 1.5 * (std::exp(-d / 4.0) - std::exp(-d / 0.75));
        }
        eda.samples[i] = v + rng.normal(0.0, 0.003);
      }
      rec.signals.push_back(std::move(eda));
    }

    // Beat train shared by BVP / ECG.
    std::vector<double> beats;
    for (double t = rng.uniform(0.0, 0.5); t < L;) {
      beats.push_back(t);
      t += 60.0 / interp(hr_level, t) + rng.normal(0.0, 0.015);
    }
    const auto render_beats = [&](RawSignal& sig, double width, double second_amp, double second_delay,
                                  double second_width, double noise) {
      const double rate = sig.rate_hz;
      for (double b : beats) {
        const auto lo = static_cast<std::ptrdiff_t>(std::floor((b - 0.3) * rate));
        const auto hi = static_cast<std::ptrdiff_t>(std::ceil((b + 0.6) * rate));
        for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, lo);
             i < std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(sig.samples.size()), hi); ++i) {
          const double d = static_cast<double>(i) / rate - b;
          const double d2 = d - second_delay;
          sig.samples[static_cast<std::size_t>(i)] +=
              std::exp(-0.5 * d * d / (width * width)) + second_amp * std::exp(-0.5 * d2 * d2 / (second_width * second_width));
        }
      }
      for (double& v : sig.samples) v += rng.normal(0.0, noise);
    };

    if (wrist) {
      RawSignal bvp = make(Channel::BVP, 64.0);
      render_beats(bvp, 0.06, 0.3, 0.25, 0.08, 0.03);
      rec.signals.push_back(std::move(bvp));
    } else {
      RawSignal ecg = make(Channel::ECG, 128.0);
      render_beats(ecg, 0.012, 0.25, 0.25, 0.04, 0.02);
      rec.signals.push_back(std::move(ecg));

      RawSignal emg = make(Channel::EMG, 128.0);
      for (std::size_t i = 0; i < emg.samples.size(); ++i) {
        emg.samples[i] = rng.normal(0.0, effect(kEmgLevel, static_cast<double>(i) / 128.0));
      }
      rec.signals.push_back(std::move(emg));

      RawSignal resp = make(Channel::RESP, 16.0);
      double phase = rng.uniform();
      for (std::size_t i = 0; i < resp.samples.size(); ++i) {
        const double t = static_cast<double>(i) / 16.0;
        phase += interp(resp_rate, t) / 16.0;
        resp.samples[i] = std::sin(2.0 * std::numbers::pi * phase) + rng.normal(0.0, 0.05);
      }
      rec.signals.push_back(std::move(resp));
    }

    {
      RawSignal temp = make(Channel::TEMP, 4.0);
      for (std::size_t i = 0; i < temp.samples.size(); ++i) {
        temp.samples[i] = interp(temp_level, static_cast<double>(i) / 4.0) + rng.normal(0.0, 0.005);
      }
      rec.signals.push_back(std::move(temp));
    }

    {
      RawSignal ax = make(Channel::AccX, 32.0), ay = make(Channel::AccY, 32.0), az = make(Channel::AccZ, 32.0);
      for (std::size_t i = 0; i < ax.samples.size(); ++i) {
        const double m = effect(kMotion, static_cast<double>(i) / 32.0);
        ax.samples[i] = p.gravity[0] + rng.normal(0.0, m);
        ay.samples[i] = p.gravity[1] + rng.normal(0.0, m);
        az.samples[i] = p.gravity[2] + rng.normal(0.0, m);
      }
      rec.signals.push_back(std::move(ax));
      rec.signals.push_back(std::move(ay));
      rec.signals.push_back(std::move(az));
    }

    rec.labels.rate_hz = 4.0;
    rec.labels.labels.resize(static_cast<std::size_t>(std::llround(L * 4.0)));
    for (std::size_t i = 0; i < rec.labels.labels.size(); ++i) {
      rec.labels.labels[i] = states[window_of(static_cast<double>(i) / 4.0)];
    }
    out.push_back(std::move(rec));
  }
  return out;
}

Dataset synthesize(const SynthConfig& cfg, const PrepConfig& prep) {
  return build_dataset(synthesize_recordings(cfg), cfg.device, prep);
}

Dataset synthesize(const SynthConfig& cfg) {
  PrepConfig prep;
  prep.plan.window_len_s = cfg.window_len_s;
  return synthesize(cfg, prep);
}

// ---------------------------------------------------------------------------
// Splits

std::size_t Split::train_count() const {
  std::size_t n = 0;
  for (const auto& v : train) n += v.size();
  return n;
}

std::size_t Split::test_count() const {
  std::size_t n = 0;
  for (const auto& v : test) n += v.size();
  return n;
}

Split split(const Dataset& ds, const SplitPolicy& policy) {
  Split out;
  const std::size_t n = ds.subjects.size();
  out.train.resize(n);
  out.test.resize(n);
  if (policy.kind == SplitPolicy::Kind::LeaveOneSubjectOut) {
    if (policy.held_out_subject >= n) throw ConfigError("leave-one-subject-out fold index out of range");
    for (std::size_t s = 0; s < n; ++s) {
      std::vector<std::size_t> all(ds.subjects[s].labels.size());
      std::iota(all.begin(), all.end(), 0);
      (s == policy.held_out_subject ? out.test : out.train)[s] = std::move(all);
    }
    return out;
  }

  if (!(policy.train_fraction > 0.0 && policy.train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  Rng master(policy.seed);
  for (std::size_t s = 0; s < n; ++s) {
    Rng rng = master.split(s);
    const auto& labels = ds.subjects[s].labels;
    const std::size_t total = labels.size();
    if (total < 2) {
      throw InputError("subject '" + ds.subjects[s].subject_id + "' has fewer than 2 windows; cannot split");
    }
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t q = 0; q < total; ++q) by_class[static_cast<std::size_t>(labels[q])].push_back(q);

    std::size_t target = static_cast<std::size_t>(std::llround(policy.train_fraction * static_cast<double>(total)));
    target = std::clamp<std::size_t>(target, 1, total - 1);
    // Largest-remainder allocation of the train quota across classes.
    std::array<std::size_t, kNumClasses> quota{};
    std::array<double, kNumClasses> rem{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      const double exact = policy.train_fraction * static_cast<double>(by_class[c].size());
      quota[c] = std::min(by_class[c].size(), static_cast<std::size_t>(std::floor(exact)));
      rem[c] = exact - std::floor(exact);
      assigned += quota[c];
    }
    while (assigned < target) {
      std::size_t best = kNumClasses;
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (quota[c] >= by_class[c].size()) continue;
        if (best == kNumClasses || rem[c] > rem[best]) best = c;
      }
      if (best == kNumClasses) break;
      ++quota[best];
      rem[best] = -1.0;
      ++assigned;
    }
    while (assigned > target) {
      for (std::size_t c = kNumClasses; c-- > 0;) {
        if (quota[c] > 0 && assigned > target) {
          --quota[c];
          --assigned;
        }
      }
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      auto idx = by_class[c];
      for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
      for (std::size_t i = 0; i < idx.size(); ++i) (i < quota[c] ? out.train : out.test)[s].push_back(idx[i]);
    }
    std::sort(out.train[s].begin(), out.train[s].end());
    std::sort(out.test[s].begin(), out.test[s].end());
  }
  return out;
}

std::vector<Split> leave_one_subject_out(const Dataset& ds) {
  std::vector<Split> folds;
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    SplitPolicy p;
    p.kind = SplitPolicy::Kind::LeaveOneSubjectOut;
    p.held_out_subject = s;
    folds.push_back(split(ds, p));
  }
  return folds;
}

}  // namespace physio
