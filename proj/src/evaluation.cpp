#include "physio/evaluation.hpp"

#include "physio/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <future>
#include <map>
#include <sstream>

namespace physio {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (std::size_t v : row) n += v;
  }
  return n;
}

std::size_t ConfusionMatrix::correct() const {
  std::size_t n = 0;
  for (int c = 0; c < kNumClasses; ++c) n += counts[c][c];
  return n;
}

namespace {

void check_class(int v, const char* what) {
  if (v < 0 || v >= kNumClasses) {
    throw ConfigError(std::string(what) + " " + std::to_string(v) + " outside {0,1,2}");
  }
}

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw ConfigError("confusion: predictions and labels differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    check_class(labels[i], "label");
    check_class(preds[i], "prediction");
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::size_t n = cm.total();
  if (n == 0) throw UndefinedMetricError("accuracy undefined: no evaluated windows");
  return static_cast<double>(cm.correct()) / static_cast<double>(n);
}

F1Scores f1(const ConfusionMatrix& cm) {
  const std::size_t n = cm.total();
  if (n == 0) throw UndefinedMetricError("F1 undefined: no evaluated windows");
  F1Scores out;
  for (int c = 0; c < kNumClasses; ++c) {
    double tp = static_cast<double>(cm.at(c, c)), fp = 0.0, fn = 0.0;
    for (int o = 0; o < kNumClasses; ++o) {
      if (o == c) continue;
      fp += static_cast<double>(cm.at(o, c));
      fn += static_cast<double>(cm.at(c, o));
    }
    const double p = ratio(tp, tp + fp);
    const double r = ratio(tp, tp + fn);
    out.precision[c] = p;
    out.recall[c] = r;
    out.f1[c] = ratio(2.0 * p * r, p + r);
    out.macro += out.f1[c] / kNumClasses;
    out.weighted += out.f1[c] * (tp + fn) / static_cast<double>(n);
  }
  return out;
}

double mse(std::span<const int> preds, std::span<const int> labels) {
  if (preds.size() != labels.size()) throw ConfigError("mse: predictions and labels differ in length");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == kIgnoreLabel) continue;
    const double d = static_cast<double>(preds[i] - labels[i]);
    sum += d * d;
    ++n;
  }
  if (n == 0) throw UndefinedMetricError("MSE undefined: no evaluated windows");
  return sum / static_cast<double>(n);
}

MetricsReport metrics(std::span<const int> preds, std::span<const int> labels) {
  MetricsReport r;
  r.cm = confusion(preds, labels);
  r.n = r.cm.total();
  r.acc = accuracy(r.cm);
  const F1Scores f = f1(r.cm);
  r.f1_per_class = f.f1;
  r.f1_macro = f.macro;
  r.f1_weighted = f.weighted;
  r.mse = mse(preds, labels);
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["acc"] = r.acc;
  j["f1_per_class"] = r.f1_per_class;
  j["f1_macro"] = r.f1_macro;
  j["f1_weighted"] = r.f1_weighted;
  j["mse"] = r.mse;
  j["confusion"] = r.cm.counts;  // rows true, columns predicted
  return j.dump(2) + "\n";
}

PooledPredictions predict(const Model& model, const Dataset& ds, const std::vector<std::vector<std::size_t>>& windows,
                          Mode mode) {
  PooledPredictions out;
  for (std::size_t s = 0; s < ds.subjects.size() && s < windows.size(); ++s) {
    if (windows[s].empty()) continue;
    const auto& subj = ds.subjects[s];
    const auto pred = forward(model, subj.features, mode).predictions();
    for (std::size_t q : windows[s]) {
      out.preds.push_back(pred.at(q));
      out.labels.push_back(subj.labels.at(q));
      out.subjects.push_back(subj.subject_id);
      out.windows.push_back(q);
    }
  }
  return out;
}

MetricsReport evaluate(const Model& model, const Dataset& ds, const std::vector<std::vector<std::size_t>>& windows,
                       Mode mode) {
  const auto p = predict(model, ds, windows, mode);
  return metrics(p.preds, p.labels);
}

// ---------------------------------------------------------------------------
// Studies

std::string_view to_string(StudyKind k) {
  switch (k) {
    case StudyKind::WindowSweep: return "window_sweep";
    case StudyKind::WidthSweep: return "width_sweep";
    case StudyKind::NoEmbedding: return "no_embedding";
    case StudyKind::NoAttributes: return "no_attributes";
  }
  return "?";
}

StudyKind parse_study(std::string_view s) {
  for (auto k : {StudyKind::WindowSweep, StudyKind::WidthSweep, StudyKind::NoEmbedding, StudyKind::NoAttributes}) {
    if (to_string(k) == s) return k;
  }
  throw ConfigError("unknown study '" + std::string(s) +
                    "' (expected window_sweep, width_sweep, no_embedding or no_attributes)");
}

namespace {

struct Variant {
  std::string name;
  double window_s;
  ModelConfig model;
};

StudyRow run_variant(const Variant& v, const Dataset& ds, const StudyConfig& cfg) {
  const Split sp = split(ds, cfg.split);
  Model model = make_model(ds.catalog, v.model, training_attributes(ds, sp));
  const TrainResult res = train(std::move(model), ds, sp, cfg.train);

  StudyRow row;
  row.variant = v.name;
  row.window_s = v.window_s;
  row.windows = ds.total_windows();
  row.contrib_hidden = v.model.contrib_hidden;
  row.affect_hidden = v.model.affect_hidden;
  row.use_embedding = v.model.use_embedding;
  row.use_attributes = v.model.use_attributes;
  row.epochs = res.report.epochs.size();
  row.best_epoch = res.report.best_epoch;
  row.stop_reason = res.report.stop_reason;

  std::vector<int> preds, labels;
  double alpha_sum = 0.0;
  std::size_t alpha_n = 0;
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    if (sp.test[s].empty()) continue;
    const auto& subj = ds.subjects[s];
    const ForwardTrace tr = forward(res.model, subj.features, Mode::Subject);
    const auto pred = tr.predictions();
    for (std::size_t q : sp.test[s]) {
      preds.push_back(pred[q]);
      labels.push_back(subj.labels[q]);
      for (const auto& it : tr.ind) {
        alpha_sum += it.alpha(static_cast<Eigen::Index>(q));
        ++alpha_n;
      }
    }
  }
  row.test = metrics(preds, labels);
  row.mean_alpha = alpha_n ? alpha_sum / static_cast<double>(alpha_n) : 0.0;
  return row;
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <class Fn>
auto parallel_map(std::size_t n, int jobs, Fn fn) {
  using R = decltype(fn(std::size_t{0}));
  std::vector<R> out;
  out.reserve(n);
  const std::size_t width = static_cast<std::size_t>(std::max(1, jobs));
  for (std::size_t lo = 0; lo < n; lo += width) {
    std::vector<std::future<R>> batch;
    for (std::size_t i = lo; i < std::min(n, lo + width); ++i) batch.push_back(std::async(std::launch::async, fn, i));
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

}  // namespace

StudyReport run_study(StudyKind kind, const std::vector<SubjectRecording>& recordings, const StudyConfig& cfg) {
  if (recordings.empty()) throw ConfigError("study: no recordings");
  StudyReport report;
  report.kind = kind;

  if (kind == StudyKind::WindowSweep) {
    if (cfg.windows_s.empty()) throw ConfigError("window sweep: no window lengths");
    report.rows = parallel_map(cfg.windows_s.size(), cfg.jobs, [&](std::size_t i) {
      PrepConfig prep = cfg.prep;
      prep.plan.window_len_s = cfg.windows_s[i];
      const Dataset ds = build_dataset(recordings, cfg.device, prep);
      return run_variant({"T=" + io::fmt_g(cfg.windows_s[i], 6) + "s", cfg.windows_s[i], cfg.model}, ds, cfg);
    });
    return report;
  }

  const Dataset ds = build_dataset(recordings, cfg.device, cfg.prep, cfg.jobs);
  std::vector<Variant> variants;
  const double T = cfg.prep.plan.window_len_s;
  if (kind == StudyKind::WidthSweep) {
    if (cfg.widths.empty()) throw ConfigError("width sweep: no widths");
    for (std::size_t hc : cfg.widths) {
      for (std::size_t ha : cfg.widths) {
        ModelConfig m = cfg.model;
        m.contrib_hidden = hc;
        m.affect_hidden = ha;
        variants.push_back({"H_contrib=" + std::to_string(hc) + ",H_affect=" + std::to_string(ha), T, m});
      }
    }
  } else {
    ModelConfig base = cfg.model;
    base.use_embedding = true;
    base.use_attributes = true;
    ModelConfig ablated = base;
    if (kind == StudyKind::NoEmbedding) ablated.use_embedding = false;
    else ablated.use_attributes = false;
    variants.push_back({"full", T, base});
    variants.push_back({std::string(to_string(kind)), T, ablated});
  }
  report.rows = parallel_map(variants.size(), cfg.jobs, [&](std::size_t i) { return run_variant(variants[i], ds, cfg); });
  return report;
}

void write_study(const StudyReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream os;
  os << "variant,window_s,windows,contrib_hidden,affect_hidden,embedding,attributes,n_test,acc,f1_macro,f1_weighted,"
        "mse,mean_alpha,epochs,best_epoch,stop_reason\n";
  for (const auto& r : report.rows) {
    os << r.variant << ',' << io::fmt_g(r.window_s, 6) << ',' << r.windows << ',' << r.contrib_hidden << ','
       << r.affect_hidden << ',' << (r.use_embedding ? 1 : 0) << ',' << (r.use_attributes ? 1 : 0) << ',' << r.test.n
       << ',' << io::fmt_f(r.test.acc, 6) << ',' << io::fmt_f(r.test.f1_macro, 6) << ','
       << io::fmt_f(r.test.f1_weighted, 6) << ',' << io::fmt_f(r.test.mse, 6) << ',' << io::fmt_f(r.mean_alpha, 6)
       << ',' << r.epochs << ',' << r.best_epoch << ',' << r.stop_reason << '\n';
  }
  const std::string name = "study_" + std::string(to_string(report.kind));
  io::write_text(dir / (name + ".csv"), os.str());

  if (report.kind == StudyKind::WidthSweep) {
    // ContribNet width down the rows, AffectNet width across.
    std::vector<std::size_t> hc, ha;
    std::map<std::pair<std::size_t, std::size_t>, double> acc;
    for (const auto& r : report.rows) {
      if (std::find(hc.begin(), hc.end(), r.contrib_hidden) == hc.end()) hc.push_back(r.contrib_hidden);
      if (std::find(ha.begin(), ha.end(), r.affect_hidden) == ha.end()) ha.push_back(r.affect_hidden);
      acc[{r.contrib_hidden, r.affect_hidden}] = r.test.acc;
    }
    std::ostringstream m;
    m << "contrib_hidden";
    for (std::size_t a : ha) m << ",affect_" << a;
    m << '\n';
    for (std::size_t c : hc) {
      m << c;
      for (std::size_t a : ha) {
        auto it = acc.find({c, a});
        m << ',' << (it == acc.end() ? std::string() : io::fmt_f(it->second, 6));
      }
      m << '\n';
    }
    io::write_text(dir / (name + "_acc_matrix.csv"), m.str());
  }
}

}  // namespace physio
