// Command-line driver: synth, preprocess, train, evaluate, study, explain,
// distill, report.
#include "physio/dataset.hpp"
#include "physio/evaluation.hpp"
#include "physio/explain.hpp"
#include "physio/io.hpp"
#include "physio/model.hpp"
#include "physio/symreg.hpp"
#include "physio/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace physio;

namespace {

constexpr const char* kVersion = "1.0.0";

// Fully resolved configuration of one invocation (config file, then flags).
struct RunConfig {
  std::string command;
  std::uint64_t seed = 7;
  Device device = Device::Wrist;
  double window_s = 30.0;
  std::size_t contrib_hidden = 100;
  std::size_t affect_hidden = 100;
  double lambda = 0.01;
  bool embedding = true;
  bool attributes = true;
  int jobs = 1;
  int filter_order = 4;
  TrainConfig train;
  SplitPolicy split;
  SymRegConfig symreg;
  std::size_t top_k = 10;
  std::map<std::string, std::string> paths;
  json extra = json::object();  // subcommand-specific settings

  PrepConfig prep() const {
    PrepConfig p;
    p.plan.window_len_s = window_s;
    p.filter_order = filter_order;
    return p;
  }
  ModelConfig model() const {
    ModelConfig m;
    m.contrib_hidden = contrib_hidden;
    m.affect_hidden = affect_hidden;
    m.lambda = lambda;
    m.use_embedding = embedding;
    m.use_attributes = attributes;
    m.seed = seed;
    return m;
  }
  TrainConfig training() const {
    TrainConfig t = train;
    t.lambda = lambda;
    t.seed = seed;
    return t;
  }
  SplitPolicy splitting() const {
    SplitPolicy s = split;
    s.seed = seed;
    return s;
  }
  SymRegConfig symbolic() const {
    SymRegConfig s = symreg;
    s.seed = seed;
    s.jobs = jobs;
    return s;
  }

  json to_json() const {
    json j;
    j["version"] = kVersion;
    j["command"] = command;
    j["seed"] = seed;
    j["device"] = std::string(to_string(device));
    j["window"] = window_s;
    j["contrib_hidden"] = contrib_hidden;
    j["affect_hidden"] = affect_hidden;
    j["lambda"] = lambda;
    j["embedding"] = embedding;
    j["attributes"] = attributes;
    j["jobs"] = jobs;
    j["filter_order"] = filter_order;
    j["train"] = {{"max_epochs", train.max_epochs}, {"lr", train.lr},
                  {"step_epochs", train.step_epochs}, {"step_gamma", train.step_gamma},
                  {"patience", train.patience}, {"min_delta", train.min_delta},
                  {"early_stopping", train.early_stopping}, {"shuffle", train.shuffle_each_epoch},
                  {"rms_decay", train.rms_decay}, {"rms_eps", train.rms_eps}};
    j["split"] = {{"kind", split.kind == SplitPolicy::Kind::Stratified ? "stratified" : "loso"},
                  {"train_fraction", split.train_fraction},
                  {"held_out", split.held_out_subject}};
    j["symreg"] = {{"population", symreg.population}, {"generations", symreg.generations},
                   {"tournament", symreg.tournament}, {"crossover", symreg.crossover},
                   {"mutation", symreg.mutation}, {"const_jitter", symreg.const_jitter},
                   {"const_opt_steps", symreg.const_opt_steps}, {"max_complexity", symreg.max_complexity},
                   {"delta", symreg.delta}, {"tau", symreg.tau}};
    j["top_k"] = top_k;
    j["paths"] = paths;
    if (!extra.empty()) j["options"] = extra;
    return j;
  }
};

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok |= k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

void apply_config_file(RunConfig& rc, const fs::path& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config " + path.string() + ": top level must be an object");
  check_keys(j, {"seed", "device", "window", "hidden", "contrib_hidden", "affect_hidden", "lambda", "embedding",
                 "attributes", "jobs", "filter_order", "train", "split", "symreg", "top_k"},
             path.string());
  try {
    take(j, "seed", rc.seed);
    if (j.contains("device")) rc.device = parse_device(j["device"].get<std::string>());
    take(j, "window", rc.window_s);
    if (j.contains("hidden")) rc.contrib_hidden = rc.affect_hidden = j["hidden"].get<std::size_t>();
    take(j, "contrib_hidden", rc.contrib_hidden);
    take(j, "affect_hidden", rc.affect_hidden);
    take(j, "lambda", rc.lambda);
    take(j, "embedding", rc.embedding);
    take(j, "attributes", rc.attributes);
    take(j, "jobs", rc.jobs);
    take(j, "filter_order", rc.filter_order);
    take(j, "top_k", rc.top_k);
    if (j.contains("train")) {
      const auto& t = j["train"];
      check_keys(t, {"max_epochs", "lr", "step_epochs", "step_gamma", "patience", "min_delta", "early_stopping",
                     "shuffle", "rms_decay", "rms_eps"},
                 path.string() + " [train]");
      take(t, "max_epochs", rc.train.max_epochs);
      take(t, "lr", rc.train.lr);
      take(t, "step_epochs", rc.train.step_epochs);
      take(t, "step_gamma", rc.train.step_gamma);
      take(t, "patience", rc.train.patience);
      take(t, "min_delta", rc.train.min_delta);
      take(t, "early_stopping", rc.train.early_stopping);
      take(t, "shuffle", rc.train.shuffle_each_epoch);
      take(t, "rms_decay", rc.train.rms_decay);
      take(t, "rms_eps", rc.train.rms_eps);
    }
    if (j.contains("split")) {
      const auto& s = j["split"];
      check_keys(s, {"kind", "train_fraction", "held_out"}, path.string() + " [split]");
      if (s.contains("kind")) {
        const auto k = s["kind"].get<std::string>();
        if (k == "stratified") rc.split.kind = SplitPolicy::Kind::Stratified;
        else if (k == "loso") rc.split.kind = SplitPolicy::Kind::LeaveOneSubjectOut;
        else throw ConfigError("split kind must be 'stratified' or 'loso'");
      }
      take(s, "train_fraction", rc.split.train_fraction);
      take(s, "held_out", rc.split.held_out_subject);
    }
    if (j.contains("symreg")) {
      const auto& s = j["symreg"];
      check_keys(s, {"population", "generations", "tournament", "crossover", "mutation", "const_jitter",
                     "const_opt_steps", "max_complexity", "delta", "tau"},
                 path.string() + " [symreg]");
      take(s, "population", rc.symreg.population);
      take(s, "generations", rc.symreg.generations);
      take(s, "tournament", rc.symreg.tournament);
      take(s, "crossover", rc.symreg.crossover);
      take(s, "mutation", rc.symreg.mutation);
      take(s, "const_jitter", rc.symreg.const_jitter);
      take(s, "const_opt_steps", rc.symreg.const_opt_steps);
      take(s, "max_complexity", rc.symreg.max_complexity);
      take(s, "delta", rc.symreg.delta);
      take(s, "tau", rc.symreg.tau);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
}

// Flags shared by every subcommand; unset ones leave the config value alone.
struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> device;
  std::optional<double> window;
  std::optional<std::size_t> hidden;
  std::optional<double> lambda;
  bool no_embedding = false;
  bool no_attributes = false;
  std::optional<int> jobs;
};

RunConfig resolve(const CommonFlags& f, const std::string& command) {
  RunConfig rc;
  rc.command = command;
  if (!f.config.empty()) apply_config_file(rc, f.config);
  if (f.seed) rc.seed = *f.seed;
  if (f.device) rc.device = parse_device(*f.device);
  if (f.window) rc.window_s = *f.window;
  if (f.hidden) rc.contrib_hidden = rc.affect_hidden = *f.hidden;
  if (f.lambda) rc.lambda = *f.lambda;
  if (f.no_embedding) rc.embedding = false;
  if (f.no_attributes) rc.attributes = false;
  if (f.jobs) rc.jobs = *f.jobs;
  if (!(rc.window_s > 0.0)) throw ConfigError("--window must be positive");
  if (rc.contrib_hidden == 0 || rc.affect_hidden == 0) throw ConfigError("--hidden must be positive");
  if (!(rc.lambda >= 0.0)) throw ConfigError("--lambda must be >= 0");
  if (rc.jobs < 1) throw ConfigError("--jobs must be >= 1");
  return rc;
}

// Progress lines go to stderr and, without timestamps, into <out>/log.txt.
class Log {
 public:
  void operator()(const std::string& line) {
    std::cerr << line << '\n';
    text_ += line + '\n';
  }
  void save(const fs::path& dir) const { io::write_text(dir / "log.txt", text_); }

 private:
  std::string text_;
};

void write_run_config(const RunConfig& rc, const fs::path& dir) {
  io::write_text(dir / "run_config.json", rc.to_json().dump(2) + "\n");
}

void write_timing(const fs::path& dir, double seconds) {
  json j;
  j["wall_time_s"] = seconds;
  io::write_text(dir / "timing.json", j.dump(2) + "\n");
}

double since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path need_dir(const std::string& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_directory(p)) throw InputError(std::string(flag) + ": no such directory: " + p);
  return p;
}

fs::path out_dir(const std::string& p) {
  if (p.empty()) throw ConfigError("--out is required");
  fs::create_directories(p);
  return p;
}

std::vector<std::vector<std::size_t>> all_windows(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> w(ds.subjects.size());
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    w[s].resize(ds.subjects[s].labels.size());
    for (std::size_t q = 0; q < w[s].size(); ++q) w[s][q] = q;
  }
  return w;
}

std::vector<SubjectFeatures> features_of(const Dataset& ds) {
  std::vector<SubjectFeatures> out;
  for (const auto& s : ds.subjects) out.push_back(s.features);
  return out;
}

// --- subcommands ---------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t subjects = 6;
  std::size_t windows = 60;
  double jitter = 0.3;
};

void cmd_synth(const RunConfig& rc0, const SynthArgs& a) {
  RunConfig rc = rc0;
  const fs::path out = out_dir(a.out);
  rc.paths["out"] = a.out;
  rc.extra = {{"subjects", a.subjects}, {"windows", a.windows}, {"jitter", a.jitter}};
  SynthConfig sc;
  sc.seed = rc.seed;
  sc.subjects = a.subjects;
  sc.windows = a.windows;
  sc.device = rc.device;
  sc.window_len_s = rc.window_s;
  sc.state_jitter = a.jitter;
  Log log;
  for (const auto& rec : synthesize_recordings(sc)) {
    write_recording(out, rec, rc.device);
    log("wrote " + rec.id);
  }
  write_run_config(rc, out);
  log.save(out);
}

void cmd_preprocess(const RunConfig& rc0, const std::string& in, const std::string& out_s) {
  RunConfig rc = rc0;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path src = need_dir(in, "--in");
  const fs::path out = out_dir(out_s);
  rc.paths = {{"in", in}, {"out", out_s}};
  Log log;
  const Dataset ds = load(src, rc.device, rc.prep(), rc.jobs);
  save_features(ds, out);
  log("preprocessed " + std::to_string(ds.subjects.size()) + " subjects, " + std::to_string(ds.total_windows()) +
      " windows, catalog " + hex64(ds.catalog.hash()));
  write_run_config(rc, out);
  log.save(out);
  write_timing(out, since(t0));
}

void write_train_log(const TrainReport& r, const fs::path& path) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,train_ce,train_reg,val_loss,val_acc\n";
  for (const auto& e : r.epochs) {
    os << e.epoch << ',' << io::fmt_g(e.lr, 10) << ',' << io::fmt_g(e.train_loss, 12) << ','
       << io::fmt_g(e.train_ce, 12) << ',' << io::fmt_g(e.train_reg, 12) << ',' << io::fmt_g(e.val_loss, 12) << ','
       << io::fmt_g(e.val_acc, 12) << '\n';
  }
  io::write_text(path, os.str());
}

void write_split(const Dataset& ds, const Split& sp, const fs::path& path) {
  json j = json::object();
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    j[ds.subjects[s].subject_id] = {{"train", sp.train[s]}, {"test", sp.test[s]}};
  }
  io::write_text(path, j.dump(2) + "\n");
}

void cmd_train(const RunConfig& rc0, const std::string& features, const std::string& out_s,
               std::optional<std::size_t> epochs) {
  RunConfig rc = rc0;
  if (epochs) rc.train.max_epochs = *epochs;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = out_dir(out_s);
  rc.paths = {{"features", features}, {"out", out_s}};
  Log log;
  const Dataset ds = load_features(need_dir(features, "--features"));
  const Split sp = split(ds, rc.splitting());
  Model model = make_model(ds.catalog, rc.model(), training_attributes(ds, sp));
  log("training " + std::to_string(parameter_count(model)) + " parameters on " + std::to_string(sp.train_count()) +
      " windows, validating on " + std::to_string(sp.test_count()));
  const TrainResult res = train(std::move(model), ds, sp, rc.training());
  log("stopped: " + res.report.stop_reason + " after " + std::to_string(res.report.epochs.size()) +
      " epochs, best epoch " + std::to_string(res.report.best_epoch) + ", val loss " +
      io::fmt_g(res.report.best_val_loss, 6));
  save_checkpoint(res.model, out / "model.json");
  write_train_log(res.report, out / "train_log.csv");
  write_split(ds, sp, out / "split.json");
  json order = res.report.subject_order;
  io::write_text(out / "subject_order.json", order.dump() + "\n");
  if (sp.test_count() > 0) {
    const MetricsReport m = evaluate(res.model, ds, sp.test);
    io::write_text(out / "metrics.json", metrics_json(m));
    log("held-out accuracy " + io::fmt_f(m.acc, 4) + ", macro F1 " + io::fmt_f(m.f1_macro, 4) + ", MSE " +
        io::fmt_f(m.mse, 4));
  }
  write_run_config(rc, out);
  log.save(out);
  write_timing(out, since(t0));
}

void cmd_evaluate(const RunConfig& rc0, const std::string& features, const std::string& model_path,
                  const std::string& out_s, const std::string& on) {
  RunConfig rc = rc0;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = out_dir(out_s);
  rc.paths = {{"features", features}, {"model", model_path}, {"out", out_s}};
  rc.extra = {{"on", on}};
  Log log;
  const Dataset ds = load_features(need_dir(features, "--features"));
  const Model model = load_checkpoint(model_path, &ds.catalog);
  std::vector<std::vector<std::size_t>> windows;
  if (on == "all") {
    windows = all_windows(ds);
  } else {
    const Split sp = split(ds, rc.splitting());
    windows = on == "train" ? sp.train : sp.test;
  }
  const PooledPredictions p = predict(model, ds, windows);
  const MetricsReport m = metrics(p.preds, p.labels);
  io::write_text(out / "metrics.json", metrics_json(m));
  std::ostringstream os;
  os << "subject,window,label,prediction\n";
  for (std::size_t i = 0; i < p.preds.size(); ++i) {
    os << p.subjects[i] << ',' << p.windows[i] << ',' << p.labels[i] << ',' << p.preds[i] << '\n';
  }
  io::write_text(out / "predictions.csv", os.str());
  log("accuracy " + io::fmt_f(m.acc, 4) + " on " + std::to_string(m.n) + " windows (" + on + ")");
  write_run_config(rc, out);
  log.save(out);
  write_timing(out, since(t0));
}

void cmd_study(const RunConfig& rc0, const std::string& in, const std::string& kind, const std::string& out_s,
               std::optional<std::size_t> epochs) {
  RunConfig rc = rc0;
  if (epochs) rc.train.max_epochs = *epochs;
  const auto t0 = std::chrono::steady_clock::now();
  const StudyKind k = parse_study(kind);
  const fs::path src = need_dir(in, "--in");
  const fs::path out = out_dir(out_s);
  rc.paths = {{"in", in}, {"out", out_s}};
  rc.extra = {{"kind", kind}};
  Log log;
  std::vector<SubjectRecording> recs;
  for (const auto& id : list_subjects(src)) recs.push_back(read_recording(src / id, rc.device));
  StudyConfig sc;
  sc.device = rc.device;
  sc.prep = rc.prep();
  sc.model = rc.model();
  sc.train = rc.training();
  sc.split = rc.splitting();
  sc.jobs = rc.jobs;
  const StudyReport report = run_study(k, recs, sc);
  write_study(report, out);
  for (const auto& r : report.rows) log(r.variant + ": acc " + io::fmt_f(r.test.acc, 4));
  write_run_config(rc, out);
  log.save(out);
  write_timing(out, since(t0));
}

void cmd_explain(const RunConfig& rc0, const std::string& features, const std::string& model_path,
                 const std::string& out_s, std::optional<std::size_t> top_k) {
  RunConfig rc = rc0;
  if (top_k) rc.top_k = *top_k;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = out_dir(out_s);
  rc.paths = {{"features", features}, {"model", model_path}, {"out", out_s}};
  Log log;
  const Dataset ds = load_features(need_dir(features, "--features"));
  const Model model = load_checkpoint(model_path, &ds.catalog);
  const auto subjects = features_of(ds);
  std::vector<ImportanceScores> all;
  json selection = json::object();
  for (Target t : {Target::Contrib, Target::Affect}) {
    if (t == Target::Contrib && !model.config.use_embedding) continue;
    for (std::size_t j = 0; j < model.indicators(); ++j) {
      const Component c{t, j};
      ImportanceScores s = importance(model, subjects, c);
      if (s.degenerate) log("warning: " + component_name(model, c) + " has an all-zero gradient; scores are uniform");
      write_importance(model, s, out);
      selection[component_name(model, c)] = select_top_k(s, rc.top_k).names;
      all.push_back(std::move(s));
    }
  }
  write_importance_matrix(model, all, out / "importance_matrix.csv");
  io::write_text(out / "top_features.json", selection.dump(2) + "\n");
  log("explained " + std::to_string(all.size()) + " components");
  write_run_config(rc, out);
  log.save(out);
  write_timing(out, since(t0));
}

struct DistillArgs {
  std::string features, model, out, target = "theta";
  std::vector<std::string> indicators;
  std::optional<std::size_t> generations, population, top_k;
};

void cmd_distill(const RunConfig& rc0, const DistillArgs& a) {
  RunConfig rc = rc0;
  if (a.generations) rc.symreg.generations = *a.generations;
  if (a.population) rc.symreg.population = *a.population;
  if (a.top_k) rc.top_k = *a.top_k;
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = out_dir(a.out);
  rc.paths = {{"features", a.features}, {"model", a.model}, {"out", a.out}};
  rc.extra = {{"target", a.target}, {"indicators", a.indicators}};
  Log log;
  const Dataset ds = load_features(need_dir(a.features, "--features"));
  const Model model = load_checkpoint(a.model, &ds.catalog);
  DistillConfig dc;
  dc.symreg = rc.symbolic();
  dc.top_k = rc.top_k;
  if (a.target == "alpha") dc.target = Target::Contrib;
  else if (a.target != "theta") throw ConfigError("--target must be theta or alpha");
  std::vector<std::size_t> which;
  if (a.indicators.empty()) {
    for (std::size_t j = 0; j < model.indicators(); ++j) which.push_back(j);
  } else {
    for (const auto& name : a.indicators) which.push_back(model.catalog.index_of(parse_indicator(name)));
  }
  const auto subjects = features_of(ds);
  for (std::size_t j : which) {
    const LawReport r = distill(model, subjects, j, dc);
    write_law_report(r, out);
    log(r.indicator + ": " + to_infix(r.law.expr, r.features.names) + "  (complexity " +
        std::to_string(r.law.complexity) + ", R2 " + io::fmt_f(r.r2, 4) + ")");
  }
  write_run_config(rc, out);
  log.save(out);
  write_timing(out, since(t0));
}

// Collects the outputs found under dir into report.md.
void cmd_report(const std::string& dir_s) {
  const fs::path dir = need_dir(dir_s, "--dir");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::ostringstream md;
  md << "# Run report\n\n";
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    const std::string rel = fs::relative(f, dir).string();
    if (name == "metrics.json") {
      const json m = json::parse(io::read_text(f));
      md << "## " << rel << "\n\nACC " << io::fmt_f(m["acc"].get<double>(), 4) << ", macro F1 "
         << io::fmt_f(m["f1_macro"].get<double>(), 4) << ", weighted F1 " << io::fmt_f(m["f1_weighted"].get<double>(), 4)
         << ", MSE " << io::fmt_f(m["mse"].get<double>(), 4) << " over " << m["n"].get<std::size_t>()
         << " windows\n\n";
    } else if (name.starts_with("study_") && f.extension() == ".csv") {
      md << "## " << rel << "\n\n```\n" << io::read_text(f) << "```\n\n";
    } else if (name.starts_with("laws_") && f.extension() == ".json") {
      const json l = json::parse(io::read_text(f));
      md << "## " << rel << "\n\n" << l["law"]["infix_named"].get<std::string>() << "\n\ncomplexity "
         << l["law"]["complexity"].get<std::size_t>() << ", R2 " << io::fmt_f(l["law"]["r2"].get<double>(), 4)
         << "\n\n";
    }
  }
  io::write_text(dir / "report.md", md.str());
  std::cout << md.str();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  if (dynamic_cast<const TrainingFault*>(&e)) return 3;
  if (dynamic_cast<const DistillationError*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affective-state learning from wearable physiological signals"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.fallthrough();

  CommonFlags f;
  app.add_option("--config", f.config, "JSON configuration file (flags override it)");
  app.add_option("--seed", f.seed, "Seed for data synthesis, splits, initialisation and search");
  app.add_option("--device", f.device, "wrist or chest")->check(CLI::IsMember({"wrist", "chest"}));
  app.add_option("--window", f.window, "Window length T in seconds")->check(CLI::IsMember({30.0, 60.0, 90.0, 120.0}));
  app.add_option("--hidden", f.hidden, "Hidden width H of ContribNet and AffectNet")->check(CLI::PositiveNumber);
  app.add_option("--lambda", f.lambda, "Contribution regulariser weight")->check(CLI::NonNegativeNumber);
  app.add_flag("--no-embedding", f.no_embedding, "Bypass the feature embedding (alpha fixed at 1)");
  app.add_flag("--no-attributes", f.no_attributes, "Drop subject attributes from the inputs");
  app.add_option("--jobs", f.jobs, "Worker cap")->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* s_synth = app.add_subcommand("synth", "Write a synthetic cohort in the neutral recording format");
  s_synth->add_option("--out", synth.out, "Output directory")->required();
  s_synth->add_option("--subjects", synth.subjects, "Number of subjects")->check(CLI::PositiveNumber);
  s_synth->add_option("--windows", synth.windows, "Windows per subject")->check(CLI::PositiveNumber);
  s_synth->add_option("--jitter", synth.jitter, "Window-to-window state variability")->check(CLI::NonNegativeNumber);

  std::string pre_in, pre_out;
  auto* s_pre = app.add_subcommand("preprocess", "Filter, window and extract features");
  s_pre->add_option("--in", pre_in, "Recording root (default $PHYSIOFORMER_DATA)")->envname("PHYSIOFORMER_DATA");
  s_pre->add_option("--out", pre_out, "Feature directory")->required();

  std::string tr_features, tr_out;
  std::optional<std::size_t> tr_epochs;
  auto* s_train = app.add_subcommand("train", "Train a model on extracted features");
  s_train->add_option("--features", tr_features, "Feature directory")->required();
  s_train->add_option("--out", tr_out, "Run directory")->required();
  s_train->add_option("--epochs", tr_epochs, "Epoch cap")->check(CLI::PositiveNumber);

  std::string ev_features, ev_model, ev_out, ev_on = "test";
  auto* s_eval = app.add_subcommand("evaluate", "Score a checkpoint");
  s_eval->add_option("--features", ev_features, "Feature directory")->required();
  s_eval->add_option("--model", ev_model, "Checkpoint (model.json)")->required();
  s_eval->add_option("--out", ev_out, "Output directory")->required();
  s_eval->add_option("--on", ev_on, "Windows to score")->check(CLI::IsMember({"test", "train", "all"}));

  std::string st_in, st_kind, st_out;
  std::optional<std::size_t> st_epochs;
  auto* s_study = app.add_subcommand("study", "Window, width and ablation studies");
  s_study->add_option("--in", st_in, "Recording root (default $PHYSIOFORMER_DATA)")->envname("PHYSIOFORMER_DATA");
  s_study->add_option("--kind", st_kind, "window_sweep | width_sweep | no_embedding | no_attributes")->required();
  s_study->add_option("--out", st_out, "Output directory")->required();
  s_study->add_option("--epochs", st_epochs, "Epoch cap")->check(CLI::PositiveNumber);

  std::string ex_features, ex_model, ex_out;
  std::optional<std::size_t> ex_topk;
  auto* s_explain = app.add_subcommand("explain", "Gradient feature importance");
  s_explain->add_option("--features", ex_features, "Feature directory")->required();
  s_explain->add_option("--model", ex_model, "Checkpoint (model.json)")->required();
  s_explain->add_option("--out", ex_out, "Output directory")->required();
  s_explain->add_option("--top-k", ex_topk, "Features kept per component")->check(CLI::PositiveNumber);

  DistillArgs da;
  auto* s_distill = app.add_subcommand("distill", "Symbolic laws for each indicator");
  s_distill->add_option("--features", da.features, "Feature directory")->required();
  s_distill->add_option("--model", da.model, "Checkpoint (model.json)")->required();
  s_distill->add_option("--out", da.out, "Output directory")->required();
  s_distill->add_option("--indicator", da.indicators, "Indicator(s) to distill, default all");
  s_distill->add_option("--target", da.target, "theta or alpha")->check(CLI::IsMember({"theta", "alpha"}));
  s_distill->add_option("--generations", da.generations, "GP generations")->check(CLI::PositiveNumber);
  s_distill->add_option("--population", da.population, "GP population")->check(CLI::PositiveNumber);
  s_distill->add_option("--top-k", da.top_k, "Selected features")->check(CLI::PositiveNumber);

  std::string rp_dir;
  auto* s_report = app.add_subcommand("report", "Summarise the outputs under a directory");
  s_report->add_option("--dir", rp_dir, "Directory to summarise")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (s_report->parsed()) {
      cmd_report(rp_dir);
      return 0;
    }
    CLI::App* sub = app.get_subcommands().front();
    const RunConfig rc = resolve(f, sub->get_name());
    if (s_synth->parsed()) cmd_synth(rc, synth);
    else if (s_pre->parsed()) cmd_preprocess(rc, pre_in, pre_out);
    else if (s_train->parsed()) cmd_train(rc, tr_features, tr_out, tr_epochs);
    else if (s_eval->parsed()) cmd_evaluate(rc, ev_features, ev_model, ev_out, ev_on);
    else if (s_study->parsed()) cmd_study(rc, st_in, st_kind, st_out, st_epochs);
    else if (s_explain->parsed()) cmd_explain(rc, ex_features, ex_model, ex_out, ex_topk);
    else if (s_distill->parsed()) cmd_distill(rc, da);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
