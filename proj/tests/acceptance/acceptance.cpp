// Acceptance gate: one PASS/FAIL/SKIP line per primary criterion.
#include "physio/dataset.hpp"
#include "physio/evaluation.hpp"
#include "physio/explain.hpp"
#include "physio/io.hpp"
#include "physio/model.hpp"
#include "physio/signal_prep.hpp"
#include "physio/symreg.hpp"
#include "physio/training.hpp"

#include "../support/fixtures.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <sstream>
#include <sys/wait.h>

using namespace physio;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Fail;
  std::string detail;
};

Outcome fail(std::string d) { return {Verdict::Fail, std::move(d)}; }
Outcome check(bool ok, std::string d) { return {ok ? Verdict::Pass : Verdict::Fail, std::move(d)}; }

std::string g(double v, int digits = 4) { return io::fmt_g(v, digits); }

// --- filter ---------------------------------------------------------------------

Outcome filter_correctness() {
  const double rate = 1000.0, fc = 5.0;
  double worst = 0.0, worst_dc = 0.0;
  for (int order : {2, 4}) {
    const auto c = design_lowpass({order, fc}, rate);
    worst_dc = std::max(worst_dc, std::abs(c.gain(0.0) - 1.0));
    // 20 log-spaced frequencies from fc / 100 to 10 fc.
    for (int i = 0; i < 20; ++i) {
      const double f = fc * std::pow(10.0, -2.0 + 3.0 * i / 19.0);
      const double want = 1.0 / std::sqrt(1.0 + std::pow(f / fc, 2.0 * order));
      worst = std::max(worst, std::abs(c.gain(f) - want) / want);
    }
  }
  // Lag of the cross-correlation peak between a passband tone and its
  // forward-backward filtered copy; the 3000-sample span holds six whole
  // periods so the correlation is symmetric about the true lag.
  const auto c = design_lowpass({4, fc}, rate);
  std::vector<double> x(4000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * 2.0 * i / rate);
  const auto y = filtfilt(c, x);
  int lag = 0;
  double best = -1e300;
  for (int l = -50; l <= 50; ++l) {
    double r = 0.0;
    for (int i = 500; i < 3500; ++i) r += x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i + l)];
    if (r > best) best = r, lag = l;
  }
  return check(worst <= 0.05 && worst_dc <= 1e-9 && lag == 0,
               "max rel magnitude error " + g(worst) + ", |DC-1| " + g(worst_dc) + ", lag " + std::to_string(lag));
}

// --- windowing ------------------------------------------------------------------

Outcome windowing() {
  Rng rng(2024);
  const double rates[] = {1, 4, 32, 64, 256, 700};
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto rate = static_cast<std::size_t>(rates[rng.index(6)]);
    const std::size_t T = 1 + rng.index(120);
    const std::size_t n = T * rate + rng.index(20 * T * rate);  // at least one window
    RawSignal s;
    s.rate_hz = static_cast<double>(rate);
    s.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.samples[i] = static_cast<double>(i);
    const WindowPlan plan{static_cast<double>(T)};
    const std::size_t want = n / (T * rate);  // integer floor(L / T)
    const auto w = segment(s, plan);
    bool ok = w.size() == want && plan.window_count(s.duration_s()) == want;
    std::size_t next = 0;
    for (std::size_t q = 0; ok && q < w.size(); ++q) {
      ok = w[q].index == q && w[q].start_s == static_cast<double>(q * T) && w[q].samples.size() == T * rate;
      for (std::size_t i = 0; ok && i < w[q].samples.size(); ++i) ok = w[q].samples[i] == static_cast<double>(next++);
    }
    ok = ok && next == want * T * rate;  // remainder dropped, prefix covered
    bad += !ok;
  }
  return check(bad == 0, std::to_string(100 - bad) + "/100 cases exact");
}

// --- metrics ----------------------------------------------------------------------

Outcome metric_oracles() {
  Rng rng(77);
  double worst = 0.0;
  std::size_t cases = 0;
  while (cases < 50) {
    std::size_t cm[3][3];
    std::vector<int> preds, labels;
    for (int t = 0; t < 3; ++t) {
      for (int p = 0; p < 3; ++p) {
        cm[t][p] = rng.index(7);
        for (std::size_t k = 0; k < cm[t][p]; ++k) labels.push_back(t), preds.push_back(p);
      }
    }
    if (labels.empty()) continue;
    ++cases;
    // Shuffle so the implementation cannot rely on order.
    for (std::size_t i = labels.size(); i > 1; --i) {
      const std::size_t j = rng.index(i);
      std::swap(labels[i - 1], labels[j]);
      std::swap(preds[i - 1], preds[j]);
    }
    double n = 0, diag = 0, sq = 0;
    double f1s[3], support[3];
    for (int t = 0; t < 3; ++t) {
      for (int p = 0; p < 3; ++p) {
        n += cm[t][p];
        sq += cm[t][p] * (t - p) * (t - p);
        if (t == p) diag += cm[t][p];
      }
    }
    for (int c = 0; c < 3; ++c) {
      const double tp = cm[c][c];
      double col = 0, row = 0;
      for (int o = 0; o < 3; ++o) col += cm[o][c], row += cm[c][o];
      const double prec = col > 0 ? tp / col : 0.0;
      const double rec = row > 0 ? tp / row : 0.0;
      f1s[c] = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
      support[c] = row;
    }
    const double macro = (f1s[0] + f1s[1] + f1s[2]) / 3.0;
    const double weighted = (f1s[0] * support[0] + f1s[1] * support[1] + f1s[2] * support[2]) / n;
    const auto m = metrics(preds, labels);
    for (double d : {m.acc - diag / n, m.mse - sq / n, m.f1_macro - macro, m.f1_weighted - weighted,
                     m.f1_per_class[0] - f1s[0], m.f1_per_class[1] - f1s[1], m.f1_per_class[2] - f1s[2]}) {
      worst = std::max(worst, std::abs(d));
    }
  }
  return check(worst <= 1e-12, "50 matrices, max abs deviation " + g(worst));
}

// --- gradients ----------------------------------------------------------------

Outcome gradient_suite() {
  auto t = testing::toy_problem(11);
  Rng rng(17);
  const auto gc = testing::gradient_check(t.model, t.subject, t.labels, 0.01, Mode::Train, 12, rng);
  return check(gc.checked >= 100 && gc.failed == 0 && gc.worst_rel < 1e-4,
               std::to_string(gc.checked) + " coordinates over " + std::to_string(gc.groups.size()) +
                   " parameter groups, worst rel error " + g(gc.worst_rel));
}

// --- triu -----------------------------------------------------------------------

Outcome triu_semantics() {
  Rng rng(5);
  std::size_t bad = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto xi = static_cast<Eigen::Index>(1 + rng.index(16));
    const auto m = static_cast<Eigen::Index>(1 + rng.index(8));
    Matrix B(xi, m);
    Vector a(xi);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < xi; ++i) a(i) = rng.normal();
    const Matrix beta = triu_encode(B, a);
    for (Eigen::Index q = 0; q < xi; ++q) {
      for (Eigen::Index f = 0; f < m; ++f) {
        double s = 0.0;
        for (Eigen::Index t = 0; t <= q; ++t) s += a(t) * B(t, f);
        bad += beta(q, f) != s;
      }
    }
  }
  return check(bad == 0, "100 instances, " + std::to_string(bad) + " mismatching entries");
}

// --- end to end -------------------------------------------------------------------

double held_out_accuracy(const Dataset& ds, ModelConfig mc, std::string* stop) {
  const Split sp = split(ds, SplitPolicy{});
  TrainConfig tc;  // 150-epoch cap, lr 1e-4
  auto r = train(make_model(ds.catalog, mc, training_attributes(ds, sp)), ds, sp, tc);
  if (stop) *stop = r.report.stop_reason + "@" + std::to_string(r.report.epochs.size());
  return evaluate(r.model, ds, sp.test).acc;
}

Outcome end_to_end() {
  SynthConfig sc;  // seed 7, 6 subjects, 60 windows
  const auto ds = synthesize(sc);
  ModelConfig full;
  ModelConfig noemb = full;
  noemb.use_embedding = false;
  ModelConfig noatt = full;
  noatt.use_attributes = false;
  std::string s1, s2, s3;
  const double a = held_out_accuracy(ds, full, &s1);
  const double b = held_out_accuracy(ds, noemb, &s2);
  const double c = held_out_accuracy(ds, noatt, &s3);
  return check(a >= 0.95 && b < a && c < a, "full " + io::fmt_f(a, 4) + " (" + s1 + "), no-embedding " +
                                                io::fmt_f(b, 4) + " (" + s2 + "), no-attributes " +
                                                io::fmt_f(c, 4) + " (" + s3 + ")");
}

// --- importance -----------------------------------------------------------------

Outcome importance_oracle() {
  FeatureCatalog cat;
  cat.attribute_names = {"a0"};
  cat.indicators = {Indicator::EDA};
  cat.feature_names = {{"x0", "x1"}};
  ModelConfig mc;
  mc.affect_hidden = 1;
  mc.affect_layers = 2;
  mc.use_embedding = false;
  mc.use_attributes = false;
  Model m = make_model(cat, mc);
  auto& net = m.affect[0];
  net.bn.bypass = true;
  net.layers[0].W << 3, 1;
  net.layers[0].b << 0;
  net.layers[1].W << 1;
  net.layers[1].b << 0;
  Rng rng(3);
  auto f = testing::random_subject(cat, 9, rng);
  for (auto& b : f.blocks) b = b.cwiseAbs().array() + 1.0;  // keep the hidden unit active
  rebuild_pf(f);
  const auto imp = importance(m, {f}, {Target::Affect, 0});
  const double e0 = std::abs(imp.scores(0) - 0.75), e1 = std::abs(imp.scores(1) - 0.25);

  // Normalisation on random models, every component.
  double worst_sum = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto t = testing::toy_problem(500 + s);
    for (Target target : {Target::Contrib, Target::Affect}) {
      for (std::size_t j = 0; j < 2; ++j) {
        worst_sum = std::max(worst_sum, std::abs(importance(t.model, {t.subject}, {target, j}).scores.sum() - 1.0));
      }
    }
  }
  return check(e0 <= 1e-6 && e1 <= 1e-6 && worst_sum <= 1e-9,
               "I = [" + g(imp.scores(0), 10) + ", " + g(imp.scores(1), 10) + "], max |sum - 1| " + g(worst_sum));
}

// --- symbolic regression ----------------------------------------------------------

Outcome symbolic_recovery() {
  Rng rng(42);
  Matrix X(500, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-3.0, 3.0);
  const SymRegConfig cfg;  // default budget, seed 7
  std::ostringstream d;
  bool ok = true;

  const auto f1 = evolve(X, X.col(0), cfg);
  const FrontEntry* c1 = nullptr;
  for (const auto& e : f1.entries) {
    if (e.complexity == 1) c1 = &e;
  }
  ok &= c1 && c1->loss < 1e-6;
  d << "x0: " << (c1 ? to_infix(c1->expr) + " loss " + g(c1->loss) : std::string("no complexity-1 entry"));

  Vector t(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) t(i) = 2.0 * X(i, 0) + std::sin(X(i, 1));
  const auto f2 = evolve(X, t, cfg);
  const FrontEntry* hit = nullptr;
  double hit_r2 = 0.0;
  for (const auto& e : f2.entries) {
    const double r2 = r_squared(evaluate_rows(e.expr, X), t);
    if (e.complexity <= 7 && r2 >= 0.99 && !hit) hit = &e, hit_r2 = r2;
  }
  ok &= hit != nullptr;
  d << "; 2x0+sin(x1): " << (hit ? to_infix(hit->expr) + " c=" + std::to_string(hit->complexity) + " R2 " + g(hit_r2, 6)
                                  : std::string("no entry with R2 >= 0.99 at complexity <= 7"));

  // Dominance-free: no entry is matched or beaten in loss by a simpler one.
  for (const auto* f : {&f1, &f2}) {
    for (std::size_t i = 0; i < f->entries.size(); ++i) {
      for (std::size_t j = 0; j < f->entries.size(); ++j) {
        if (i != j && f->entries[j].complexity <= f->entries[i].complexity && f->entries[j].loss <= f->entries[i].loss &&
            (f->entries[j].complexity < f->entries[i].complexity || f->entries[j].loss < f->entries[i].loss)) {
          ok = false;
          d << "; dominated entry c=" << f->entries[i].complexity;
        }
      }
    }
  }

  ParetoFront hand;
  const auto entry = [](std::size_t c, double loss, std::size_t vars) {
    FrontEntry e;
    e.complexity = c;
    e.loss = loss;
    e.vars = vars;
    return e;
  };
  hand.entries = {entry(1, 0.5, 1), entry(9, 0.10, 3), entry(11, 0.098, 2)};
  const std::size_t pick = hand.entries[select_formula(hand, 1e-12, 0.05)].complexity;
  ok &= pick == 11;
  d << "; worked selection picks c=" << pick;
  return check(ok, d.str());
}

Outcome planted_distillation() {
  SynthConfig sc;
  const auto ds = synthesize(sc);
  const std::size_t j = ds.catalog.index_of(Indicator::EDA);
  const std::string feature = "EDA_tonic_mean";
  const auto& names = ds.catalog.feature_names[j];
  const auto col = ds.catalog.k() + static_cast<std::size_t>(std::find(names.begin(), names.end(), feature) - names.begin());
  const Model m = testing::planted_network(ds.catalog, j, col);
  std::vector<SubjectFeatures> subjects;
  for (const auto& s : ds.subjects) subjects.push_back(s.features);
  const auto r = distill(m, subjects, j, DistillConfig{});
  bool uses = false;
  for (std::size_t v : r.law.expr.variables()) uses |= r.features.names[v] == feature;
  return check(r.r2 >= 0.99 && uses,
               "law " + to_infix(r.law.expr, r.features.names) + ", R2 " + g(r.r2, 6) + ", uses " + feature + ": " +
                   (uses ? "yes" : "no"));
}

// --- determinism through the CLI --------------------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism(const std::string& cli) {
  if (cli.empty()) return fail("no --cli path given");
  const auto root = testing::scratch_dir("acceptance_determinism");
  for (const char* run : {"a", "b"}) {
    const auto dir = root / run;
    fs::create_directories(dir);
    const std::string pre = "cd " + dir.string() + " && " + cli + " --seed 7 ";
    const std::string quiet = " > /dev/null 2>&1";
    if (shell(pre + "synth --out raw" + quiet) != 0 || shell(pre + "preprocess --in raw --out feat" + quiet) != 0 ||
        shell(pre + "train --features feat --out run --epochs 20" + quiet) != 0 ||
        shell(pre + "distill --features feat --model run/model.json --out laws --indicator EDA --generations 10" +
              quiet) != 0) {
      return fail(std::string("pipeline run ") + run + " failed");
    }
  }
  std::size_t compared = 0, differ = 0;
  std::string first;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "timing.json") continue;
    const auto rel = fs::relative(e.path(), root / "a");
    ++compared;
    if (!fs::exists(root / "b" / rel) || io::read_text(e.path()) != io::read_text(root / "b" / rel)) {
      ++differ;
      if (first.empty()) first = rel.string();
    }
  }
  return check(compared > 0 && differ == 0, std::to_string(compared) + " artifacts compared (timing.json excluded), " +
                                                std::to_string(differ) + " differ" +
                                                (first.empty() ? "" : " (first: " + first + ")"));
}

// --- optional full-data smoke -----------------------------------------------------

Outcome wesad_smoke() {
  const char* env = std::getenv("PHYSIOFORMER_DATA");
  if (!env || !fs::is_directory(env) || list_subjects(env).empty()) {
    return {Verdict::Skip, "PHYSIOFORMER_DATA does not point at converted wrist recordings"};
  }
  const auto run = [&](double T, double* majority) {
    PrepConfig prep;
    prep.plan.window_len_s = T;
    const Dataset ds = load(env, Device::Wrist, prep, 4);
    const Split sp = split(ds, SplitPolicy{});
    std::size_t counts[3] = {0, 0, 0}, n = 0;
    for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
      for (std::size_t q : sp.test[s]) ++counts[ds.subjects[s].labels[q]], ++n;
    }
    if (majority) *majority = static_cast<double>(std::max({counts[0], counts[1], counts[2]})) / static_cast<double>(n);
    ModelConfig mc;  // H = 100
    auto r = train(make_model(ds.catalog, mc, training_attributes(ds, sp)), ds, sp, TrainConfig{});
    return evaluate(r.model, ds, sp.test).acc;
  };
  double majority = 0.0;
  const double a30 = run(30.0, &majority);
  const double a120 = run(120.0, nullptr);
  return check(a30 > majority && a30 > a120, "T=30 " + io::fmt_f(a30, 4) + ", T=120 " + io::fmt_f(a120, 4) +
                                                 ", majority baseline " + io::fmt_f(majority, 4));
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") cli = std::filesystem::absolute(argv[i + 1]).string();
  }

  struct Criterion {
    const char* name;
    double budget_s;  // 0: no runtime bound
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"filter correctness", 1.0, filter_correctness},
      {"windowing", 1.0, windowing},
      {"metric oracles", 1.0, metric_oracles},
      {"gradient suite", 30.0, gradient_suite},
      {"triu semantics", 1.0, triu_semantics},
      {"end-to-end learning", 300.0, end_to_end},
      {"importance", 0.0, importance_oracle},
      {"symbolic recovery", 180.0, symbolic_recovery},
      {"planted-network distillation", 120.0, planted_distillation},
      {"determinism", 0.0, [&] { return determinism(cli); }},
      {"full-data smoke (optional)", 0.0, wesad_smoke},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.verdict == Verdict::Pass && c.budget_s > 0.0 && secs > c.budget_s) {
      o = fail(o.detail + "; over the " + g(c.budget_s) + " s budget");
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Skip ? "SKIP" : "FAIL";
    std::printf("%s  %-30s %8.2f s  %s\n", tag, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.verdict == Verdict::Fail;
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
