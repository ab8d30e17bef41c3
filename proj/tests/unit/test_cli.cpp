#include "physio/dataset.hpp"
#include "physio/io.hpp"
#include "physio/model.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <sys/wait.h>

using namespace physio;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

Run cli(const std::string& args, const fs::path& work) {
  const auto err = work / "stderr.txt";
  const std::string cmd = std::string(PHYSIOFORMER_CLI) + " " + args + " 2> " + err.string() + " > /dev/null";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = fs::exists(err) ? io::read_text(err) : "";
  return r;
}

fs::path raw_cohort(const fs::path& work, std::size_t subjects = 2, std::size_t windows = 8) {
  const auto raw = work / "raw";
  REQUIRE(cli("--seed 3 synth --out " + raw.string() + " --subjects " + std::to_string(subjects) + " --windows " +
                  std::to_string(windows),
              work)
              .code == 0);
  return raw;
}

}  // namespace

TEST_CASE("cli: preprocess writes a stable manifest") {
  const auto work = testing::scratch_dir("cli_pre");
  const auto raw = raw_cohort(work);
  REQUIRE(cli("preprocess --in " + raw.string() + " --out " + (work / "a").string(), work).code == 0);
  REQUIRE(cli("preprocess --in " + raw.string() + " --out " + (work / "b").string(), work).code == 0);
  CHECK(io::read_text(work / "a" / "manifest.json") == io::read_text(work / "b" / "manifest.json"));
  CHECK(io::read_text(work / "a" / "run_config.json") != "");
  CHECK(fs::exists(work / "a" / "log.txt"));

  // T = 60 s halves the 8 windows of 30 s.
  REQUIRE(cli("--window 60 preprocess --in " + raw.string() + " --out " + (work / "c").string(), work).code == 0);
  CHECK(load_features(work / "c").total_windows() == 8);
  CHECK(load_features(work / "a").total_windows() == 16);
}

TEST_CASE("cli: input errors exit with code 2") {
  const auto work = testing::scratch_dir("cli_err");
  const auto raw = raw_cohort(work);
  fs::remove(raw / "S02" / "labels.csv");
  const auto r = cli("preprocess --in " + raw.string() + " --out " + (work / "f").string(), work);
  CHECK(r.code == 2);
  CHECK(r.err.find("labels.csv") != std::string::npos);

  io::write_text(work / "bad.json", "{\"seed\": 1, \"windw\": 30}");
  const auto c = cli("--config " + (work / "bad.json").string() + " preprocess --in " + raw.string() + " --out " +
                         (work / "g").string(),
                     work);
  CHECK(c.code == 2);
  CHECK(c.err.find("windw") != std::string::npos);

  CHECK(cli("train --features " + (work / "nowhere").string() + " --out " + (work / "h").string(), work).code == 2);
  CHECK(cli("--window 45 preprocess --in " + raw.string() + " --out " + (work / "i").string(), work).code == 2);
}

TEST_CASE("cli: train twice with one seed gives identical checkpoints") {
  const auto work = testing::scratch_dir("cli_train");
  const auto raw = raw_cohort(work);
  const auto feat = (work / "feat").string();
  REQUIRE(cli("preprocess --in " + raw.string() + " --out " + feat, work).code == 0);
  for (const char* run : {"r1", "r2"}) {
    REQUIRE(cli("--seed 7 --hidden 8 train --features " + feat + " --out " + (work / run).string() + " --epochs 3",
                work)
                .code == 0);
  }
  CHECK(io::read_text(work / "r1" / "model.json") == io::read_text(work / "r2" / "model.json"));
  CHECK(io::read_text(work / "r1" / "train_log.csv") == io::read_text(work / "r2" / "train_log.csv"));
  CHECK(io::read_text(work / "r1" / "run_config.json") != io::read_text(work / "r2" / "run_config.json"));  // paths
  CHECK(fs::exists(work / "r1" / "metrics.json"));
  CHECK(fs::exists(work / "r1" / "timing.json"));

  REQUIRE(cli("explain --features " + feat + " --model " + (work / "r1" / "model.json").string() + " --out " +
                  (work / "ex").string(),
              work)
              .code == 0);
  CHECK(fs::exists(work / "ex" / "importance_affectnet_EDA.csv"));
  CHECK(fs::exists(work / "ex" / "importance_contribnet_EDA.csv"));
  CHECK(fs::exists(work / "ex" / "importance_matrix.csv"));

  REQUIRE(cli("distill --features " + feat + " --model " + (work / "r1" / "model.json").string() + " --out " +
                  (work / "ds").string() + " --indicator EDA --generations 3 --population 64",
              work)
              .code == 0);
  CHECK(fs::exists(work / "ds" / "laws_EDA.json"));
  CHECK(fs::exists(work / "ds" / "pareto_EDA.csv"));
  CHECK(fs::exists(work / "ds" / "fit_EDA_S01.csv"));
}

TEST_CASE("cli: evaluate on a one-indicator toy matches the hand count") {
  const auto work = testing::scratch_dir("cli_eval");
  FeatureCatalog cat;
  cat.attribute_names = attribute_names();
  cat.indicators = {Indicator::TEMP};
  cat.feature_names = {indicator_feature_names(Indicator::TEMP)};
  Dataset ds;
  ds.catalog = cat;
  Rng rng(4);
  const std::vector<std::vector<int>> labels = {{0, 1, 2, 2}, {1, 1, 0, 2}};
  for (std::size_t s = 0; s < 2; ++s) {
    LabeledWindows lw;
    lw.subject_id = "S0" + std::to_string(s + 1);
    lw.features = testing::random_subject(cat, 4, rng, lw.subject_id);
    lw.labels = labels[s];
    lw.window_index = {0, 1, 2, 3};
    ds.subjects.push_back(lw);
  }
  save_features(ds, work / "feat");

  // Zeroed networks and analyser bias (0.1, 0, -0.1): class 0 everywhere.
  ModelConfig mc;
  mc.contrib_hidden = 2;
  mc.affect_hidden = 2;
  Model m = make_model(cat, mc);
  for (auto& p : parameters(m)) std::fill(p.values.begin(), p.values.end(), 0.0);
  m.analyser.g2.b << 0.1, 0.0, -0.1;
  save_checkpoint(m, work / "model.json");

  REQUIRE(cli("evaluate --features " + (work / "feat").string() + " --model " + (work / "model.json").string() +
                  " --out " + (work / "ev").string() + " --on all",
              work)
              .code == 0);
  const auto j = nlohmann::json::parse(io::read_text(work / "ev" / "metrics.json"));
  // Labels: two of class 0, three of class 1, three of class 2; all predicted 0.
  CHECK(j["n"] == 8);
  CHECK(j["acc"].get<double>() == doctest::Approx(2.0 / 8.0));
  CHECK(j["confusion"][0][0] == 2);
  CHECK(j["confusion"][1][0] == 3);
  CHECK(j["confusion"][2][0] == 3);
  // Class 0: P = 2/8, R = 1, F1 = 0.4; others 0.
  CHECK(j["f1_macro"].get<double>() == doctest::Approx(0.4 / 3.0));
  CHECK(j["mse"].get<double>() == doctest::Approx((3 * 1.0 + 3 * 4.0) / 8.0));
}
