#include "physio/features.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace physio;

namespace {

Window win(std::vector<double> samples, double rate, std::size_t index = 0) {
  Window w;
  w.index = index;
  w.rate_hz = rate;
  w.samples = std::move(samples);
  return w;
}

// Naive two-pass reference.
BasicStats naive_stats(const std::vector<double>& x) {
  double sum = 0.0, mx = x[0], mn = x[0];
  for (double v : x) sum += v, mx = std::max(mx, v), mn = std::min(mn, v);
  const double mean = sum / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(x.size())), mx, mn};
}

std::vector<double> pulse_train(double beat_hz, double rate, double seconds) {
  const auto n = static_cast<std::size_t>(rate * seconds);
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = std::fmod(static_cast<double>(i) / rate * beat_hz, 1.0);
    x[i] = std::exp(-std::pow((phase - 0.5) / 0.05, 2));
  }
  return x;
}

}  // namespace

TEST_CASE("basic_stats examples") {
  auto s = basic_stats(std::vector<double>{5, 5, 5});
  CHECK(s.mean == 5);
  CHECK(s.std == 0);
  CHECK(s.max == 5);
  CHECK(s.min == 5);

  s = basic_stats(std::vector<double>{1, 2, 3});
  CHECK(s.mean == doctest::Approx(2.0));
  CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(s.max == 3);
  CHECK(s.min == 1);

  s = basic_stats(std::vector<double>{-1, 1});
  CHECK(s.mean == 0);
  CHECK(s.std == doctest::Approx(1.0));

  CHECK_THROWS_AS(basic_stats(std::vector<double>{}), ExtractionError);
}

TEST_CASE("basic_stats agrees with a two-pass reference") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng.index(50));
    for (double& v : x) v = rng.normal(rng.uniform(-100, 100), rng.uniform(0.01, 10));
    const auto got = basic_stats(x);
    const auto want = naive_stats(x);
    CHECK(std::abs(got.mean - want.mean) <= 1e-12 * std::max(1.0, std::abs(want.mean)));
    CHECK(std::abs(got.std - want.std) <= 1e-12 * std::max(1.0, std::abs(want.mean)));
    CHECK(got.max == want.max);
    CHECK(got.min == want.min);
    CHECK(got.min <= got.mean);
    CHECK(got.mean <= got.max);
  }
}

TEST_CASE("HRV statistics") {
  const std::vector<double> rr = {800, 810, 790};
  CHECK(sdnn(rr) == doctest::Approx(std::sqrt(200.0 / 3.0)));
  CHECK(rmssd(rr) == doctest::Approx(std::sqrt((100.0 + 400.0) / 2.0)));
}

TEST_CASE("periodic pulse: peak rate and zero variability") {
  const double rate = 64.0;
  const auto x = pulse_train(1.0, rate, 30.0);
  const auto h = analyze_beats(x, rate, FeatureConfig{});
  REQUIRE(h.ok);
  // Brute scan: strict local maxima above half height.
  std::size_t brute = 0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) brute += x[i] > 0.5 && x[i] > x[i - 1] && x[i] >= x[i + 1];
  CHECK(h.peaks.size() == brute);
  CHECK(h.peak_rate_hz == doctest::Approx(1.0).epsilon(1.0 / 30.0));
  CHECK(h.sdnn_ms == doctest::Approx(0.0));
  CHECK(h.rmssd_ms == doctest::Approx(0.0));
}

TEST_CASE("too few beats zero-fill with a quality flag") {
  const std::vector<Window> w = {win(std::vector<double>(64 * 30, 0.0), 64.0)};
  const auto f = hrv_features(w, Indicator::BVP, FeatureConfig{});
  CHECK(f.quality[0] == 1);
  for (Eigen::Index c = 0; c < f.values.cols(); ++c) CHECK(f.values(0, c) == 0.0);
}

TEST_CASE("temperature slope") {
  CHECK(linear_slope(std::vector<double>(10, 36.5), 4.0) == doctest::Approx(0.0));
  std::vector<double> ramp(20);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
  CHECK(linear_slope(ramp, 1.0) == doctest::Approx(1.0));
  CHECK(linear_slope(std::vector<double>{0, 2, 4, 6}, 2.0) == doctest::Approx(4.0));
  const auto f = temp_features({win({0, 2, 4, 6}, 2.0)});
  CHECK(f.values.cols() == 5);
  CHECK(f.values(0, 4) == doctest::Approx(4.0));
}

TEST_CASE("ACC net series is the plain axis sum") {
  const auto f = acc_features({win({1, 1}, 32.0)}, {win({0, 0}, 32.0)}, {win({0, 0}, 32.0)});
  REQUIRE(f.values.cols() == 16);
  CHECK(f.values(0, 12) == doctest::Approx(1.0));  // net mean
  CHECK(f.values(0, 13) == doctest::Approx(0.0));  // net std
  const auto g = acc_features({win({1}, 32.0)}, {win({2}, 32.0)}, {win({3}, 32.0)});
  CHECK(g.values(0, 12) == doctest::Approx(6.0));
  CHECK_THROWS_AS(acc_features({win({1, 2}, 32.0)}, {win({1}, 32.0)}, {win({1, 2}, 32.0)}), ExtractionError);
}

TEST_CASE("EDA decomposition") {
  const double rate = 4.0;
  FeatureConfig cfg;
  const auto flat = decompose_eda(std::vector<double>(240, 2.0), rate, cfg);
  for (double v : flat.tonic) CHECK(v == doctest::Approx(2.0).epsilon(1e-6));
  for (double v : flat.phasic) CHECK(std::abs(v) < 1e-6);
  CHECK(flat.scr_peaks.empty());

  std::vector<double> bump(240, 2.0);
  for (std::size_t i = 0; i < bump.size(); ++i) bump[i] += 0.5 * std::exp(-std::pow((i / rate - 30.0) / 1.0, 2));
  CHECK(decompose_eda(bump, rate, cfg).scr_peaks.size() == 1);

  std::vector<double> ramp(1200);
  for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = 1.0 + 0.001 * static_cast<double>(i);
  const auto r = decompose_eda(ramp, rate, cfg);
  const double tonic_mean = basic_stats(r.tonic).mean;
  CHECK(tonic_mean == doctest::Approx(1.0 + 0.001 * 1199 / 2.0).epsilon(0.05));
}

TEST_CASE("respiration rate from zero crossings") {
  const double rate = 10.0;
  std::vector<double> x(600);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * 0.25 * i / rate);
  const auto f = resp_features({win(x, rate)});
  CHECK(f.quality[0] == 0);
  CHECK(f.values(0, 0) == doctest::Approx(0.25).epsilon(0.1));

  const auto c = resp_features({win(std::vector<double>(600, 1.0), rate)});
  CHECK(c.quality[0] == 1);
  CHECK(c.values(0, 0) == 0.0);
}

TEST_CASE("EMG of silence is zero") {
  const auto f = emg_features({win(std::vector<double>(100, 0.0), 700.0)});
  for (Eigen::Index c = 0; c < f.values.cols(); ++c) CHECK(f.values(0, c) == 0.0);
}

TEST_CASE("attribute encoding") {
  RawAttributes r{27.0, "male", 180.0, 75.0, "yes", "no"};
  auto a = encode_attributes(r);
  REQUIRE(a.values.size() == 9);
  CHECK(a.values(0) == 27.0);
  CHECK(a.values(1) == 1.0);
  CHECK(a.values(2) == 0.0);
  CHECK(a.values(5) == 1.0);
  CHECK(a.values(6) == 0.0);
  CHECK(a.values(7) == 0.0);
  CHECK(a.values(8) == 1.0);
  r.gender = "female";
  a = encode_attributes(r);
  CHECK(a.values(1) == 0.0);
  CHECK(a.values(2) == 1.0);
  r.smoker = "sometimes";
  CHECK_THROWS_AS(encode_attributes(r), SchemaError);
}

TEST_CASE("assemble concatenates attributes and blocks") {
  const auto a = encode_attributes({30.0, "female", 165.0, 60.0, "no", "yes"});
  IndicatorFeatures e, t;
  e.indicator = Indicator::EDA;
  e.names = indicator_feature_names(Indicator::EDA);
  e.values = Matrix::Constant(4, 12, 1.5);
  e.quality.assign(4, 0);
  t.indicator = Indicator::TEMP;
  t.names = indicator_feature_names(Indicator::TEMP);
  t.values = Matrix::Constant(4, 5, -2.0);
  t.quality.assign(4, 0);
  FeatureCatalog cat;
  const auto f = assemble("S1", a, {e, t}, &cat);
  CHECK(f.pf.cols() == 9 + 12 + 5);
  CHECK(cat.m() == 17);
  CHECK(f.pf(3, 0) == 30.0);
  CHECK(f.pf(2, 9) == 1.5);
  CHECK(f.pf(1, 21) == -2.0);

  // Reordering indicators changes the catalog, not the values.
  FeatureCatalog cat2;
  const auto g = assemble("S1", a, {t, e}, &cat2);
  CHECK(cat2.hash() != cat.hash());
  CHECK(g.blocks[0] == f.blocks[1]);
  CHECK(g.blocks[1] == f.blocks[0]);

  t.values = Matrix::Constant(3, 5, 0.0);
  t.quality.assign(3, 0);
  CHECK_THROWS_AS(assemble("S1", a, {e, t}), AlignmentError);
}

TEST_CASE("catalog sizes per device") {
  std::size_t wrist = 0, chest = 0;
  for (auto i : device_indicators(Device::Wrist)) wrist += indicator_feature_names(i).size();
  for (auto i : device_indicators(Device::Chest)) chest += indicator_feature_names(i).size();
  CHECK(wrist == 40);
  CHECK(chest == 48);
  CHECK(attribute_names().size() == 9);
}
