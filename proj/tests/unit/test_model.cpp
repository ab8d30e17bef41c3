#include "physio/io.hpp"
#include "physio/model.hpp"

#include "../support/fixtures.hpp"

#include <doctest.h>

using namespace physio;

namespace {

ContribNet contrib_toy(std::size_t in, std::size_t hidden) {
  ContribNet c;
  c.bn = BatchNorm(in);
  c.bn.bypass = true;
  c.l1 = Dense(in, hidden);
  c.l2 = Dense(hidden, 1);
  return c;
}

Model one_indicator_model(std::size_t m, bool embedding = true) {
  FeatureCatalog cat;
  cat.attribute_names = {"a0"};
  cat.indicators = {Indicator::EDA};
  cat.feature_names = {{}};
  for (std::size_t i = 0; i < m; ++i) cat.feature_names[0].push_back("f" + std::to_string(i));
  ModelConfig mc;
  mc.contrib_hidden = 3;
  mc.affect_hidden = 3;
  mc.use_embedding = embedding;
  return make_model(cat, mc);
}

}  // namespace

TEST_CASE("ContribNet toy values") {
  auto c = contrib_toy(2, 1);
  c.l1.W << 1, 1;
  c.l2.W << 1;
  Matrix pf(1, 2);
  pf << 1, 2;
  CHECK(contribnet_forward(c, pf, Mode::Eval)(0) == doctest::Approx(3.0));

  // Zero weights, output bias c.
  auto z = contrib_toy(2, 4);
  z.l2.b << 0.7;
  Rng rng(1);
  const auto tr = testing::random_subject(testing::toy_catalog(1, 1), 5, rng);
  const Vector a = contribnet_forward(z, tr.pf.leftCols(2), Mode::Eval);
  for (Eigen::Index q = 0; q < a.size(); ++q) CHECK(a(q) == 0.7);

  // Doubling W2 doubles alpha - b2.
  auto r = contrib_toy(2, 4);
  r.l1.init_uniform(rng);
  r.l2.init_uniform(rng);
  r.l2.b << 0.3;
  const Vector a1 = contribnet_forward(r, tr.pf.leftCols(2), Mode::Eval);
  r.l2.W *= 2.0;
  const Vector a2 = contribnet_forward(r, tr.pf.leftCols(2), Mode::Eval);
  for (Eigen::Index q = 0; q < a1.size(); ++q) CHECK(a2(q) - 0.3 == doctest::Approx(2.0 * (a1(q) - 0.3)));
}

TEST_CASE("triu encoding") {
  Matrix B(2, 1);
  B << 10, 100;
  Vector a(2);
  a << 1, 2;
  const Matrix beta = triu_encode(B, a);
  CHECK(beta(0, 0) == 10);
  CHECK(beta(1, 0) == 210);

  Rng rng(5);
  Matrix R(6, 3);
  for (Eigen::Index i = 0; i < R.size(); ++i) R.data()[i] = rng.normal();
  const Matrix cum = triu_encode(R, Vector::Ones(6));
  for (Eigen::Index c = 0; c < 3; ++c) {
    double s = 0.0;
    for (Eigen::Index q = 0; q < 6; ++q) CHECK(cum(q, c) == doctest::Approx(s += R(q, c)));
  }

  // Causality: perturbing row 3 leaves rows 0..2 untouched.
  Vector w(6);
  for (Eigen::Index q = 0; q < 6; ++q) w(q) = rng.normal();
  const Matrix before = triu_encode(R, w);
  R(3, 1) += 5.0;
  const Matrix after = triu_encode(R, w);
  CHECK(after.topRows(3) == before.topRows(3));
  CHECK(after(3, 1) != before(3, 1));

  CHECK_THROWS_AS(triu_encode(R, Vector::Ones(5)), ConfigError);
}

TEST_CASE("AffectNet toy values") {
  AffectNet n;
  n.bn = BatchNorm(2);
  n.bn.bypass = true;
  n.layers = {Dense(2, 2), Dense(2, 1)};
  n.layers[0].W << 1, 0, 0, -1;
  n.layers[1].W << 1, 1;
  n.layers[1].b << 0.5;
  Matrix g(2, 2);
  g << 2, 3, -1, -4;
  // relu([2, -3]) = [2, 0] -> 2.5; relu([-1, 4]) = [0, 4] -> 4.5
  const Vector t = affectnet_forward(n, g, Mode::Eval);
  CHECK(t(0) == doctest::Approx(2.5));
  CHECK(t(1) == doctest::Approx(4.5));

  // Dead ReLUs leave the final bias.
  n.layers[0].b << -100, -100;
  const Vector d = affectnet_forward(n, g, Mode::Eval);
  CHECK(d(0) == 0.5);
  CHECK(d(1) == 0.5);
}

TEST_CASE("batch norm modes") {
  Rng rng(9);
  Matrix x(50, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal(4.0, 3.0);
  x.col(2).setConstant(7.0);
  BatchNorm bn(3);
  BatchNormCache cache;
  const Matrix y = batchnorm_forward(bn, x, Mode::Train, &cache);
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double mean = y.col(c).mean();
    const double var = (y.col(c).array() - mean).square().mean();
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
  }
  for (Eigen::Index q = 0; q < y.rows(); ++q) CHECK(y(q, 2) == 0.0);

  // Running mean 0 / variance 1 in eval mode is the identity up to eps.
  const Matrix e = batchnorm_forward(bn, x, Mode::Eval, nullptr);
  CHECK((e - x / std::sqrt(1.0 + bn.eps)).cwiseAbs().maxCoeff() < 1e-12);

  // Static columns use the frozen statistics in every mode.
  BatchNorm s(3);
  s.static_cols = 1;
  s.static_mean = Vector::Constant(1, 1.0);
  s.static_var = Vector::Constant(1, 4.0);
  const Matrix ys = batchnorm_forward(s, x, Mode::Train, nullptr);
  CHECK(ys(0, 0) == doctest::Approx((x(0, 0) - 1.0) / std::sqrt(4.0 + s.eps)));
}

TEST_CASE("forward: u shift and analyser bias") {
  auto model = one_indicator_model(2);
  Rng rng(2);
  const auto f = testing::random_subject(model.catalog, 4, rng);
  const auto base = forward(model, f, Mode::Eval);
  model.u(0) += 0.25;
  const auto shifted = forward(model, f, Mode::Eval);
  for (Eigen::Index q = 0; q < 4; ++q) CHECK(shifted.Phi(q, 0) - base.Phi(q, 0) == doctest::Approx(0.25));

  // Everything zeroed, analyser bias (0.1, 0, -0.1): class 0 everywhere.
  for (auto& p : parameters(model)) std::fill(p.values.begin(), p.values.end(), 0.0);
  model.analyser.g1.W.setIdentity();
  model.analyser.g2.b << 0.1, 0.0, -0.1;
  const auto tr = forward(model, f, Mode::Eval);
  for (int p : tr.predictions()) CHECK(p == 0);
}

TEST_CASE("forward: no embedding keeps alpha at one") {
  auto model = one_indicator_model(2, false);
  CHECK(model.contrib.empty());
  Rng rng(4);
  const auto f = testing::random_subject(model.catalog, 5, rng);
  const auto tr = forward(model, f, Mode::Eval);
  for (Eigen::Index q = 0; q < 5; ++q) CHECK(tr.ind[0].alpha(q) == 1.0);
  CHECK(tr.ind[0].beta == f.blocks[0]);
}

TEST_CASE("forward: indicator order is a symmetry") {
  Rng rng(12);
  const auto cat = testing::toy_catalog(3, 2);
  ModelConfig mc;
  mc.contrib_hidden = 4;
  mc.affect_hidden = 4;
  auto model = make_model(cat, mc);
  model.u << 0.3, -0.2;
  const auto f = testing::random_subject(cat, 5, rng);

  // Swap indicators: catalog, blocks, sub-networks, u and analyser columns.
  FeatureCatalog sw = cat;
  std::swap(sw.indicators[0], sw.indicators[1]);
  std::swap(sw.feature_names[0], sw.feature_names[1]);
  Model m2 = model;
  m2.catalog = sw;
  std::swap(m2.affect[0], m2.affect[1]);
  std::swap(m2.contrib[0], m2.contrib[1]);
  std::swap(m2.u(0), m2.u(1));
  m2.analyser.g1.W.col(0).swap(m2.analyser.g1.W.col(1));
  // ContribNet inputs are the fused row, whose block order changes too.
  for (auto& c : m2.contrib) {
    Matrix W = c.l1.W;
    c.l1.W.middleCols(2, 2) = W.middleCols(5, 2);
    c.l1.W.middleCols(4, 3) = W.middleCols(2, 3);
    for (Vector* v : {&c.bn.gamma, &c.bn.beta, &c.bn.running_mean, &c.bn.running_var}) {
      Vector o = *v;
      v->segment(2, 2) = o.segment(5, 2);
      v->segment(4, 3) = o.segment(2, 3);
    }
  }
  SubjectFeatures g = f;
  std::swap(g.blocks[0], g.blocks[1]);
  rebuild_pf(g);
  const auto a = forward(model, f, Mode::Eval);
  const auto b = forward(m2, g, Mode::Eval);
  CHECK((a.logits - b.logits).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("checkpoint round trip") {
  auto t = testing::toy_problem(21);
  const auto dir = testing::scratch_dir("model_ckpt");
  save_checkpoint(t.model, dir / "m.json");
  const Model back = load_checkpoint(dir / "m.json", &t.model.catalog);
  const auto a = forward(t.model, t.subject, Mode::Eval);
  const auto b = forward(back, t.subject, Mode::Eval);
  CHECK(a.logits == b.logits);
  save_checkpoint(back, dir / "m2.json");
  CHECK(io::read_text(dir / "m.json") == io::read_text(dir / "m2.json"));

  auto other = testing::toy_catalog(4, 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "m.json", &other), SchemaError);
}
