#pragma once
// Small fixtures shared by the unit and acceptance suites.

#include "physio/dataset.hpp"
#include "physio/model.hpp"
#include "physio/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace physio::testing {

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("physio_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Two attributes, indicators EDA (m_j) and TEMP (m_t).
inline FeatureCatalog toy_catalog(std::size_t m_eda = 3, std::size_t m_temp = 2) {
  FeatureCatalog cat;
  cat.attribute_names = {"a0", "a1"};
  cat.indicators = {Indicator::EDA, Indicator::TEMP};
  cat.feature_names.resize(2);
  for (std::size_t i = 0; i < m_eda; ++i) cat.feature_names[0].push_back("e" + std::to_string(i));
  for (std::size_t i = 0; i < m_temp; ++i) cat.feature_names[1].push_back("t" + std::to_string(i));
  return cat;
}

inline SubjectFeatures random_subject(const FeatureCatalog& cat, std::size_t windows, Rng& rng,
                                      const std::string& id = "s") {
  SubjectFeatures f;
  f.subject_id = id;
  f.attributes = Vector(static_cast<Eigen::Index>(cat.k()));
  for (Eigen::Index i = 0; i < f.attributes.size(); ++i) f.attributes(i) = rng.normal();
  for (std::size_t j = 0; j < cat.indicators.size(); ++j) {
    Matrix b(static_cast<Eigen::Index>(windows), static_cast<Eigen::Index>(cat.m_of(j)));
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    f.blocks.push_back(b);
    f.quality.emplace_back(windows, 0);
  }
  rebuild_pf(f);
  return f;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
  std::vector<std::string> groups;  // parameter groups visited
};

// Central differences on sampled coordinates of every parameter group. The
// sample takes every coordinate of small groups and `per_group` random ones
// of larger groups. Coordinates where both derivatives are below `floor` in
// magnitude count as agreeing.
inline GradCheck gradient_check(Model model, const SubjectFeatures& f, const std::vector<int>& labels, double lambda,
                                Mode mode, std::size_t per_group, Rng& rng, double h = 1e-5, double tol = 1e-4,
                                double floor = 1e-9) {
  GradCheck out;
  const Model grad = backward(model, forward(model, f, mode), labels, lambda);
  Model g = grad;
  auto ps = parameters(model);
  auto gs = parameters(g);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    out.groups.push_back(ps[i].name);
    const std::size_t n = ps[i].values.size();
    std::vector<std::size_t> coords;
    if (n <= per_group) {
      for (std::size_t e = 0; e < n; ++e) coords.push_back(e);
    } else {
      for (std::size_t c = 0; c < per_group; ++c) coords.push_back(rng.index(n));
    }
    for (std::size_t e : coords) {
      double& v = ps[i].values[e];
      const double orig = v;
      v = orig + h;
      const double lp = loss(forward(model, f, mode), labels, lambda).total;
      v = orig - h;
      const double lm = loss(forward(model, f, mode), labels, lambda).total;
      v = orig;
      const double num = (lp - lm) / (2.0 * h);
      const double an = gs[i].values[e];
      ++out.checked;
      if (std::abs(num) < floor && std::abs(an) < floor) continue;
      const double rel = std::abs(num - an) / std::max(std::abs(num), std::abs(an));
      out.worst_rel = std::max(out.worst_rel, rel);
      if (rel > tol) ++out.failed;
    }
  }
  return out;
}

// Toy model of the gradient criterion: xi = 3, M = 2, H = 4, parameters
// perturbed away from the initial point so no unit sits exactly at zero.
struct ToyProblem {
  Model model;
  SubjectFeatures subject;
  std::vector<int> labels;
};

inline ToyProblem toy_problem(std::uint64_t seed) {
  Rng rng(seed);
  const auto cat = toy_catalog();
  ToyProblem t;
  t.subject = random_subject(cat, 3, rng);
  ModelConfig mc;
  mc.contrib_hidden = 4;
  mc.affect_hidden = 4;
  mc.seed = seed;
  t.model = make_model(cat, mc, {t.subject.attributes, Vector::Constant(2, 0.1)});
  for (auto& p : parameters(t.model)) {
    for (double& v : p.values) v += 0.3 * rng.normal();
  }
  t.labels = {0, 2, 1};
  return t;
}

// Model whose AffectNet for indicator j computes theta = 2 * gamma[:, col]
// exactly: relu(2x) - relu(-2x) through the default three layers, BN
// bypassed, no embedding so gamma holds the raw features.
inline Model planted_network(const FeatureCatalog& cat, std::size_t j, std::size_t col) {
  ModelConfig mc;
  mc.contrib_hidden = 4;
  mc.affect_hidden = 4;
  mc.use_embedding = false;
  Model m = make_model(cat, mc);
  auto& a = m.affect.at(j);
  a.bn.bypass = true;
  for (auto& l : a.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  const auto c = static_cast<Eigen::Index>(col);
  a.layers[0].W(0, c) = 2.0;
  a.layers[0].W(1, c) = -2.0;
  a.layers[1].W(0, 0) = 1.0;
  a.layers[1].W(1, 1) = 1.0;
  a.layers[2].W(0, 0) = 1.0;
  a.layers[2].W(0, 1) = -1.0;
  return m;
}

}  // namespace physio::testing
