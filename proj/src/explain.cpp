#include "physio/explain.hpp"

#include "physio/io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace physio {

Component parse_component(const Model& model, std::string_view text) {
  Component c;
  std::string_view rest;
  if (text.starts_with("contribnet_")) {
    c.target = Target::Contrib;
    rest = text.substr(11);
  } else if (text.starts_with("affectnet_")) {
    c.target = Target::Affect;
    rest = text.substr(10);
  } else {
    throw ConfigError("unknown component '" + std::string(text) + "' (expected contribnet_<IND> or affectnet_<IND>)");
  }
  c.indicator = model.catalog.index_of(parse_indicator(rest));
  if (c.target == Target::Contrib && !model.config.use_embedding) {
    throw ConfigError("component '" + std::string(text) + "' does not exist: feature embedding is disabled");
  }
  return c;
}

std::string component_name(const Model& model, Component c) {
  return std::string(c.target == Target::Contrib ? "contribnet_" : "affectnet_") +
         std::string(to_string(model.catalog.indicators.at(c.indicator)));
}

namespace {

const IndicatorTrace& indicator_trace(const ForwardTrace& trace, Component c) {
  if (c.indicator >= trace.ind.size()) {
    throw ConfigError("unknown component: indicator " + std::to_string(c.indicator) + " out of range");
  }
  return trace.ind[c.indicator];
}

}  // namespace

double scalar_target(const ForwardTrace& trace, Component c) {
  const auto& it = indicator_trace(trace, c);
  return c.target == Target::Contrib ? it.alpha.sum() : it.theta.sum();
}

Matrix component_inputs(const ForwardTrace& trace, Component c) {
  const auto& it = indicator_trace(trace, c);
  return c.target == Target::Contrib ? trace.contrib_input : it.gamma;
}

std::vector<std::string> component_input_names(const Model& model, Component c) {
  const auto& cat = model.catalog;
  std::vector<std::string> names;
  if (model.config.use_attributes) names = cat.attribute_names;
  if (c.target == Target::Contrib) {
    for (std::size_t j = 0; j < cat.indicators.size(); ++j) {
      names.insert(names.end(), cat.feature_names[j].begin(), cat.feature_names[j].end());
    }
  } else {
    const auto& f = cat.feature_names.at(c.indicator);
    names.insert(names.end(), f.begin(), f.end());
  }
  return names;
}

Matrix input_gradient(const Model& model, const ForwardTrace& trace, Component c) {
  const auto& it = indicator_trace(trace, c);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(trace.windows()));
  if (c.target == Target::Contrib) {
    if (model.contrib.empty()) throw ConfigError("unknown component: model has no ContribNets");
    return contribnet_backward(model.contrib[c.indicator], it.contrib, ones, nullptr);
  }
  return affectnet_backward(model.affect[c.indicator], it.affect, ones, nullptr);
}

ImportanceScores importance_from_gradients(const std::vector<Matrix>& grads, std::vector<std::string> names) {
  ImportanceScores out;
  const auto d = static_cast<Eigen::Index>(names.size());
  Vector colsum = Vector::Zero(d);
  for (const auto& g : grads) {
    if (g.cols() != d) throw ConfigError("importance: gradient width does not match the feature names");
    colsum += g.cwiseAbs().colwise().sum().transpose();
  }
  const double total = colsum.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    out.degenerate = true;
    out.scores = Vector::Constant(d, d > 0 ? 1.0 / static_cast<double>(d) : 0.0);
  } else {
    out.scores = colsum / total;
  }
  out.names = std::move(names);
  return out;
}

ImportanceScores importance(const Model& model, const std::vector<SubjectFeatures>& subjects, Component c, Mode mode) {
  if (subjects.empty()) throw ConfigError("importance: no subjects");
  std::vector<Matrix> grads;
  for (const auto& s : subjects) grads.push_back(input_gradient(model, forward(model, s, mode), c));
  auto out = importance_from_gradients(grads, component_input_names(model, c));
  out.component = c;
  return out;
}

FeatureSelection select_top_k(const ImportanceScores& scores, std::size_t k) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.scores(static_cast<Eigen::Index>(a)) > scores.scores(static_cast<Eigen::Index>(b));
  });
  order.resize(std::min(k, order.size()));
  FeatureSelection out;
  out.indices = order;
  for (std::size_t i : order) out.names.push_back(scores.names.at(i));
  return out;
}

void write_importance(const Model& model, const ImportanceScores& s, const std::filesystem::path& dir) {
  std::ostringstream os;
  os << "feature,score\n";
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    os << s.names[i] << ',' << io::fmt_g(s.scores(static_cast<Eigen::Index>(i)), 12) << '\n';
  }
  io::write_text(dir / ("importance_" + component_name(model, s.component) + ".csv"), os.str());
}

void write_importance_matrix(const Model& model, const std::vector<ImportanceScores>& all,
                             const std::filesystem::path& path) {
  std::vector<std::string> rows;
  std::vector<std::map<std::string, double>> cols(all.size());
  for (std::size_t c = 0; c < all.size(); ++c) {
    for (std::size_t i = 0; i < all[c].names.size(); ++i) {
      const auto& n = all[c].names[i];
      if (std::find(rows.begin(), rows.end(), n) == rows.end()) rows.push_back(n);
      cols[c][n] = all[c].scores(static_cast<Eigen::Index>(i));
    }
  }
  std::ostringstream os;
  os << "feature";
  for (const auto& s : all) os << ',' << component_name(model, s.component);
  os << '\n';
  for (const auto& n : rows) {
    os << n;
    for (const auto& col : cols) {
      auto it = col.find(n);
      os << ',' << (it == col.end() ? std::string() : io::fmt_g(it->second, 12));
    }
    os << '\n';
  }
  io::write_text(path, os.str());
}

}  // namespace physio
