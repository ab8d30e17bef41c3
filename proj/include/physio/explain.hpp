#pragma once

#include "physio/model.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace physio {

// Which network's summed output is explained. ContribNet inputs are the fused
// PF rows; AffectNet inputs are the gamma rows of its indicator.
enum class Target { Contrib, Affect };

struct Component {
  Target target = Target::Affect;
  std::size_t indicator = 0;  // model order
};

// "contribnet_<IND>" or "affectnet_<IND>", e.g. affectnet_EDA.
Component parse_component(const Model& model, std::string_view text);
std::string component_name(const Model& model, Component c);

// S = sum over windows of alpha (ContribNet) or theta (AffectNet).
double scalar_target(const ForwardTrace& trace, Component c);

// Input rows X seen by the component (windows x d) and their names.
Matrix component_inputs(const ForwardTrace& trace, Component c);
std::vector<std::string> component_input_names(const Model& model, Component c);

// dS/dX, windows x d, for the trace's mode.
Matrix input_gradient(const Model& model, const ForwardTrace& trace, Component c);

struct ImportanceScores {
  Component component;
  std::vector<std::string> names;
  Vector scores;  // >= 0, sums to 1
  bool degenerate = false;  // all-zero gradient field; scores are uniform
};

// I_j = sum_q |G[q,j]| / sum_q,j' |G[q,j']| with G pooled over the given
// gradient fields (one per subject).
ImportanceScores importance_from_gradients(const std::vector<Matrix>& grads, std::vector<std::string> names);

// Gradients over every subject's full sequence; Eval mode by default.
ImportanceScores importance(const Model& model, const std::vector<SubjectFeatures>& subjects, Component c,
                            Mode mode = Mode::Eval);

struct FeatureSelection {
  std::vector<std::size_t> indices;  // descending score, ties by lower index
  std::vector<std::string> names;
};
FeatureSelection select_top_k(const ImportanceScores& scores, std::size_t k = 10);

// importance_<component>.csv (feature,score).
void write_importance(const Model& model, const ImportanceScores& s, const std::filesystem::path& dir);
// Heatmap layout: one row per feature name, one column per component; blank
// where a component has no such input.
void write_importance_matrix(const Model& model, const std::vector<ImportanceScores>& all,
                             const std::filesystem::path& path);

}  // namespace physio
