#pragma once

#include "physio/common.hpp"
#include "physio/explain.hpp"
#include "physio/model.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace physio {

enum class Op : std::uint8_t { Const, Var, Sin, Cos, Log, Exp, Add, Sub, Mul, Pow };

int arity(Op op);
std::string_view op_name(Op op);

struct Node {
  Op op = Op::Const;
  double value = 0.0;   // Const
  std::size_t var = 0;  // Var
};

// Expression tree stored in prefix order.
struct Expr {
  std::vector<Node> nodes;

  std::size_t complexity() const { return nodes.size(); }
  // Distinct variable indices, ascending.
  std::vector<std::size_t> variables() const;
  bool operator==(const Expr& o) const;
};

Expr constant(double c);
Expr variable(std::size_t i);

// Penalty charged per row whose prediction is not finite.
inline constexpr double kSymregPenalty = 1e6;

// Protected semantics: log(x) = log(|x| + 1e-9), exp argument clamped to
// <= 30, pow(a, b) = |a|^b with b clamped to [-6, 6]. Returns nullopt when
// the result is still not finite.
std::optional<double> evaluate(const Expr& e, std::span<const double> row);
// One value per row of X; non-finite entries are NaN.
Vector evaluate_rows(const Expr& e, const Matrix& X);

double mae_loss(const Expr& e, const Matrix& X, const Vector& target);

// Replace variable-free subtrees by their value.
Expr fold_constants(const Expr& e);

// "+ x0 sin x1" style, constants in shortest round-trip form.
std::string to_prefix(const Expr& e);
Expr parse_prefix(std::string_view text);
// Fully parenthesised infix; names default to x0, x1, ...
std::string to_infix(const Expr& e, const std::vector<std::string>& names = {});
// Infix with + - * ^, sin cos log exp pow(a, b), x<i> variables, numbers.
Expr parse_infix(std::string_view text);

struct SymRegConfig {
  std::size_t population = 256;
  std::size_t generations = 60;
  std::size_t tournament = 5;
  double crossover = 0.7;
  double mutation = 0.25;
  double const_jitter = 0.05;
  std::size_t const_opt_steps = 8;       // hill-climb steps per optimised individual
  std::size_t const_opt_candidates = 16;  // best individuals optimised each generation
  std::size_t max_complexity = 15;
  double delta = 0.05;  // selection band relative to the best front loss
  double tau = 1e-12;   // absolute slack added to the band
  std::uint64_t seed = 7;
  int jobs = 1;

  // Trees in the population may grow to this size; the front only keeps
  // entries up to max_complexity.
  std::size_t search_cap() const { return std::max<std::size_t>(20, max_complexity); }
};

struct FrontEntry {
  Expr expr;
  double loss = 0.0;
  std::size_t complexity = 0;
  std::size_t vars = 0;
};

// Best expression per complexity, filtered so that loss strictly decreases
// with complexity (no entry is dominated).
struct ParetoFront {
  std::vector<FrontEntry> entries;  // ascending complexity
  std::optional<std::size_t> selected;
};

// Keeps the non-dominated subset, ascending complexity.
ParetoFront pareto_filter(std::vector<FrontEntry> entries);

ParetoFront evolve(const Matrix& X, const Vector& target, const SymRegConfig& cfg);

// Among non-dominated entries with loss <= (1 + delta) * min_loss + tau, the
// fewest distinct variables, then lower complexity, then lower loss.
std::size_t select_formula(const ParetoFront& front, double tau, double delta);

// 1 - SS_res / SS_tot.
double r_squared(const Vector& pred, const Vector& actual);

// --- distillation ------------------------------------------------------------

struct SubjectFit {
  std::string subject_id;
  Vector model_output;  // theta (or alpha) per window
  Vector law_output;
};

struct LawReport {
  Component component;
  std::string indicator;
  FeatureSelection features;  // rho(X): variable x<i> is features.names[i]
  ParetoFront front;
  FrontEntry law;
  double r2 = 0.0;
  std::size_t samples = 0;
  std::vector<SubjectFit> fits;
};

struct DistillConfig {
  SymRegConfig symreg;
  std::size_t top_k = 10;
  Target target = Target::Affect;  // theta by default, alpha on request
  std::size_t fit_subjects = 3;    // subjects with fitted-vs-model curves
};

LawReport distill(const Model& model, const std::vector<SubjectFeatures>& subjects, std::size_t indicator,
                  const DistillConfig& cfg);

// laws_<IND>.json, pareto_<IND>.csv, fit_<IND>_<subject>.csv
void write_law_report(const LawReport& r, const std::filesystem::path& dir);

}  // namespace physio
