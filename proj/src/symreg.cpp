#include "physio/symreg.hpp"

#include "physio/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>

namespace physio {

int arity(Op op) {
  switch (op) {
    case Op::Const:
    case Op::Var: return 0;
    case Op::Sin:
    case Op::Cos:
    case Op::Log:
    case Op::Exp: return 1;
    default: return 2;
  }
}

std::string_view op_name(Op op) {
  switch (op) {
    case Op::Const: return "const";
    case Op::Var: return "var";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Log: return "log";
    case Op::Exp: return "exp";
    case Op::Add: return "+";
    case Op::Sub: return "-";
    case Op::Mul: return "*";
    case Op::Pow: return "pow";
  }
  return "?";
}

std::vector<std::size_t> Expr::variables() const {
  std::vector<std::size_t> out;
  for (const auto& n : nodes) {
    if (n.op == Op::Var) out.push_back(n.var);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool Expr::operator==(const Expr& o) const {
  if (nodes.size() != o.nodes.size()) return false;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node &a = nodes[i], &b = o.nodes[i];
    if (a.op != b.op) return false;
    if (a.op == Op::Const && a.value != b.value) return false;
    if (a.op == Op::Var && a.var != b.var) return false;
  }
  return true;
}

Expr constant(double c) { return Expr{{Node{Op::Const, c, 0}}}; }
Expr variable(std::size_t i) { return Expr{{Node{Op::Var, 0.0, i}}}; }

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// One past the last node of the subtree rooted at i.
std::size_t subtree_end(const std::vector<Node>& nodes, std::size_t i) {
  std::ptrdiff_t need = 1;
  while (need > 0) {
    if (i >= nodes.size()) throw ConfigError("malformed expression: missing operands");
    need += arity(nodes[i].op) - 1;
    ++i;
  }
  return i;
}

void check_well_formed(const Expr& e) {
  if (e.nodes.empty()) throw ConfigError("empty expression");
  if (subtree_end(e.nodes, 0) != e.nodes.size()) throw ConfigError("malformed expression: trailing nodes");
}

double protected_exp(double x) { return std::isnan(x) ? kNaN : std::exp(std::min(x, 30.0)); }
double protected_log(double x) { return std::log(std::abs(x) + 1e-9); }
double protected_pow(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return kNaN;
  return std::pow(std::abs(a), std::clamp(b, -6.0, 6.0));
}

Eigen::ArrayXd eval_at(const Expr& e, std::size_t& i, const Matrix& X) {
  const Node& n = e.nodes[i++];
  const Eigen::Index rows = X.rows();
  switch (n.op) {
    case Op::Const: return Eigen::ArrayXd::Constant(rows, n.value);
    case Op::Var:
      if (static_cast<Eigen::Index>(n.var) >= X.cols()) {
        throw ConfigError("expression uses x" + std::to_string(n.var) + " but rows have " +
                          std::to_string(X.cols()) + " columns");
      }
      return X.col(static_cast<Eigen::Index>(n.var)).array();
    case Op::Sin: return eval_at(e, i, X).sin();
    case Op::Cos: return eval_at(e, i, X).cos();
    case Op::Log: return eval_at(e, i, X).unaryExpr(&protected_log);
    case Op::Exp: return eval_at(e, i, X).unaryExpr(&protected_exp);
    default: break;
  }
  const Eigen::ArrayXd a = eval_at(e, i, X);
  const Eigen::ArrayXd b = eval_at(e, i, X);
  switch (n.op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    default: return a.binaryExpr(b, [](double x, double y) { return protected_pow(x, y); });
  }
}

}  // namespace

Vector evaluate_rows(const Expr& e, const Matrix& X) {
  check_well_formed(e);
  std::size_t i = 0;
  Vector out = eval_at(e, i, X).matrix();
  for (auto& v : out) {
    if (!std::isfinite(v)) v = kNaN;
  }
  return out;
}

std::optional<double> evaluate(const Expr& e, std::span<const double> row) {
  Matrix X(1, static_cast<Eigen::Index>(row.size()));
  for (std::size_t c = 0; c < row.size(); ++c) X(0, static_cast<Eigen::Index>(c)) = row[c];
  const double v = evaluate_rows(e, X)(0);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

double mae_loss(const Expr& e, const Matrix& X, const Vector& target) {
  if (X.rows() != target.size()) throw ConfigError("mae_loss: one target per row required");
  if (X.rows() == 0) throw ConfigError("mae_loss: no rows");
  const Vector pred = evaluate_rows(e, X);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < pred.size(); ++r) {
    sum += std::isnan(pred(r)) ? kSymregPenalty : std::abs(pred(r) - target(r));
  }
  return sum / static_cast<double>(pred.size());
}

namespace {

void fold_at(const Expr& e, std::size_t& i, std::vector<Node>& out) {
  const std::size_t begin = i;
  const std::size_t end = subtree_end(e.nodes, i);
  bool has_var = false;
  for (std::size_t k = begin; k < end; ++k) has_var |= e.nodes[k].op == Op::Var;
  if (!has_var && end - begin > 1) {
    Expr sub;
    sub.nodes.assign(e.nodes.begin() + static_cast<std::ptrdiff_t>(begin), e.nodes.begin() + static_cast<std::ptrdiff_t>(end));
    const auto v = evaluate(sub, {});
    if (v) {
      out.push_back(Node{Op::Const, *v, 0});
      i = end;
      return;
    }
  }
  const int n = arity(e.nodes[i].op);
  out.push_back(e.nodes[i++]);
  for (int a = 0; a < n; ++a) fold_at(e, i, out);
}

std::string number_text(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Expr fold_constants(const Expr& e) {
  check_well_formed(e);
  Expr out;
  std::size_t i = 0;
  fold_at(e, i, out.nodes);
  return out;
}

std::string to_prefix(const Expr& e) {
  std::string s;
  for (const auto& n : e.nodes) {
    if (!s.empty()) s += ' ';
    if (n.op == Op::Const) s += number_text(n.value);
    else if (n.op == Op::Var) s += "x" + std::to_string(n.var);
    else s += op_name(n.op);
  }
  return s;
}

Expr parse_prefix(std::string_view text) {
  Expr e;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) {
    Node n;
    bool matched = false;
    for (Op op : {Op::Sin, Op::Cos, Op::Log, Op::Exp, Op::Add, Op::Sub, Op::Mul, Op::Pow}) {
      if (tok == op_name(op)) {
        n.op = op;
        matched = true;
      }
    }
    if (!matched) {
      if (tok.size() > 1 && tok[0] == 'x' && std::all_of(tok.begin() + 1, tok.end(), ::isdigit)) {
        n.op = Op::Var;
        n.var = std::stoul(tok.substr(1));
      } else {
        n.op = Op::Const;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), n.value);
        if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
          throw ConfigError("bad token '" + tok + "' in prefix expression");
        }
      }
    }
    e.nodes.push_back(n);
  }
  check_well_formed(e);
  return e;
}

namespace {

std::string infix_at(const Expr& e, std::size_t& i, const std::vector<std::string>& names) {
  const Node& n = e.nodes[i++];
  switch (n.op) {
    case Op::Const: {
      const std::string s = number_text(n.value);
      return n.value < 0 ? "(" + s + ")" : s;
    }
    case Op::Var: return n.var < names.size() ? names[n.var] : "x" + std::to_string(n.var);
    case Op::Sin:
    case Op::Cos:
    case Op::Log:
    case Op::Exp: return std::string(op_name(n.op)) + "(" + infix_at(e, i, names) + ")";
    default: break;
  }
  const std::string a = infix_at(e, i, names);
  const std::string b = infix_at(e, i, names);
  if (n.op == Op::Pow) return "pow(" + a + ", " + b + ")";
  return "(" + a + " " + std::string(op_name(n.op)) + " " + b + ")";
}

class InfixParser {
 public:
  explicit InfixParser(std::string_view s) : s_(s) {}

  Expr parse() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("infix expression '" + std::string(s_) + "': " + what + " at offset " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }
  static Expr binary(Op op, const Expr& a, const Expr& b) {
    Expr e;
    e.nodes.push_back(Node{op, 0.0, 0});
    e.nodes.insert(e.nodes.end(), a.nodes.begin(), a.nodes.end());
    e.nodes.insert(e.nodes.end(), b.nodes.begin(), b.nodes.end());
    return e;
  }
  Expr expr() {
    Expr e = term();
    for (;;) {
      if (eat('+')) e = binary(Op::Add, e, term());
      else if (eat('-')) e = binary(Op::Sub, e, term());
      else return e;
    }
  }
  Expr term() {
    Expr e = power();
    while (eat('*')) e = binary(Op::Mul, e, power());
    return e;
  }
  Expr power() {
    Expr base = unary();
    if (eat('^')) return binary(Op::Pow, base, power());
    return base;
  }
  Expr unary() {
    if (eat('-')) {
      Expr u = unary();
      if (u.nodes.size() == 1 && u.nodes[0].op == Op::Const) {
        u.nodes[0].value = -u.nodes[0].value;
        return u;
      }
      return binary(Op::Sub, constant(0.0), u);
    }
    return primary();
  }
  Expr primary() {
    skip();
    if (eat('(')) {
      Expr e = expr();
      expect(')');
      return e;
    }
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double v = 0.0;
      const auto res = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
      if (res.ec != std::errc()) fail("bad number");
      pos_ = static_cast<std::size_t>(res.ptr - s_.data());
      return constant(v);
    }
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_')) ++end;
    const std::string word(s_.substr(pos_, end - pos_));
    if (word.empty()) fail("unexpected '" + std::string(1, c) + "'");
    pos_ = end;
    for (Op op : {Op::Sin, Op::Cos, Op::Log, Op::Exp}) {
      if (word == op_name(op)) {
        expect('(');
        Expr a = expr();
        expect(')');
        Expr e;
        e.nodes.push_back(Node{op, 0.0, 0});
        e.nodes.insert(e.nodes.end(), a.nodes.begin(), a.nodes.end());
        return e;
      }
    }
    if (word == "pow") {
      expect('(');
      Expr a = expr();
      expect(',');
      Expr b = expr();
      expect(')');
      return binary(Op::Pow, a, b);
    }
    if (word.size() > 1 && word[0] == 'x' && std::all_of(word.begin() + 1, word.end(), ::isdigit)) {
      return variable(std::stoul(word.substr(1)));
    }
    fail("unknown name '" + word + "'");
  }
};

}  // namespace

std::string to_infix(const Expr& e, const std::vector<std::string>& names) {
  check_well_formed(e);
  std::size_t i = 0;
  std::string s = infix_at(e, i, names);
  if (arity(e.nodes[0].op) == 2 && e.nodes[0].op != Op::Pow) s = s.substr(1, s.size() - 2);
  return s;
}

Expr parse_infix(std::string_view text) { return InfixParser(text).parse(); }

// ---------------------------------------------------------------------------
// Pareto front and selection

ParetoFront pareto_filter(std::vector<FrontEntry> entries) {
  std::stable_sort(entries.begin(), entries.end(), [](const FrontEntry& a, const FrontEntry& b) {
    return a.complexity != b.complexity ? a.complexity < b.complexity : a.loss < b.loss;
  });
  ParetoFront out;
  double best = std::numeric_limits<double>::infinity();
  for (auto& e : entries) {
    if (e.loss < best) {
      best = e.loss;
      out.entries.push_back(std::move(e));
    }
  }
  return out;
}

std::size_t select_formula(const ParetoFront& front, double tau, double delta) {
  if (front.entries.empty()) throw DistillationError("select_formula: empty Pareto front");
  // Index of each surviving entry in the caller's front.
  std::vector<std::size_t> keep;
  double best = std::numeric_limits<double>::infinity();
  {
    std::vector<std::size_t> order(front.entries.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto &x = front.entries[a], &y = front.entries[b];
      return x.complexity != y.complexity ? x.complexity < y.complexity : x.loss < y.loss;
    });
    for (std::size_t i : order) {
      if (front.entries[i].loss < best) {
        best = front.entries[i].loss;
        keep.push_back(i);
      }
    }
  }
  const double band = (1.0 + delta) * best + tau;
  std::optional<std::size_t> pick;
  for (std::size_t i : keep) {
    const auto& e = front.entries[i];
    if (e.loss > band) continue;
    if (!pick) {
      pick = i;
      continue;
    }
    const auto& p = front.entries[*pick];
    if (e.vars != p.vars ? e.vars < p.vars
                         : e.complexity != p.complexity ? e.complexity < p.complexity : e.loss < p.loss) {
      pick = i;
    }
  }
  return *pick;
}

double r_squared(const Vector& pred, const Vector& actual) {
  if (pred.size() != actual.size() || actual.size() == 0) {
    throw DistillationError("r_squared: need equal-length, non-empty vectors");
  }
  const double mean = actual.mean();
  const double ss_res = (actual - pred).squaredNorm();
  const double ss_tot = (actual.array() - mean).square().sum();
  if (ss_tot == 0.0) {
    if (ss_res == 0.0) return 1.0;
    throw DistillationError("r_squared undefined: constant target with imperfect prediction");
  }
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Genetic programming

namespace {

constexpr std::array<Op, 4> kUnary = {Op::Sin, Op::Cos, Op::Log, Op::Exp};
constexpr std::array<Op, 4> kBinary = {Op::Add, Op::Sub, Op::Mul, Op::Pow};

struct Individual {
  Expr expr;
  double loss = std::numeric_limits<double>::infinity();
};

bool better(const Individual& a, const Individual& b) {
  return a.loss != b.loss ? a.loss < b.loss : a.expr.complexity() < b.expr.complexity();
}

class Gp {
 public:
  Gp(const Matrix& X, const Vector& y, const SymRegConfig& cfg)
      : X_(X), y_(y), cfg_(cfg), rng_(cfg.seed), nvars_(static_cast<std::size_t>(X.cols())),
        cap_(cfg.search_cap()), best_(cfg.max_complexity + 1) {}

  ParetoFront run() {
    std::vector<Individual> pop;
    for (std::size_t i = 0; i < cfg_.population; ++i) {
      const int depth = 1 + static_cast<int>(i % 5);
      pop.push_back({fold_constants(random_tree(cap_, depth, i % 2 == 0)), 0.0});
    }
    for (std::size_t g = 0; g < cfg_.generations; ++g) {
      score(pop);
      optimise_constants(pop);
      if (g + 1 == cfg_.generations) break;
      pop = next_generation(pop);
    }
    std::vector<FrontEntry> entries;
    for (std::size_t c = 1; c < best_.size(); ++c) {
      if (!best_[c]) continue;
      const auto& ind = *best_[c];
      entries.push_back({ind.expr, ind.loss, ind.expr.complexity(), ind.expr.variables().size()});
    }
    return pareto_filter(std::move(entries));
  }

 private:
  const Matrix& X_;
  const Vector& y_;
  const SymRegConfig& cfg_;
  Rng rng_;
  std::size_t nvars_;
  std::size_t cap_;
  std::vector<std::optional<Individual>> best_;  // by complexity

  void record(const Individual& ind) {
    const std::size_t c = ind.expr.complexity();
    if (c >= best_.size()) return;
    if (!best_[c] || ind.loss < best_[c]->loss) best_[c] = ind;
  }

  void score(std::vector<Individual>& pop) {
    const std::size_t jobs = static_cast<std::size_t>(std::max(1, cfg_.jobs));
    const std::size_t chunk = (pop.size() + jobs - 1) / jobs;
    std::vector<std::future<void>> work;
    for (std::size_t lo = 0; lo < pop.size(); lo += chunk) {
      const std::size_t hi = std::min(pop.size(), lo + chunk);
      auto fn = [&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) pop[i].loss = mae_loss(pop[i].expr, X_, y_);
      };
      if (jobs == 1) fn();
      else work.push_back(std::async(std::launch::async, fn));
    }
    for (auto& w : work) w.get();
    for (const auto& ind : pop) record(ind);
  }

  Node random_leaf() {
    if (nvars_ > 0 && rng_.uniform() < 0.75) return Node{Op::Var, 0.0, rng_.index(nvars_)};
    return Node{Op::Const, std::round(rng_.uniform(-2.0, 2.0) * 100.0) / 100.0, 0};
  }

  // Appends a subtree of at most `budget` nodes.
  void grow(std::vector<Node>& out, std::size_t budget, int depth, bool full) {
    const bool leaf = depth <= 0 || budget < 2 || (!full && rng_.uniform() < 0.3);
    if (leaf) {
      out.push_back(random_leaf());
      return;
    }
    const bool binary = budget >= 3 && rng_.uniform() < 0.7;
    if (binary) {
      const Op op = rng_.uniform() < 0.15 ? Op::Pow : kBinary[rng_.index(3)];
      out.push_back(Node{op, 0.0, 0});
      const std::size_t before = out.size();
      grow(out, budget - 2, depth - 1, full);
      grow(out, budget - 1 - (out.size() - before), depth - 1, full);
    } else {
      out.push_back(Node{kUnary[rng_.index(kUnary.size())], 0.0, 0});
      grow(out, budget - 1, depth - 1, full);
    }
  }

  Expr random_tree(std::size_t budget, int depth, bool full) {
    Expr e;
    grow(e.nodes, budget, depth, full);
    return e;
  }

  const Individual& tournament(const std::vector<Individual>& pop) {
    const Individual* win = &pop[rng_.index(pop.size())];
    for (std::size_t t = 1; t < cfg_.tournament; ++t) {
      const Individual& c = pop[rng_.index(pop.size())];
      if (better(c, *win)) win = &c;
    }
    return *win;
  }

  static Expr splice(const Expr& a, std::size_t lo, std::size_t hi, const std::vector<Node>& insert) {
    Expr e;
    e.nodes.assign(a.nodes.begin(), a.nodes.begin() + static_cast<std::ptrdiff_t>(lo));
    e.nodes.insert(e.nodes.end(), insert.begin(), insert.end());
    e.nodes.insert(e.nodes.end(), a.nodes.begin() + static_cast<std::ptrdiff_t>(hi), a.nodes.end());
    return e;
  }

  Expr crossover(const Expr& a, const Expr& b) {
    for (int attempt = 0; attempt < 5; ++attempt) {
      const std::size_t i = rng_.index(a.nodes.size());
      const std::size_t iend = subtree_end(a.nodes, i);
      const std::size_t j = rng_.index(b.nodes.size());
      const std::size_t jend = subtree_end(b.nodes, j);
      if (a.nodes.size() - (iend - i) + (jend - j) > cap_) continue;
      const std::vector<Node> donor(b.nodes.begin() + static_cast<std::ptrdiff_t>(j),
                                    b.nodes.begin() + static_cast<std::ptrdiff_t>(jend));
      return splice(a, i, iend, donor);
    }
    return a;
  }

  Expr mutate(const Expr& a) {
    const double r = rng_.uniform();
    const std::size_t i = rng_.index(a.nodes.size());
    if (r < 0.5) {
      const std::size_t iend = subtree_end(a.nodes, i);
      const std::size_t room = cap_ - (a.nodes.size() - (iend - i));
      std::vector<Node> sub;
      grow(sub, std::min<std::size_t>(room, 7), 3, false);
      return splice(a, i, iend, sub);
    }
    Expr e = a;
    bool has_const = false;
    for (const auto& n : e.nodes) has_const |= n.op == Op::Const;
    if (r < 0.75 || !has_const) {
      Node& n = e.nodes[i];
      switch (arity(n.op)) {
        case 0: n = random_leaf(); break;
        case 1: n.op = kUnary[rng_.index(kUnary.size())]; break;
        default: n.op = kBinary[rng_.index(kBinary.size())]; break;
      }
      return e;
    }
    jitter_constants(e, cfg_.const_jitter);
    return e;
  }

  void jitter_constants(Expr& e, double scale) {
    for (auto& n : e.nodes) {
      if (n.op == Op::Const) n.value += scale * rng_.normal() * (1.0 + std::abs(n.value));
    }
  }

  // Stochastic hill climbing on the constants of the best individuals.
  void optimise_constants(std::vector<Individual>& pop) {
    std::vector<std::size_t> order(pop.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t n = std::min(cfg_.const_opt_candidates, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), order.end(),
                      [&](std::size_t a, std::size_t b) { return better(pop[a], pop[b]); });
    for (std::size_t k = 0; k < n; ++k) {
      Individual& ind = pop[order[k]];
      if (std::none_of(ind.expr.nodes.begin(), ind.expr.nodes.end(), [](const Node& x) { return x.op == Op::Const; })) {
        continue;
      }
      double scale = 0.3;
      for (std::size_t s = 0; s < cfg_.const_opt_steps; ++s) {
        Individual trial = ind;
        jitter_constants(trial.expr, scale);
        trial.loss = mae_loss(trial.expr, X_, y_);
        if (trial.loss < ind.loss) {
          ind = std::move(trial);
          record(ind);
        } else {
          scale *= 0.5;
        }
      }
    }
  }

  std::vector<Individual> next_generation(const std::vector<Individual>& pop) {
    std::vector<Individual> next;
    next.reserve(cfg_.population);
    for (const auto& b : best_) {
      if (b && next.size() < cfg_.population / 4) next.push_back(*b);
    }
    while (next.size() < cfg_.population) {
      const double r = rng_.uniform();
      Expr child;
      if (r < cfg_.crossover) {
        const Expr& a = tournament(pop).expr;
        child = crossover(a, tournament(pop).expr);
      } else if (r < cfg_.crossover + cfg_.mutation) {
        child = mutate(tournament(pop).expr);
      } else {
        child = tournament(pop).expr;
      }
      next.push_back({fold_constants(child), 0.0});
    }
    return next;
  }
};

}  // namespace

ParetoFront evolve(const Matrix& X, const Vector& target, const SymRegConfig& cfg) {
  if (X.rows() == 0) throw ConfigError("evolve: no data rows");
  if (X.rows() != target.size()) throw ConfigError("evolve: one target per row required");
  if (cfg.max_complexity < 3) throw ConfigError("evolve: max_complexity must be >= 3");
  if (cfg.population < 2 || cfg.generations < 1 || cfg.tournament < 1) {
    throw ConfigError("evolve: population >= 2, generations >= 1 and tournament >= 1 required");
  }
  for (double r : {cfg.crossover, cfg.mutation}) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("evolve: rates must lie in [0, 1]");
  }
  if (!X.allFinite() || !target.allFinite()) throw ConfigError("evolve: non-finite data");
  return Gp(X, target, cfg).run();
}

// ---------------------------------------------------------------------------
// Distillation

LawReport distill(const Model& model, const std::vector<SubjectFeatures>& subjects, std::size_t indicator,
                  const DistillConfig& cfg) {
  if (indicator >= model.indicators()) throw ConfigError("distill: indicator index out of range");
  if (cfg.target == Target::Contrib && !model.config.use_embedding) {
    throw ConfigError("distill: contribution target requires the feature embedding");
  }
  LawReport r;
  r.component = Component{cfg.target, indicator};
  r.indicator = std::string(to_string(model.catalog.indicators[indicator]));
  const ImportanceScores imp = importance(model, subjects, r.component, Mode::Eval);
  r.features = select_top_k(imp, cfg.top_k);

  std::vector<Matrix> xs;
  std::vector<Vector> ys;
  Eigen::Index rows = 0;
  for (const auto& s : subjects) {
    const ForwardTrace tr = forward(model, s, Mode::Eval);
    const Matrix in = component_inputs(tr, r.component);
    Matrix x(in.rows(), static_cast<Eigen::Index>(r.features.indices.size()));
    for (std::size_t c = 0; c < r.features.indices.size(); ++c) {
      x.col(static_cast<Eigen::Index>(c)) = in.col(static_cast<Eigen::Index>(r.features.indices[c]));
    }
    const auto& it = tr.ind[indicator];
    ys.push_back(cfg.target == Target::Affect ? it.theta : it.alpha);
    rows += x.rows();
    xs.push_back(std::move(x));
  }
  Matrix X(rows, static_cast<Eigen::Index>(r.features.indices.size()));
  Vector y(rows);
  Eigen::Index at = 0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    X.middleRows(at, xs[s].rows()) = xs[s];
    y.segment(at, ys[s].size()) = ys[s];
    at += xs[s].rows();
  }
  if (!X.allFinite() || !y.allFinite()) throw DistillationError("distill: non-finite network outputs");
  r.samples = static_cast<std::size_t>(rows);

  r.front = evolve(X, y, cfg.symreg);
  const std::size_t pick = select_formula(r.front, cfg.symreg.tau, cfg.symreg.delta);
  r.front.selected = pick;
  r.law = r.front.entries[pick];
  const Vector pred = evaluate_rows(r.law.expr, X);
  if (!pred.allFinite()) throw DistillationError("distill: selected law is not finite on every sample");
  r.r2 = r_squared(pred, y);

  at = 0;
  for (std::size_t s = 0; s < subjects.size(); ++s) {
    const Eigen::Index n = xs[s].rows();
    if (s < cfg.fit_subjects) r.fits.push_back({subjects[s].subject_id, ys[s], pred.segment(at, n)});
    at += n;
  }
  return r;
}

void write_law_report(const LawReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string tag = r.indicator + (r.component.target == Target::Contrib ? "_alpha" : "");
  std::vector<std::string> law_vars;
  for (std::size_t v : r.law.expr.variables()) law_vars.push_back(r.features.names.at(v));

  nlohmann::ordered_json j;
  j["indicator"] = r.indicator;
  j["target"] = r.component.target == Target::Affect ? "theta" : "alpha";
  j["features"] = r.features.names;
  j["samples"] = r.samples;
  j["law"] = {{"prefix", to_prefix(r.law.expr)},
              {"infix", to_infix(r.law.expr)},
              {"infix_named", to_infix(r.law.expr, r.features.names)},
              {"complexity", r.law.complexity},
              {"loss", r.law.loss},
              {"vars", r.law.vars},
              {"variables", law_vars},
              {"r2", r.r2}};
  io::write_text(dir / ("laws_" + tag + ".json"), j.dump(2) + "\n");

  std::ostringstream p;
  p << "complexity,loss,vars,selected,expression\n";
  for (std::size_t i = 0; i < r.front.entries.size(); ++i) {
    const auto& e = r.front.entries[i];
    p << e.complexity << ',' << io::fmt_g(e.loss, 12) << ',' << e.vars << ','
      << (r.front.selected && *r.front.selected == i ? 1 : 0) << ",\"" << to_infix(e.expr) << "\"\n";
  }
  io::write_text(dir / ("pareto_" + tag + ".csv"), p.str());

  for (const auto& f : r.fits) {
    std::ostringstream os;
    os << "window,model,law\n";
    for (Eigen::Index q = 0; q < f.model_output.size(); ++q) {
      os << q << ',' << io::fmt_g(f.model_output(q), 12) << ',' << io::fmt_g(f.law_output(q), 12) << '\n';
    }
    io::write_text(dir / ("fit_" + tag + "_" + f.subject_id + ".csv"), os.str());
  }
}

}  // namespace physio
