#pragma once

#include "physio/common.hpp"
#include "physio/features.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace physio {

// Train: batch statistics of the current subject, running stats updated by
// the caller. Subject: batch statistics of the subject being scored, nothing
// updated (held-out scoring uses the normalisation seen in training).
// Eval: running statistics.
enum class Mode { Train, Subject, Eval };

// Batch normalisation over the rows of a windows x d matrix.
//
// The first `static_cols` columns hold subject attributes, which are constant
// inside one subject's batch; batch statistics would map them to zero. They
// are normalised with fixed cross-subject statistics instead (static_mean /
// static_var, computed once from the training subjects) in both modes.
struct BatchNorm {
  Vector gamma, beta;                // affine, learned
  Vector running_mean, running_var;  // dynamic columns only are updated
  Vector static_mean, static_var;    // size static_cols
  std::size_t static_cols = 0;
  double momentum = 0.1;
  double eps = 1e-5;
  bool bypass = false;  // identity (toy models and oracles)

  explicit BatchNorm(std::size_t d = 0);
  std::size_t dim() const { return static_cast<std::size_t>(gamma.size()); }
};

struct BatchNormCache {
  Matrix xhat;
  Vector inv_std;
  bool batch_stats = false;  // dynamic columns normalised with batch statistics
  Vector batch_mean, batch_var_unbiased;
};

// y = x W^T + b, rows are windows.
struct Dense {
  Matrix W;  // out x in
  Vector b;  // out

  Dense() = default;
  Dense(std::size_t in, std::size_t out) : W(Matrix::Zero(out, in)), b(Vector::Zero(out)) {}
  void init_uniform(Rng& rng);  // +-1/sqrt(fan_in)
};

// alpha_q = W2 relu(W1 BN(PF_q) + b1) + b2
struct ContribNet {
  BatchNorm bn;
  Dense l1, l2;
};

// theta_q from gamma_q: BN, then hidden ReLU layers, scalar output.
struct AffectNet {
  BatchNorm bn;
  std::vector<Dense> layers;
};

// logits = g2(g1(Phi)), two affine maps.
struct AffectAnalyser {
  Dense g1, g2;
};

struct ModelConfig {
  std::size_t contrib_hidden = 100;
  std::size_t affect_hidden = 100;
  std::size_t affect_layers = 3;  // hidden layers + scalar output
  double lambda = 0.01;
  bool use_embedding = true;   // false: gamma uses raw B_j, alpha fixed at 1
  bool use_attributes = true;  // false: A dropped from PF and gamma
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  std::uint64_t seed = 7;
};

struct Model {
  ModelConfig config;
  FeatureCatalog catalog;
  std::vector<ContribNet> contrib;  // empty when use_embedding is false
  std::vector<AffectNet> affect;
  AffectAnalyser analyser;
  Vector u;  // initial affective state, one entry per indicator

  std::size_t indicators() const { return catalog.indicators.size(); }
  std::size_t attribute_dim() const { return config.use_attributes ? catalog.k() : 0; }
  std::size_t contrib_input_dim() const { return attribute_dim() + catalog.m(); }
  std::size_t affect_input_dim(std::size_t j) const { return attribute_dim() + catalog.m_of(j); }
  // Same architecture with every parameter and running statistic zeroed;
  // used as the gradient container.
  Model zeros_like() const;
};

// attribute_rows: one attribute vector per training subject, used for the
// static-column normalisation statistics. Empty keeps mean 0 / variance 1.
Model make_model(const FeatureCatalog& catalog, const ModelConfig& cfg,
                 const std::vector<Vector>& attribute_rows = {});

// Flat view over every trainable tensor, in a fixed order.
struct ParamRef {
  std::string name;
  std::span<double> values;
};
std::vector<ParamRef> parameters(Model& model);
std::size_t parameter_count(Model& model);

// --- building blocks -------------------------------------------------------

Matrix batchnorm_forward(const BatchNorm& bn, const Matrix& x, Mode mode, BatchNormCache* cache);
// Returns dL/dx; accumulates dgamma/dbeta into grad.
Matrix batchnorm_backward(const BatchNorm& bn, const BatchNormCache& cache, const Matrix& dy, BatchNorm* grad);
// Running-statistics momentum update from a train-mode cache.
void batchnorm_update_running(BatchNorm& bn, const BatchNormCache& cache);

Matrix dense_forward(const Dense& l, const Matrix& x);

// Causal contribution-weighted cumulative sum: beta[q,f] = sum_{t<=q} alpha[t] B[t,f].
Matrix triu_encode(const Matrix& B, const Vector& alpha);

struct ContribCache {
  BatchNormCache bn;
  Matrix h_pre;  // windows x H
};
Vector contribnet_forward(const ContribNet& net, const Matrix& pf, Mode mode, ContribCache* cache = nullptr);
// Returns dL/dPF; accumulates parameter gradients into grad when non-null.
Matrix contribnet_backward(const ContribNet& net, const ContribCache& cache, const Vector& dalpha,
                           ContribNet* grad);

struct AffectCache {
  BatchNormCache bn;
  Matrix input;
  std::vector<Matrix> pre;  // pre-activation of each layer
};
Vector affectnet_forward(const AffectNet& net, const Matrix& gamma, Mode mode, AffectCache* cache = nullptr);
// Returns dL/dgamma; accumulates parameter gradients into grad when non-null.
Matrix affectnet_backward(const AffectNet& net, const AffectCache& cache, const Vector& dtheta, AffectNet* grad);

// --- full forward ----------------------------------------------------------

struct IndicatorTrace {
  Matrix block;   // raw B_j, windows x m_j
  Vector alpha;   // windows
  Matrix beta;    // windows x m_j
  Matrix gamma;   // windows x (k + m_j)
  Vector theta;   // windows
  ContribCache contrib;
  AffectCache affect;
};

struct ForwardTrace {
  Mode mode = Mode::Eval;
  Matrix contrib_input;  // PF as seen by the ContribNets
  std::vector<IndicatorTrace> ind;
  Matrix Theta;   // windows x M
  Matrix Phi;     // windows x M
  Matrix hidden;  // analyser g1 output
  Matrix logits;  // windows x 3

  std::size_t windows() const { return static_cast<std::size_t>(Phi.rows()); }
  std::vector<int> predictions() const;
};

ForwardTrace forward(const Model& model, const SubjectFeatures& features, Mode mode);
// Folds the train-mode batch statistics of a trace into the running stats.
void update_running_stats(Model& model, const ForwardTrace& trace);

// --- checkpoint ------------------------------------------------------------

// JSON-of-tensors file: config, catalog (+hash), all parameters and BN state.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
// Throws SchemaError when expected_catalog is given and its hash differs.
Model load_checkpoint(const std::filesystem::path& path, const FeatureCatalog* expected_catalog = nullptr);

}  // namespace physio
