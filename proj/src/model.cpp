#include "physio/model.hpp"

#include "physio/io.hpp"

#include <json.hpp>

#include <cmath>

namespace physio {

using nlohmann::json;

BatchNorm::BatchNorm(std::size_t d)
    : gamma(Vector::Ones(static_cast<Eigen::Index>(d))),
      beta(Vector::Zero(static_cast<Eigen::Index>(d))),
      running_mean(Vector::Zero(static_cast<Eigen::Index>(d))),
      running_var(Vector::Ones(static_cast<Eigen::Index>(d))) {}

void Dense::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(W.cols()));
  for (Eigen::Index r = 0; r < W.rows(); ++r) {
    for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-bound, bound);
  }
  for (Eigen::Index r = 0; r < b.size(); ++r) b(r) = rng.uniform(-bound, bound);
}

namespace {

BatchNorm make_bn(std::size_t d, std::size_t static_cols, const ModelConfig& cfg, const Vector& smean,
                  const Vector& svar) {
  BatchNorm bn(d);
  bn.static_cols = static_cols;
  bn.static_mean = smean.head(static_cast<Eigen::Index>(static_cols));
  bn.static_var = svar.head(static_cast<Eigen::Index>(static_cols));
  bn.momentum = cfg.bn_momentum;
  bn.eps = cfg.bn_eps;
  return bn;
}

void zero(Dense& l) {
  l.W.setZero();
  l.b.setZero();
}

void zero(BatchNorm& bn) {
  bn.gamma.setZero();
  bn.beta.setZero();
  bn.running_mean.setZero();
  bn.running_var.setZero();
  bn.static_mean.setZero();
  bn.static_var.setZero();
}

std::span<double> span_of(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_mask(const Matrix& pre, const Matrix& d) {
  return (pre.array() > 0.0).select(d, 0.0);
}

// Accumulates dense-layer gradients; returns dL/dx.
Matrix dense_backward(const Dense& l, const Matrix& x, const Matrix& dy, Dense* grad) {
  if (grad) {
    grad->W.noalias() += dy.transpose() * x;
    grad->b += dy.colwise().sum().transpose();
  }
  return dy * l.W;
}

}  // namespace

Model Model::zeros_like() const {
  Model g = *this;
  for (auto& c : g.contrib) {
    zero(c.bn);
    zero(c.l1);
    zero(c.l2);
  }
  for (auto& a : g.affect) {
    zero(a.bn);
    for (auto& l : a.layers) zero(l);
  }
  zero(g.analyser.g1);
  zero(g.analyser.g2);
  g.u.setZero();
  return g;
}

Model make_model(const FeatureCatalog& catalog, const ModelConfig& cfg, const std::vector<Vector>& attribute_rows) {
  if (catalog.indicators.empty()) throw ConfigError("model needs at least one indicator");
  if (cfg.contrib_hidden == 0 || cfg.affect_hidden == 0) throw ConfigError("hidden width must be positive");
  if (cfg.affect_layers < 2) throw ConfigError("AffectNet needs at least two layers");
  if (!(cfg.bn_eps > 0.0)) throw ConfigError("batch-norm epsilon must be positive");

  Model model;
  model.config = cfg;
  model.catalog = catalog;
  const std::size_t k = model.attribute_dim();
  const std::size_t M = catalog.indicators.size();

  // Cross-subject statistics for the attribute columns (population variance).
  Vector smean = Vector::Zero(static_cast<Eigen::Index>(catalog.k()));
  Vector svar = Vector::Ones(static_cast<Eigen::Index>(catalog.k()));
  if (!attribute_rows.empty()) {
    smean.setZero();
    for (const auto& a : attribute_rows) smean += a;
    smean /= static_cast<double>(attribute_rows.size());
    svar.setZero();
    for (const auto& a : attribute_rows) svar += (a - smean).cwiseAbs2();
    svar /= static_cast<double>(attribute_rows.size());
  }

  Rng rng(cfg.seed);
  if (cfg.use_embedding) {
    for (std::size_t j = 0; j < M; ++j) {
      ContribNet c;
      c.bn = make_bn(model.contrib_input_dim(), k, cfg, smean, svar);
      c.l1 = Dense(model.contrib_input_dim(), cfg.contrib_hidden);
      c.l2 = Dense(cfg.contrib_hidden, 1);
      c.l1.init_uniform(rng);
      c.l2.init_uniform(rng);
      model.contrib.push_back(std::move(c));
    }
  }
  for (std::size_t j = 0; j < M; ++j) {
    AffectNet a;
    a.bn = make_bn(model.affect_input_dim(j), k, cfg, smean, svar);
    std::size_t in = model.affect_input_dim(j);
    for (std::size_t l = 0; l + 1 < cfg.affect_layers; ++l) {
      a.layers.emplace_back(in, cfg.affect_hidden);
      in = cfg.affect_hidden;
    }
    a.layers.emplace_back(in, 1);
    for (auto& l : a.layers) l.init_uniform(rng);
    model.affect.push_back(std::move(a));
  }
  model.analyser.g1 = Dense(M, M);
  model.analyser.g2 = Dense(M, kNumClasses);
  model.analyser.g1.init_uniform(rng);
  model.analyser.g2.init_uniform(rng);
  model.u = Vector::Zero(static_cast<Eigen::Index>(M));
  return model;
}

std::vector<ParamRef> parameters(Model& model) {
  std::vector<ParamRef> out;
  const auto add_dense = [&](const std::string& p, Dense& l) {
    out.push_back({p + ".W", span_of(l.W)});
    out.push_back({p + ".b", span_of(l.b)});
  };
  const auto add_bn = [&](const std::string& p, BatchNorm& bn) {
    if (bn.bypass) return;
    out.push_back({p + ".bn.gamma", span_of(bn.gamma)});
    out.push_back({p + ".bn.beta", span_of(bn.beta)});
  };
  for (std::size_t j = 0; j < model.contrib.size(); ++j) {
    const std::string p = "contrib." + std::string(to_string(model.catalog.indicators[j]));
    add_bn(p, model.contrib[j].bn);
    add_dense(p + ".l1", model.contrib[j].l1);
    add_dense(p + ".l2", model.contrib[j].l2);
  }
  for (std::size_t j = 0; j < model.affect.size(); ++j) {
    const std::string p = "affect." + std::string(to_string(model.catalog.indicators[j]));
    add_bn(p, model.affect[j].bn);
    for (std::size_t l = 0; l < model.affect[j].layers.size(); ++l) {
      add_dense(p + ".l" + std::to_string(l + 1), model.affect[j].layers[l]);
    }
  }
  add_dense("analyser.g1", model.analyser.g1);
  add_dense("analyser.g2", model.analyser.g2);
  out.push_back({"u", span_of(model.u)});
  return out;
}

std::size_t parameter_count(Model& model) {
  std::size_t n = 0;
  for (const auto& p : parameters(model)) n += p.values.size();
  return n;
}

// ---------------------------------------------------------------------------

Matrix batchnorm_forward(const BatchNorm& bn, const Matrix& x, Mode mode, BatchNormCache* cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (static_cast<std::size_t>(d) != bn.dim()) {
    throw ConfigError("batch norm expects " + std::to_string(bn.dim()) + " columns, got " + std::to_string(d));
  }
  if (bn.bypass) {
    if (cache) {
      cache->xhat = x;
      cache->inv_std = Vector::Ones(d);
      cache->batch_stats = false;
    }
    return x;
  }
  const auto s = static_cast<Eigen::Index>(bn.static_cols);
  Vector mean(d), var(d);
  mean.head(s) = bn.static_mean;
  var.head(s) = bn.static_var;
  const bool batch = mode != Mode::Eval && n > 1;
  Vector bmean, bvar_unbiased;
  if (batch) {
    bmean = x.colwise().mean().transpose();
    const Matrix centred = x.rowwise() - bmean.transpose();
    const Vector ss = centred.colwise().squaredNorm().transpose();
    mean.tail(d - s) = bmean.tail(d - s);
    var.tail(d - s) = ss.tail(d - s) / static_cast<double>(n);
    bvar_unbiased = ss / static_cast<double>(n - 1);
  } else {
    mean.tail(d - s) = bn.running_mean.tail(d - s);
    var.tail(d - s) = bn.running_var.tail(d - s);
  }
  const Vector inv_std = (var.array() + bn.eps).rsqrt().matrix();
  Matrix xhat = (x.rowwise() - mean.transpose()) * inv_std.asDiagonal();
  Matrix y = (xhat * bn.gamma.asDiagonal()).rowwise() + bn.beta.transpose();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = inv_std;
    cache->batch_stats = batch;
    cache->batch_mean = std::move(bmean);
    cache->batch_var_unbiased = std::move(bvar_unbiased);
  }
  return y;
}

Matrix batchnorm_backward(const BatchNorm& bn, const BatchNormCache& cache, const Matrix& dy, BatchNorm* grad) {
  if (bn.bypass) return dy;
  const Eigen::Index n = dy.rows();
  const Eigen::Index d = dy.cols();
  const auto s = static_cast<Eigen::Index>(bn.static_cols);
  if (grad) {
    grad->gamma += dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
    grad->beta += dy.colwise().sum().transpose();
  }
  const Matrix dxhat = dy * bn.gamma.asDiagonal();
  Matrix dx = dxhat * cache.inv_std.asDiagonal();
  if (cache.batch_stats) {
    const double inv_n = 1.0 / static_cast<double>(n);
    for (Eigen::Index c = s; c < d; ++c) {
      const double sum_d = dxhat.col(c).sum();
      const double sum_dx = dxhat.col(c).dot(cache.xhat.col(c));
      dx.col(c) = cache.inv_std(c) * inv_n *
                  (static_cast<double>(n) * dxhat.col(c).array() - sum_d - cache.xhat.col(c).array() * sum_dx).matrix();
    }
  }
  return dx;
}

void batchnorm_update_running(BatchNorm& bn, const BatchNormCache& cache) {
  if (bn.bypass || !cache.batch_stats) return;
  const auto s = static_cast<Eigen::Index>(bn.static_cols);
  const Eigen::Index dyn = static_cast<Eigen::Index>(bn.dim()) - s;
  bn.running_mean.tail(dyn) = (1.0 - bn.momentum) * bn.running_mean.tail(dyn) + bn.momentum * cache.batch_mean.tail(dyn);
  bn.running_var.tail(dyn) =
      (1.0 - bn.momentum) * bn.running_var.tail(dyn) + bn.momentum * cache.batch_var_unbiased.tail(dyn);
}

Matrix dense_forward(const Dense& l, const Matrix& x) {
  if (x.cols() != l.W.cols()) {
    throw ConfigError("dense layer expects " + std::to_string(l.W.cols()) + " inputs, got " + std::to_string(x.cols()));
  }
  Matrix y = x * l.W.transpose();
  y.rowwise() += l.b.transpose();
  return y;
}

Matrix triu_encode(const Matrix& B, const Vector& alpha) {
  if (B.rows() != alpha.size()) throw ConfigError("triu_encode: alpha length differs from window count");
  Matrix beta(B.rows(), B.cols());
  for (Eigen::Index c = 0; c < B.cols(); ++c) {
    double acc = 0.0;
    for (Eigen::Index q = 0; q < B.rows(); ++q) {
      acc += alpha(q) * B(q, c);
      beta(q, c) = acc;
    }
  }
  return beta;
}

Vector contribnet_forward(const ContribNet& net, const Matrix& pf, Mode mode, ContribCache* cache) {
  BatchNormCache local;
  BatchNormCache& bc = cache ? cache->bn : local;
  const Matrix z = batchnorm_forward(net.bn, pf, mode, &bc);
  Matrix h_pre = dense_forward(net.l1, z);
  Vector alpha = dense_forward(net.l2, relu(h_pre)).col(0);
  if (cache) cache->h_pre = std::move(h_pre);
  return alpha;
}

Matrix contribnet_backward(const ContribNet& net, const ContribCache& cache, const Vector& dalpha, ContribNet* grad) {
  const Matrix z_in = cache.bn.xhat * net.bn.gamma.asDiagonal();
  const Matrix z = net.bn.bypass ? cache.bn.xhat : Matrix(z_in.rowwise() + net.bn.beta.transpose());
  const Matrix h = relu(cache.h_pre);
  const Matrix dout = dalpha;  // windows x 1
  const Matrix dh = dense_backward(net.l2, h, dout, grad ? &grad->l2 : nullptr);
  const Matrix dpre = relu_mask(cache.h_pre, dh);
  const Matrix dz = dense_backward(net.l1, z, dpre, grad ? &grad->l1 : nullptr);
  return batchnorm_backward(net.bn, cache.bn, dz, grad ? &grad->bn : nullptr);
}

Vector affectnet_forward(const AffectNet& net, const Matrix& gamma, Mode mode, AffectCache* cache) {
  BatchNormCache local;
  BatchNormCache& bc = cache ? cache->bn : local;
  Matrix x = batchnorm_forward(net.bn, gamma, mode, &bc);
  if (cache) {
    cache->input = x;
    cache->pre.clear();
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    Matrix pre = dense_forward(net.layers[l], x);
    const bool last = l + 1 == net.layers.size();
    x = last ? pre : relu(pre);
    if (cache) cache->pre.push_back(std::move(pre));
  }
  return x.col(0);
}

Matrix affectnet_backward(const AffectNet& net, const AffectCache& cache, const Vector& dtheta, AffectNet* grad) {
  Matrix d = dtheta;
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const bool last = l + 1 == net.layers.size();
    if (!last) d = relu_mask(cache.pre[l], d);
    const Matrix in = l == 0 ? cache.input : relu(cache.pre[l - 1]);
    d = dense_backward(net.layers[l], in, d, grad ? &grad->layers[l] : nullptr);
  }
  return batchnorm_backward(net.bn, cache.bn, d, grad ? &grad->bn : nullptr);
}

// ---------------------------------------------------------------------------

std::vector<int> ForwardTrace::predictions() const {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index q = 0; q < logits.rows(); ++q) {
    Eigen::Index best = 0;
    logits.row(q).maxCoeff(&best);
    out[static_cast<std::size_t>(q)] = static_cast<int>(best);
  }
  return out;
}

ForwardTrace forward(const Model& model, const SubjectFeatures& features, Mode mode) {
  const auto& cat = model.catalog;
  const std::size_t M = model.indicators();
  const Eigen::Index xi = features.pf.rows();
  const auto k_full = static_cast<Eigen::Index>(cat.k());
  const auto k = static_cast<Eigen::Index>(model.attribute_dim());
  if (features.blocks.size() != M || static_cast<std::size_t>(features.pf.cols()) != cat.k() + cat.m()) {
    throw ConfigError("subject '" + features.subject_id + "': features do not match the model catalog");
  }
  if (xi == 0) throw ConfigError("subject '" + features.subject_id + "': no windows");

  ForwardTrace tr;
  tr.mode = mode;
  tr.contrib_input = model.config.use_attributes ? features.pf : Matrix(features.pf.rightCols(features.pf.cols() - k_full));
  tr.ind.resize(M);
  tr.Theta.resize(xi, static_cast<Eigen::Index>(M));
  for (std::size_t j = 0; j < M; ++j) {
    auto& it = tr.ind[j];
    it.block = features.blocks[j];
    const Matrix& B = it.block;
    if (model.config.use_embedding) {
      it.alpha = contribnet_forward(model.contrib[j], tr.contrib_input, mode, &it.contrib);
      it.beta = triu_encode(B, it.alpha);
    } else {
      it.alpha = Vector::Ones(xi);
      it.beta = B;
    }
    it.gamma.resize(xi, k + B.cols());
    if (k > 0) it.gamma.leftCols(k) = features.pf.leftCols(k);
    it.gamma.rightCols(B.cols()) = it.beta;
    it.theta = affectnet_forward(model.affect[j], it.gamma, mode, &it.affect);
    tr.Theta.col(static_cast<Eigen::Index>(j)) = it.theta;
  }
  tr.Phi = tr.Theta.rowwise() + model.u.transpose();
  tr.hidden = dense_forward(model.analyser.g1, tr.Phi);
  tr.logits = dense_forward(model.analyser.g2, tr.hidden);
  return tr;
}

void update_running_stats(Model& model, const ForwardTrace& trace) {
  for (std::size_t j = 0; j < trace.ind.size(); ++j) {
    if (!model.contrib.empty()) batchnorm_update_running(model.contrib[j].bn, trace.ind[j].contrib.bn);
    batchnorm_update_running(model.affect[j].bn, trace.ind[j].affect.bn);
  }
}

// ---------------------------------------------------------------------------
// Checkpoint

namespace {

json tensor(const Matrix& m) {
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

json tensor(const Vector& v) { return tensor(Matrix(v)); }

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw SchemaError("checkpoint tensor size mismatch");
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[i++].get<double>();
  }
  return m;
}

Vector vector_from(const json& j) {
  Matrix m = matrix_from(j);
  if (m.cols() != 1) throw SchemaError("checkpoint tensor is not a vector");
  return m.col(0);
}

json dense_json(const Dense& l) { return {{"W", tensor(l.W)}, {"b", tensor(l.b)}}; }

void dense_load(const json& j, Dense& l) {
  Matrix W = matrix_from(j.at("W"));
  Vector b = vector_from(j.at("b"));
  if (W.rows() != l.W.rows() || W.cols() != l.W.cols() || b.size() != l.b.size()) {
    throw SchemaError("checkpoint layer shape differs from configured architecture");
  }
  l.W = std::move(W);
  l.b = std::move(b);
}

json bn_json(const BatchNorm& bn) {
  return {{"gamma", tensor(bn.gamma)},
          {"beta", tensor(bn.beta)},
          {"running_mean", tensor(bn.running_mean)},
          {"running_var", tensor(bn.running_var)},
          {"static_cols", bn.static_cols},
          {"static_mean", tensor(bn.static_mean)},
          {"static_var", tensor(bn.static_var)},
          {"momentum", bn.momentum},
          {"eps", bn.eps},
          {"bypass", bn.bypass}};
}

void bn_load(const json& j, BatchNorm& bn) {
  bn.gamma = vector_from(j.at("gamma"));
  bn.beta = vector_from(j.at("beta"));
  bn.running_mean = vector_from(j.at("running_mean"));
  bn.running_var = vector_from(j.at("running_var"));
  bn.static_cols = j.at("static_cols").get<std::size_t>();
  bn.static_mean = bn.static_cols ? vector_from(j.at("static_mean")) : Vector();
  bn.static_var = bn.static_cols ? vector_from(j.at("static_var")) : Vector();
  bn.momentum = j.at("momentum").get<double>();
  bn.eps = j.at("eps").get<double>();
  bn.bypass = j.at("bypass").get<bool>();
}

json catalog_json(const FeatureCatalog& cat) {
  json inds = json::array();
  for (Indicator i : cat.indicators) inds.push_back(std::string(to_string(i)));
  return {{"attributes", cat.attribute_names}, {"indicators", inds}, {"features", cat.feature_names}};
}

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  const auto& c = model.config;
  json j;
  j["format"] = "physioformer-checkpoint";
  j["version"] = 1;
  j["catalog_hash"] = hex64(model.catalog.hash());
  j["catalog"] = catalog_json(model.catalog);
  j["config"] = {{"contrib_hidden", c.contrib_hidden}, {"affect_hidden", c.affect_hidden},
                 {"affect_layers", c.affect_layers},   {"lambda", c.lambda},
                 {"use_embedding", c.use_embedding},   {"use_attributes", c.use_attributes},
                 {"bn_momentum", c.bn_momentum},       {"bn_eps", c.bn_eps},
                 {"seed", c.seed},                     {"activation", "relu"}};
  json contrib = json::array();
  for (const auto& n : model.contrib) contrib.push_back({{"bn", bn_json(n.bn)}, {"l1", dense_json(n.l1)}, {"l2", dense_json(n.l2)}});
  json affect = json::array();
  for (const auto& n : model.affect) {
    json layers = json::array();
    for (const auto& l : n.layers) layers.push_back(dense_json(l));
    affect.push_back({{"bn", bn_json(n.bn)}, {"layers", layers}});
  }
  j["contrib"] = contrib;
  j["affect"] = affect;
  j["analyser"] = {{"g1", dense_json(model.analyser.g1)}, {"g2", dense_json(model.analyser.g2)}};
  j["u"] = tensor(model.u);
  io::write_text(path, j.dump() + "\n");
}

Model load_checkpoint(const std::filesystem::path& path, const FeatureCatalog* expected_catalog) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": malformed checkpoint: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "physioformer-checkpoint") throw SchemaError(path.string() + ": not a checkpoint");
    FeatureCatalog cat;
    const auto& jc = j.at("catalog");
    cat.attribute_names = jc.at("attributes").get<std::vector<std::string>>();
    for (const auto& i : jc.at("indicators")) cat.indicators.push_back(parse_indicator(i.get<std::string>()));
    cat.feature_names = jc.at("features").get<std::vector<std::vector<std::string>>>();
    if (hex64(cat.hash()) != j.at("catalog_hash").get<std::string>()) {
      throw SchemaError(path.string() + ": catalog hash does not match stored catalog");
    }
    if (expected_catalog && expected_catalog->hash() != cat.hash()) {
      throw SchemaError(path.string() + ": checkpoint catalog hash " + hex64(cat.hash()) +
                        " does not match feature catalog " + hex64(expected_catalog->hash()));
    }
    ModelConfig cfg;
    const auto& c = j.at("config");
    cfg.contrib_hidden = c.at("contrib_hidden").get<std::size_t>();
    cfg.affect_hidden = c.at("affect_hidden").get<std::size_t>();
    cfg.affect_layers = c.at("affect_layers").get<std::size_t>();
    cfg.lambda = c.at("lambda").get<double>();
    cfg.use_embedding = c.at("use_embedding").get<bool>();
    cfg.use_attributes = c.at("use_attributes").get<bool>();
    cfg.bn_momentum = c.at("bn_momentum").get<double>();
    cfg.bn_eps = c.at("bn_eps").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();

    Model model = make_model(cat, cfg);
    const auto& jcon = j.at("contrib");
    if (jcon.size() != model.contrib.size() || j.at("affect").size() != model.affect.size()) {
      throw SchemaError(path.string() + ": sub-network count differs from catalog");
    }
    for (std::size_t i = 0; i < model.contrib.size(); ++i) {
      bn_load(jcon[i].at("bn"), model.contrib[i].bn);
      dense_load(jcon[i].at("l1"), model.contrib[i].l1);
      dense_load(jcon[i].at("l2"), model.contrib[i].l2);
    }
    for (std::size_t i = 0; i < model.affect.size(); ++i) {
      const auto& ja = j.at("affect")[i];
      bn_load(ja.at("bn"), model.affect[i].bn);
      const auto& layers = ja.at("layers");
      if (layers.size() != model.affect[i].layers.size()) throw SchemaError(path.string() + ": layer count mismatch");
      for (std::size_t l = 0; l < layers.size(); ++l) dense_load(layers[l], model.affect[i].layers[l]);
    }
    dense_load(j.at("analyser").at("g1"), model.analyser.g1);
    dense_load(j.at("analyser").at("g2"), model.analyser.g2);
    model.u = vector_from(j.at("u"));
    if (model.u.size() != static_cast<Eigen::Index>(model.indicators())) throw SchemaError(path.string() + ": u size mismatch");
    return model;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": malformed checkpoint: " + e.what());
  }
}

}  // namespace physio
