#include "physio/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

namespace physio {

namespace {

// log-softmax probability of class c for row q.
double log_prob(const Matrix& logits, Eigen::Index q, int c) {
  const double mx = logits.row(q).maxCoeff();
  const double lse = mx + std::log((logits.row(q).array() - mx).exp().sum());
  return logits(q, c) - lse;
}

void check_label(int l) {
  if (l != kIgnoreLabel && (l < 0 || l >= kNumClasses)) {
    throw ConfigError("label " + std::to_string(l) + " outside {0,1,2}");
  }
}

}  // namespace

LossValue loss(const ForwardTrace& trace, std::span<const int> labels, double lambda) {
  const Eigen::Index xi = trace.logits.rows();
  if (static_cast<Eigen::Index>(labels.size()) != xi) throw ConfigError("loss: one label per window required");
  LossValue out;
  double ce = 0.0;
  for (Eigen::Index q = 0; q < xi; ++q) {
    const int l = labels[static_cast<std::size_t>(q)];
    check_label(l);
    if (l == kIgnoreLabel) continue;
    ce -= log_prob(trace.logits, q, l);
    ++out.labeled;
  }
  out.ce = out.labeled ? ce / static_cast<double>(out.labeled) : 0.0;
  double reg = 0.0;
  for (const auto& it : trace.ind) reg += (it.alpha.array() - 1.0).square().sum();
  const double count = static_cast<double>(trace.ind.size()) * static_cast<double>(xi);
  out.reg = count > 0 ? lambda * reg / count : 0.0;
  out.total = out.ce + out.reg;
  return out;
}

Model backward(const Model& model, const ForwardTrace& trace, std::span<const int> labels, double lambda) {
  const Eigen::Index xi = trace.logits.rows();
  const std::size_t M = model.indicators();
  Model grad = model.zeros_like();

  std::size_t labeled = 0;
  for (int l : labels) labeled += l != kIgnoreLabel;
  Matrix dlogits = Matrix::Zero(xi, kNumClasses);
  if (labeled > 0) {
    const double scale = 1.0 / static_cast<double>(labeled);
    for (Eigen::Index q = 0; q < xi; ++q) {
      const int l = labels[static_cast<std::size_t>(q)];
      if (l == kIgnoreLabel) continue;
      for (int c = 0; c < kNumClasses; ++c) dlogits(q, c) = std::exp(log_prob(trace.logits, q, c)) * scale;
      dlogits(q, l) -= scale;
    }
  }

  auto& g1 = grad.analyser.g1;
  auto& g2 = grad.analyser.g2;
  g2.W.noalias() += dlogits.transpose() * trace.hidden;
  g2.b += dlogits.colwise().sum().transpose();
  const Matrix dhidden = dlogits * model.analyser.g2.W;
  g1.W.noalias() += dhidden.transpose() * trace.Phi;
  g1.b += dhidden.colwise().sum().transpose();
  const Matrix dPhi = dhidden * model.analyser.g1.W;
  grad.u = dPhi.colwise().sum().transpose();

  const double reg_scale = 2.0 * lambda / (static_cast<double>(M) * static_cast<double>(xi));
  for (std::size_t j = 0; j < M; ++j) {
    const auto& it = trace.ind[j];
    const Vector dtheta = dPhi.col(static_cast<Eigen::Index>(j));
    const Matrix dgamma = affectnet_backward(model.affect[j], it.affect, dtheta, &grad.affect[j]);
    if (!model.config.use_embedding) continue;
    const Matrix dbeta = dgamma.rightCols(it.beta.cols());
    // beta[q] = sum_{t<=q} alpha_t B_t  =>  dalpha_t = B_t . sum_{q>=t} dbeta_q
    Vector dalpha(xi);
    Eigen::RowVectorXd tail = Eigen::RowVectorXd::Zero(dbeta.cols());
    for (Eigen::Index q = xi; q-- > 0;) {
      tail += dbeta.row(q);
      dalpha(q) = it.block.row(q).dot(tail);
    }
    dalpha += reg_scale * (it.alpha.array() - 1.0).matrix();
    contribnet_backward(model.contrib[j], it.contrib, dalpha, &grad.contrib[j]);
  }
  return grad;
}

void RmsProp::step(Model& params, Model& grads, double lr) {
  auto p = parameters(params);
  auto g = parameters(grads);
  if (p.size() != g.size()) throw ConfigError("optimizer: gradient layout differs from parameters");
  if (v.empty()) {
    for (const auto& ref : p) v.push_back(Vector::Zero(static_cast<Eigen::Index>(ref.values.size())));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& acc = v[i];
    for (std::size_t e = 0; e < p[i].values.size(); ++e) {
      const double ge = g[i].values[e];
      double& ve = acc(static_cast<Eigen::Index>(e));
      ve = decay * ve + (1.0 - decay) * ge * ge;
      p[i].values[e] -= lr * ge / std::sqrt(ve + eps);
    }
  }
}

std::vector<int> masked_labels(const LabeledWindows& subject, const std::vector<std::size_t>& windows) {
  std::vector<int> out(subject.labels.size(), kIgnoreLabel);
  for (std::size_t q : windows) out.at(q) = subject.labels.at(q);
  return out;
}

PooledEval pooled_eval(const Model& model, const Dataset& ds, const std::vector<std::vector<std::size_t>>& windows,
                       Mode mode) {
  PooledEval out;
  double ce = 0.0;
  std::size_t correct = 0;
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    if (s >= windows.size() || windows[s].empty()) continue;
    const auto& subj = ds.subjects[s];
    const ForwardTrace tr = forward(model, subj.features, mode);
    const auto pred = tr.predictions();
    for (std::size_t q : windows[s]) {
      ce -= log_prob(tr.logits, static_cast<Eigen::Index>(q), subj.labels[q]);
      correct += pred[q] == subj.labels[q];
      ++out.windows;
    }
  }
  if (out.windows > 0) {
    out.ce = ce / static_cast<double>(out.windows);
    out.acc = static_cast<double>(correct) / static_cast<double>(out.windows);
  }
  return out;
}

std::vector<Vector> training_attributes(const Dataset& ds, const Split& split) {
  std::vector<Vector> rows;
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    if (s < split.train.size() && !split.train[s].empty()) rows.push_back(ds.subjects[s].features.attributes);
  }
  return rows;
}

namespace {

void check_finite(Model& grads, const LossValue& lv, std::size_t epoch, const std::string& subject) {
  if (!std::isfinite(lv.total)) {
    throw TrainingFault("non-finite loss at epoch " + std::to_string(epoch) + ", subject '" + subject +
                        "' (ce=" + std::to_string(lv.ce) + ", reg=" + std::to_string(lv.reg) + ")");
  }
  for (const auto& p : parameters(grads)) {
    for (double g : p.values) {
      if (!std::isfinite(g)) {
        throw TrainingFault("non-finite gradient in " + p.name + " at epoch " + std::to_string(epoch) +
                            ", subject '" + subject + "'");
      }
    }
  }
}

}  // namespace

TrainResult train(Model model, const Dataset& ds, const Split& split, const TrainConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!(cfg.lr >= 0.0) || !(cfg.lambda >= 0.0) || cfg.patience < 1 || cfg.step_epochs < 1) {
    throw ConfigError("invalid training configuration (lr >= 0, lambda >= 0, patience >= 1, step_epochs >= 1)");
  }
  if (split.train.size() != ds.subjects.size()) throw ConfigError("split does not match dataset");
  model.config.lambda = cfg.lambda;

  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < ds.subjects.size(); ++s) {
    if (!split.train[s].empty()) order.push_back(s);
  }
  if (order.empty()) throw ConfigError("no training windows");
  Rng rng(cfg.seed ^ 0x5eedULL);
  const auto shuffle = [&] {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  };
  shuffle();

  std::vector<std::vector<int>> train_labels(ds.subjects.size());
  for (std::size_t s : order) train_labels[s] = masked_labels(ds.subjects[s], split.train[s]);
  const bool have_val = split.test_count() > 0;
  const auto& val_windows = have_val ? split.test : split.train;

  TrainResult result{model, {}};
  for (std::size_t s : order) result.report.subject_order.push_back(ds.subjects[s].subject_id);
  double best = std::numeric_limits<double>::infinity();
  std::size_t wait = 0;
  RmsProp opt;
  opt.decay = cfg.rms_decay;
  opt.eps = cfg.rms_eps;
  result.report.stop_reason = "max_epochs";

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle_each_epoch && epoch > 1) shuffle();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = cfg.lr * std::pow(cfg.step_gamma, static_cast<double>((epoch - 1) / cfg.step_epochs));
    for (std::size_t s : order) {
      const auto& subj = ds.subjects[s];
      const ForwardTrace tr = forward(model, subj.features, Mode::Train);
      const LossValue lv = loss(tr, train_labels[s], cfg.lambda);
      Model grads = backward(model, tr, train_labels[s], cfg.lambda);
      check_finite(grads, lv, epoch, subj.subject_id);
      opt.step(model, grads, rec.lr);
      update_running_stats(model, tr);
      rec.train_loss += lv.total;
      rec.train_ce += lv.ce;
      rec.train_reg += lv.reg;
    }
    const double n = static_cast<double>(order.size());
    rec.train_loss /= n;
    rec.train_ce /= n;
    rec.train_reg /= n;
    const PooledEval ev = pooled_eval(model, ds, val_windows);
    if (!std::isfinite(ev.ce)) {
      throw TrainingFault("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    rec.val_loss = ev.ce;
    rec.val_acc = ev.acc;
    result.report.epochs.push_back(rec);

    if (ev.ce < best - cfg.min_delta) {
      best = ev.ce;
      wait = 0;
      result.model = model;
      result.report.best_epoch = epoch;
      result.report.best_val_loss = ev.ce;
    } else if (cfg.early_stopping && ++wait >= cfg.patience) {
      result.report.stop_reason = "early_stopping";
      break;
    }
  }
  if (result.report.best_epoch == 0) {
    // Never improved on +inf only when max_epochs == 0.
    result.model = model;
  }
  result.report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace physio
