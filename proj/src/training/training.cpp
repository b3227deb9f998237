#include "qrnn/training.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "qrnn/losses.h"

namespace qrnn {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(adam.lr > 0)) throw ConfigError("learning rate must be positive, got " + fmt(adam.lr));
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(adam.eps >= 0)) throw ConfigError("Adam epsilon must be non-negative");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (grad_clip && !(*grad_clip > 0)) throw ConfigError("gradient clip must be positive");
}

std::string loss_token(LossKind loss) {
  return loss == LossKind::kBinaryCrossEntropy ? "bce" : "mse";
}

template <Real T>
void adam_step(Param<T>& p, std::size_t t, const AdamConfig& cfg) {
  if (t == 0) throw DomainError("Adam step count starts at 1");
  if (p.grad.shape() != p.value.shape()) {
    throw StateError("parameter " + p.name + " has no gradient of matching shape");
  }
  if (p.m.empty()) p.m = Tensor<T>::zeros(p.value.shape());
  if (p.v.empty()) p.v = Tensor<T>::zeros(p.value.shape());
  const double c1 = 1.0 - std::pow(cfg.beta1, double(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, double(t));
  T* w = p.value.raw();
  T* m = p.m.raw();
  T* v = p.v.raw();
  const T* g = p.grad.raw();
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double gi = double(g[i]);
    const double mi = cfg.beta1 * double(m[i]) + (1.0 - cfg.beta1) * gi;
    const double vi = cfg.beta2 * double(v[i]) + (1.0 - cfg.beta2) * gi * gi;
    m[i] = T(mi);
    v[i] = T(vi);
    w[i] = T(double(w[i]) - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
  }
}

template <Real T>
Trainer<T>::Trainer(Model<T>& model, TrainConfig cfg) : model_(model), cfg_(std::move(cfg)) {
  cfg_.validate();
}

template <Real T>
Var<T> Trainer<T>::loss_of(Var<T> pred, Var<T> target) const {
  return cfg_.loss == LossKind::kBinaryCrossEntropy ? bce_loss(pred, target)
                                                    : mse_loss(pred, target);
}

template <Real T>
double Trainer<T>::step(const Batch<T>& batch) {
  ParamStore<T>& store = model_.store();
  store.zero_grads();
  Graph<T> g;
  ParamBinder<T> binder(g, store, {cfg_.scheme, cfg_.granularity}, true);
  if (observer_) binder.set_observer(observer_);
  Var<T> pred = model_.forward(binder, batch, NormMode::kTrain);
  Var<T> loss = loss_of(pred, g.constant(batch.targets));
  const double value = double(loss.value()[0]);
  if (!std::isfinite(value)) {
    double largest = 0.0;
    std::string where;
    for (const auto& p : store.params()) {
      for (T w : p.value.data()) {
        if (!(std::abs(double(w)) <= largest)) {
          largest = std::abs(double(w));
          where = p.name;
        }
      }
    }
    throw TrainingError("loss became " + fmt(value) + " at step " + std::to_string(steps_ + 1) +
                        " under scheme " + cfg_.scheme.name() + "; largest shadow |w| = " +
                        fmt(largest) + " in " + where);
  }
  g.backward(loss);
  last_pred_ = pred.value();

  if (cfg_.grad_clip) {
    double sq = 0.0;
    for (const auto& p : store.params())
      if (p.trainable)
        for (T d : p.grad.data()) sq += double(d) * double(d);
    const double norm = std::sqrt(sq);
    if (norm > *cfg_.grad_clip) {
      const T scale = T(*cfg_.grad_clip / norm);
      for (auto& p : store.params())
        if (p.trainable)
          for (auto& d : p.grad.data()) d *= scale;
    }
  }

  ++steps_;
  for (auto& p : store.params())
    if (p.trainable) adam_step(p, steps_, cfg_.adam);
  return value;
}

template <Real T>
EvalResult Trainer<T>::evaluate(const BatchSource<T>& data) const {
  const std::size_t n = data.size();
  if (n == 0) throw DomainError("cannot evaluate on an empty dataset");
  QuantPolicy policy{cfg_.scheme, cfg_.granularity};
  if (!cfg_.quantized_eval) policy.scheme = QuantScheme::full_precision();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  double loss = 0.0, metric = 0.0;
  for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
    const std::size_t len = std::min(cfg_.batch_size, n - start);
    const Batch<T> batch = data.gather(std::span<const std::size_t>(idx).subspan(start, len));
    Graph<T> g;
    ParamBinder<T> binder(g, model_.store(), policy, false);
    Var<T> pred = model_.forward(binder, batch, NormMode::kEval);
    loss += double(loss_of(pred, g.constant(batch.targets)).value()[0]) * double(batch.size);
    metric += model_.metric_sum(pred.value(), batch);
  }
  return {loss / double(n), metric / double(n)};
}

template <Real T>
EpochRecord Trainer<T>::run_epoch(const BatchSource<T>& data, Rng& rng) {
  const std::size_t n = data.size();
  if (n == 0) throw DomainError("cannot train on an empty dataset");
  const auto start_time = std::chrono::steady_clock::now();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  rng.shuffle(idx.begin(), idx.end());
  double loss = 0.0, metric = 0.0;
  for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
    const std::size_t len = std::min(cfg_.batch_size, n - start);
    const Batch<T> batch = data.gather(std::span<const std::size_t>(idx).subspan(start, len));
    loss += step(batch) * double(batch.size);
    metric += model_.metric_sum(last_pred_, batch);
  }
  EpochRecord r;
  r.train_loss = loss / double(n);
  r.train_metric = metric / double(n);
  if (cfg_.record_wall_time) {
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  }
  return r;
}

template <Real T>
std::map<std::string, std::vector<HistogramBin>> quantized_histograms(
    const ParamStore<T>& store, const QuantScheme& scheme, std::size_t bins) {
  std::map<std::string, std::vector<HistogramBin>> out;
  for (const auto& p : store.params()) {
    if (!p.quantizable || !p.trainable) continue;
    out[p.name] = weight_histogram(quantize(p.value, scheme), bins);
  }
  return out;
}

template <Real T>
TrainReport fit(Trainer<T>& trainer, const BatchSource<T>& train, const BatchSource<T>* val) {
  const TrainConfig& cfg = trainer.config();
  TrainReport report;
  report.metric_name = trainer.model().metric_name();
  report.config = {
      {"scheme", cfg.scheme.name()},
      {"stats", cfg.granularity == StatsGranularity::kPerCell ? "per-cell" : "per-tensor"},
      {"loss", loss_token(cfg.loss)},
      {"lr", fmt(cfg.adam.lr)},
      {"beta1", fmt(cfg.adam.beta1)},
      {"beta2", fmt(cfg.adam.beta2)},
      {"adam_eps", fmt(cfg.adam.eps)},
      {"batch", std::to_string(cfg.batch_size)},
      {"epochs", std::to_string(cfg.epochs)},
      {"seed", std::to_string(cfg.seed)},
      {"grad_clip", cfg.grad_clip ? fmt(*cfg.grad_clip) : "off"},
      {"quantized_eval", cfg.quantized_eval ? "true" : "false"},
  };
  // Shuffling stream separate from initialization, which also uses the seed.
  Rng rng(cfg.seed ^ 0x5deece66dULL);
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    EpochRecord r = trainer.run_epoch(train, rng);
    r.epoch = e;
    if (val) {
      const EvalResult v = trainer.evaluate(*val);
      r.val_loss = v.loss;
      r.val_metric = v.metric;
    }
    report.epochs.push_back(r);
  }
  report.histograms = quantized_histograms(trainer.model().store(), cfg.scheme, 64);
  return report;
}

void write_report_csv(std::ostream& out, const TrainReport& report) {
  for (const auto& [k, v] : report.config) out << "# " << k << " = " << v << '\n';
  out << "# metric = " << report.metric_name << '\n';
  out << "epoch,train_loss,train_metric,val_loss,val_metric,seconds\n";
  for (const auto& r : report.epochs) {
    out << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.train_metric) << ','
        << fmt(r.val_loss) << ',' << fmt(r.val_metric) << ',' << fmt(r.seconds) << '\n';
  }
  if (report.test_metric) out << "# test_metric = " << fmt(*report.test_metric) << '\n';
}

#define QRNN_INSTANTIATE_TRAINING(T)                                                 \
  template void adam_step(Param<T>&, std::size_t, const AdamConfig&);               \
  template class Trainer<T>;                                                         \
  template TrainReport fit(Trainer<T>&, const BatchSource<T>&, const BatchSource<T>*); \
  template std::map<std::string, std::vector<HistogramBin>> quantized_histograms(    \
      const ParamStore<T>&, const QuantScheme&, std::size_t);

QRNN_INSTANTIATE_TRAINING(float)
QRNN_INSTANTIATE_TRAINING(double)

#undef QRNN_INSTANTIATE_TRAINING

}  // namespace qrnn
