#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qrnn/cells.h"
#include "qrnn/quantize.h"

namespace qrnn {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam on the full-precision value; t counts from 1.
template <Real T>
void adam_step(Param<T>& p, std::size_t t, const AdamConfig& cfg);

enum class LossKind { kBinaryCrossEntropy, kMeanSquaredError };

struct TrainConfig {
  QuantScheme scheme;
  StatsGranularity granularity = StatsGranularity::kPerTensor;
  AdamConfig adam;
  LossKind loss = LossKind::kBinaryCrossEntropy;
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  // Global-norm clip; off when unset.
  std::optional<double> grad_clip;
  // Evaluate with the training scheme's quantized weights (false: shadows).
  bool quantized_eval = true;
  // Wall time is left at 0 in reports unless asked for, so reports of
  // identical runs compare equal byte for byte.
  bool record_wall_time = false;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// One mini-batch. Which fields are used depends on the model.
template <Real T>
struct Batch {
  Tensor<T> inputs;
  std::vector<std::int32_t> ids;
  Tensor<T> targets;
  std::size_t size = 0;
};

template <Real T>
class Model {
 public:
  virtual ~Model() = default;

  virtual ParamStore<T>& store() = 0;
  // Predictions for the batch, shaped like batch.targets.
  virtual Var<T> forward(ParamBinder<T>& binder, const Batch<T>& batch, NormMode mode) = 0;
  // Summed over the batch: correct samples for classifiers, per-sample
  // frame MSE for frame models.
  virtual double metric_sum(const Tensor<T>& pred, const Batch<T>& batch) const = 0;
  virtual std::string metric_name() const = 0;
};

template <Real T>
class BatchSource {
 public:
  virtual ~BatchSource() = default;
  virtual std::size_t size() const = 0;
  virtual Batch<T> gather(std::span<const std::size_t> indices) const = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_metric = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_metric = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;
};

struct TrainReport {
  std::string metric_name;
  // Resolved configuration, embedded as comment lines in the CSV.
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<EpochRecord> epochs;
  std::optional<double> test_metric;
  // Quantized images of the final weights, per parameter.
  std::map<std::string, std::vector<HistogramBin>> histograms;
};

// "# key = value" lines, then epoch,train_loss,train_metric,val_loss,
// val_metric,seconds rows, then the test metric as a trailing comment.
void write_report_csv(std::ostream& out, const TrainReport& report);

template <Real T>
class Trainer {
 public:
  Trainer(Model<T>& model, TrainConfig cfg);

  // Quantize shadows from fresh statistics, forward, loss, backward with
  // the identity straight-through estimator, optional clip, then Adam on
  // the shadows. Returns the batch loss.
  double step(const Batch<T>& batch);

  // Train-mode forward pass of the last step() (for metrics).
  const Tensor<T>& last_prediction() const { return last_pred_; }

  EvalResult evaluate(const BatchSource<T>& data) const;
  EpochRecord run_epoch(const BatchSource<T>& data, Rng& rng);

  // Called with every quantized image used by a training forward pass.
  void set_observer(QuantObserver<T> observer) { observer_ = std::move(observer); }

  std::size_t steps() const { return steps_; }
  const TrainConfig& config() const { return cfg_; }
  Model<T>& model() { return model_; }

 private:
  Var<T> loss_of(Var<T> pred, Var<T> target) const;

  Model<T>& model_;
  TrainConfig cfg_;
  std::size_t steps_ = 0;
  QuantObserver<T> observer_;
  Tensor<T> last_pred_;
};

// Runs cfg.epochs epochs, evaluating on `val` after each when given.
template <Real T>
TrainReport fit(Trainer<T>& trainer, const BatchSource<T>& train, const BatchSource<T>* val);

// Histograms of each quantizable parameter's image under `scheme`, with
// statistics taken per tensor.
template <Real T>
std::map<std::string, std::vector<HistogramBin>> quantized_histograms(
    const ParamStore<T>& store, const QuantScheme& scheme, std::size_t bins);

std::string loss_token(LossKind loss);

}  // namespace qrnn
