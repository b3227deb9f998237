#include "qrnn/models.h"

#include <algorithm>
#include <optional>

#include "qrnn/metrics.h"

namespace qrnn {

Task parse_task(const std::string& s) {
  if (s == "sum") return Task::kSum;
  if (s == "sentiment") return Task::kSentiment;
  if (s == "frames") return Task::kFrames;
  throw UsageError("unknown task '" + s + "' (expected sum, sentiment or frames)");
}

CellKind parse_cell(const std::string& s) {
  if (s == "lstm") return CellKind::kLstm;
  if (s == "gru") return CellKind::kGru;
  if (s == "convlstm") return CellKind::kConvLstm;
  throw UsageError("unknown model '" + s + "' (expected lstm, gru or convlstm)");
}

std::string task_token(Task t) {
  switch (t) {
    case Task::kSum: return "sum";
    case Task::kSentiment: return "sentiment";
    case Task::kFrames: return "frames";
  }
  return "?";
}

std::string cell_token(CellKind c) {
  switch (c) {
    case CellKind::kLstm: return "lstm";
    case CellKind::kGru: return "gru";
    case CellKind::kConvLstm: return "convlstm";
  }
  return "?";
}

void ModelSpec::validate() const {
  const bool recurrent = cell == CellKind::kLstm || cell == CellKind::kGru;
  if ((task == Task::kFrames) == recurrent) {
    throw UsageError("task " + task_token(task) + " cannot use model " + cell_token(cell) +
                     " (sum and sentiment take lstm or gru, frames takes convlstm)");
  }
  if (hidden == 0) throw ConfigError("hidden size must be positive");
  if (task == Task::kSum && (max_digits == 0 || max_digits > 9)) {
    throw ConfigError("max_digits must be in [1, 9]");
  }
  if (task == Task::kSentiment && (maxlen == 0 || embed == 0 || max_features <= 3)) {
    throw ConfigError("sentiment model needs maxlen, embed > 0 and max_features > 3");
  }
  if (task == Task::kFrames && (height == 0 || width == 0 || kernel % 2 == 0)) {
    throw ConfigError("frame model needs a positive canvas and an odd kernel");
  }
}

nlohmann::json ModelSpec::to_json() const {
  return {{"task", task_token(task)},
          {"model", cell_token(cell)},
          {"hidden", hidden},
          {"max_digits", max_digits},
          {"max_features", max_features},
          {"maxlen", maxlen},
          {"embed", embed},
          {"height", height},
          {"width", width},
          {"kernel", kernel},
          {"quantize_biases", quantize_biases},
          {"quantize_embedding", quantize_embedding}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
  ModelSpec s;
  try {
    s.task = parse_task(j.at("task").get<std::string>());
    s.cell = parse_cell(j.at("model").get<std::string>());
    s.hidden = j.at("hidden").get<std::size_t>();
    s.max_digits = j.value("max_digits", s.max_digits);
    s.max_features = j.value("max_features", s.max_features);
    s.maxlen = j.value("maxlen", s.maxlen);
    s.embed = j.value("embed", s.embed);
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.kernel = j.value("kernel", s.kernel);
    s.quantize_biases = j.value("quantize_biases", false);
    s.quantize_embedding = j.value("quantize_embedding", false);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model description: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

// LSTM or GRU layer run from a zero state.
template <Real T>
class Recurrent {
 public:
  Recurrent(ParamStore<T>& store, const std::string& name, CellKind kind, std::size_t input,
            std::size_t hidden) {
    if (kind == CellKind::kLstm) {
      lstm_.emplace(store, name, input, hidden);
    } else {
      gru_.emplace(store, name, input, hidden);
    }
  }

  void init(Rng& rng) {
    if (lstm_) lstm_->init(rng);
    if (gru_) gru_->init(rng);
  }

  // Hidden state after each input.
  std::vector<Var<T>> run(ParamBinder<T>& binder, const std::vector<Var<T>>& xs,
                          std::size_t batch) const {
    std::vector<Var<T>> hs;
    hs.reserve(xs.size());
    Graph<T>& g = binder.graph();
    if (lstm_) {
      auto p = lstm_->bind(binder);
      LstmState<T> s = lstm_->zero_state(g, batch);
      for (const auto& x : xs) {
        s = lstm_step<T>(p, x, s);
        hs.push_back(s.h);
      }
    } else {
      auto p = gru_->bind(binder);
      GruState<T> s = gru_->zero_state(g, batch);
      for (const auto& x : xs) {
        s = gru_step<T>(p, x, s);
        hs.push_back(s.h);
      }
    }
    return hs;
  }

 private:
  std::optional<LstmCell<T>> lstm_;
  std::optional<GruCell<T>> gru_;
};

template <Real T>
void mark_biases(ParamStore<T>& store) {
  for (auto& p : store.params()) {
    if (!p.trainable) continue;
    const auto dot = p.name.rfind('.');
    const std::string role = dot == std::string::npos ? p.name : p.name.substr(dot + 1);
    if (role == "b" || role == "bias" || role.rfind("b_", 0) == 0) p.quantizable = true;
  }
}

template <Real T>
class SumNet : public Model<T> {
 public:
  SumNet(const ModelSpec& spec, std::uint64_t seed)
      : in_width_(sum_input_width(spec.max_digits)),
        out_width_(sum_target_width(spec.max_digits)),
        encoder_(store_, "encoder", spec.cell, kSumVocab, spec.hidden),
        decoder_(store_, "decoder", spec.cell, spec.hidden, spec.hidden),
        out_(store_, "output", spec.hidden, kSumVocab) {
    Rng rng(seed);
    encoder_.init(rng);
    decoder_.init(rng);
    out_.init(rng);
    if (spec.quantize_biases) mark_biases(store_);
  }

  ParamStore<T>& store() override { return store_; }

  Var<T> forward(ParamBinder<T>& binder, const Batch<T>& batch, NormMode) override {
    Graph<T>& g = binder.graph();
    const Shape& s = batch.inputs.shape();
    if (s.size() != 3 || s[1] != in_width_ || s[2] != kSumVocab) {
      throw ShapeError("sum model expects inputs [B, " + std::to_string(in_width_) +
                       ", 12], got " + shape_string(s));
    }
    Var<T> x = g.constant(batch.inputs);
    std::vector<Var<T>> xs;
    for (std::size_t t = 0; t < in_width_; ++t) xs.push_back(select(x, 1, t));
    const Var<T> context = encoder_.run(binder, xs, batch.size).back();
    const std::vector<Var<T>> repeated(out_width_, context);
    const auto hs = decoder_.run(binder, repeated, batch.size);
    auto dense_p = out_.bind(binder);
    std::vector<Var<T>> probs;
    for (const auto& h : hs) probs.push_back(softmax_last(dense<T>(dense_p, h)));
    return stack<T>(probs, 1);
  }

  double metric_sum(const Tensor<T>& pred, const Batch<T>& batch) const override {
    const auto p = decode_sum_predictions(pred);
    const auto t = decode_sum_predictions(batch.targets);
    double hits = 0;
    for (std::size_t i = 0; i < p.size(); ++i) hits += p[i] == t[i];
    return hits;
  }

  std::string metric_name() const override { return "sequence_accuracy"; }

 private:
  ParamStore<T> store_;
  std::size_t in_width_, out_width_;
  Recurrent<T> encoder_, decoder_;
  Dense<T> out_;
};

template <Real T>
class SentimentNet : public Model<T> {
 public:
  SentimentNet(const ModelSpec& spec, std::uint64_t seed)
      : maxlen_(spec.maxlen),
        embedding_(store_, "embedding", spec.max_features, spec.embed, spec.quantize_embedding),
        rnn_(store_, "rnn", spec.cell, spec.embed, spec.hidden),
        out_(store_, "output", spec.hidden, 1) {
    Rng rng(seed);
    embedding_.init(rng);
    rnn_.init(rng);
    out_.init(rng);
    if (spec.quantize_biases) mark_biases(store_);
  }

  ParamStore<T>& store() override { return store_; }

  Var<T> forward(ParamBinder<T>& binder, const Batch<T>& batch, NormMode) override {
    const std::size_t B = batch.size;
    if (batch.ids.size() != B * maxlen_) {
      throw ShapeError("sentiment model expects " + std::to_string(B) + " x " +
                       std::to_string(maxlen_) + " token ids, got " +
                       std::to_string(batch.ids.size()));
    }
    Var<T> rows = embedding_lookup<T>(embedding_.bind(binder), batch.ids);
    std::vector<Var<T>> xs;
    for (std::size_t t = 0; t < maxlen_; ++t) xs.push_back(slice(rows, 0, t * B, B));
    const Var<T> h = rnn_.run(binder, xs, B).back();
    return sigmoid(dense<T>(out_.bind(binder), h));
  }

  double metric_sum(const Tensor<T>& pred, const Batch<T>& batch) const override {
    double hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      hits += (pred[i] >= T(0.5)) == (batch.targets[i] >= T(0.5));
    }
    return hits;
  }

  std::string metric_name() const override { return "accuracy"; }

 private:
  ParamStore<T> store_;
  std::size_t maxlen_;
  Embedding<T> embedding_;
  Recurrent<T> rnn_;
  Dense<T> out_;
};

}  // namespace

template <Real T>
class FrameModel : public Model<T> {
 public:
  FrameModel(const ModelSpec& spec, std::uint64_t seed)
      : height_(spec.height),
        width_(spec.width),
        kernel_(spec.kernel),
        cell_(store_, "convlstm", 1, spec.hidden, spec.height, spec.width, spec.kernel),
        norm_(store_, "batchnorm", spec.hidden, 0.9),
        head_(store_, "reconstruct", spec.hidden, spec.kernel) {
    Rng rng(seed);
    cell_.init(rng);
    head_.init(rng);
    if (spec.quantize_biases) mark_biases(store_);
  }

  ParamStore<T>& store() override { return store_; }

  Var<T> forward(ParamBinder<T>& binder, const Batch<T>& batch, NormMode mode) override {
    Graph<T>& g = binder.graph();
    const Shape& s = batch.inputs.shape();
    if (s.size() != 5 || s[2] != 1 || s[3] != height_ || s[4] != width_) {
      throw ShapeError("frame model expects inputs [B, T, 1, " + std::to_string(height_) +
                       ", " + std::to_string(width_) + "], got " + shape_string(s));
    }
    Var<T> x = g.constant(batch.inputs);
    auto p = cell_.bind(binder);
    ConvLstmState<T> st = cell_.zero_state(g, batch.size);
    std::vector<Var<T>> hs;
    for (std::size_t t = 0; t < s[1]; ++t) {
      st = convlstm_step<T>(p, select(x, 1, t), st);
      hs.push_back(st.h);
    }
    return decode(binder, hs, mode);
  }

  // [B, C, T, H, W] hidden sequence -> [B, 1, T, H, W] next-frame intensities.
  Var<T> decode(ParamBinder<T>& binder, const std::vector<Var<T>>& hs, NormMode mode) const {
    Var<T> seq = stack<T>(hs, 2);
    Var<T> normed = norm_.forward(norm_.bind(binder), seq, mode);
    return reconstruct3d<T>(head_.bind(binder), normed, TemporalPadding::kCausal);
  }

  double metric_sum(const Tensor<T>& pred, const Batch<T>& batch) const override {
    const std::size_t per = pred.size() / batch.size;
    double total = 0;
    for (std::size_t n = 0; n < batch.size; ++n) {
      double acc = 0;
      for (std::size_t i = 0; i < per; ++i) {
        const double d = double(pred[n * per + i]) - double(batch.targets[n * per + i]);
        acc += d * d;
      }
      total += acc / double(per);
    }
    return total;
  }

  std::string metric_name() const override { return "frame_mse"; }

  const ConvLstmCell<T>& cell() const { return cell_; }
  std::size_t kernel() const { return kernel_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

 private:
  ParamStore<T> store_;
  std::size_t height_, width_, kernel_;
  ConvLstmCell<T> cell_;
  BatchNorm<T> norm_;
  Reconstruct3d<T> head_;
};

template <Real T>
std::unique_ptr<Model<T>> build_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  switch (spec.task) {
    case Task::kSum: return std::make_unique<SumNet<T>>(spec, seed);
    case Task::kSentiment: return std::make_unique<SentimentNet<T>>(spec, seed);
    case Task::kFrames: return std::make_unique<FrameModel<T>>(spec, seed);
  }
  throw UsageError("unknown task");
}

template <Real T>
Batch<T> SumSource<T>::gather(std::span<const std::size_t> indices) const {
  const std::size_t B = indices.size();
  const std::size_t tin = samples_.at(indices[0]).input_ids.size();
  const std::size_t tout = samples_.at(indices[0]).target_ids.size();
  Batch<T> b;
  b.size = B;
  b.inputs = Tensor<T>({B, tin, kSumVocab});
  b.targets = Tensor<T>({B, tout, kSumVocab});
  for (std::size_t n = 0; n < B; ++n) {
    const SumSample& s = samples_.at(indices[n]);
    if (s.input_ids.size() != tin || s.target_ids.size() != tout) {
      throw DataError("summation samples have mixed widths");
    }
    const Tensor<T> x = one_hot<T>(s.input_ids, kSumVocab);
    const Tensor<T> y = one_hot<T>(s.target_ids, kSumVocab);
    std::copy_n(x.raw(), x.size(), b.inputs.raw() + n * x.size());
    std::copy_n(y.raw(), y.size(), b.targets.raw() + n * y.size());
  }
  return b;
}

template <Real T>
SentimentSource<T>::SentimentSource(const std::vector<SentimentSample>& samples)
    : samples_(samples) {
  for (const auto& s : samples_) {
    if (s.tokens.size() != samples_.front().tokens.size() || s.tokens.empty()) {
      throw DataError("sentiment samples must be preprocessed to one non-zero length");
    }
  }
}

template <Real T>
Batch<T> SentimentSource<T>::gather(std::span<const std::size_t> indices) const {
  const std::size_t B = indices.size();
  const std::size_t L = samples_.at(indices[0]).tokens.size();
  Batch<T> b;
  b.size = B;
  b.ids.resize(B * L);
  b.targets = Tensor<T>({B, 1});
  for (std::size_t n = 0; n < B; ++n) {
    const SentimentSample& s = samples_.at(indices[n]);
    for (std::size_t t = 0; t < L; ++t) b.ids[t * B + n] = s.tokens[t];
    b.targets[n] = T(s.label);
  }
  return b;
}

template <Real T>
FrameSource<T>::FrameSource(const std::vector<FrameSequence>& sequences) : sequences_(sequences) {
  for (const auto& s : sequences_) {
    if (s.frames.rank() != 3 || s.length() < kContextFrames + kTargetFrames) {
      throw DomainError("frame sequences need at least " +
                        std::to_string(kContextFrames + kTargetFrames) + " frames of rank [T, H, W]");
    }
  }
}

template <Real T>
Batch<T> FrameSource<T>::gather(std::span<const std::size_t> indices) const {
  const std::size_t B = indices.size();
  const Tensor<float>& first = sequences_.at(indices[0]).frames;
  const std::size_t H = first.dim(1), W = first.dim(2), area = H * W;
  const std::size_t Tn = kContextFrames + kTargetFrames - 1;
  Batch<T> b;
  b.size = B;
  b.inputs = Tensor<T>({B, Tn, 1, H, W});
  b.targets = Tensor<T>({B, 1, Tn, H, W});
  for (std::size_t n = 0; n < B; ++n) {
    const Tensor<float>& f = sequences_.at(indices[n]).frames;
    if (f.dim(1) != H || f.dim(2) != W) throw DataError("frame sequences have mixed sizes");
    std::transform(f.raw(), f.raw() + Tn * area, b.inputs.raw() + n * Tn * area,
                   [](float v) { return T(v); });
    std::transform(f.raw() + area, f.raw() + (Tn + 1) * area, b.targets.raw() + n * Tn * area,
                   [](float v) { return T(v); });
  }
  return b;
}

template <Real T>
std::vector<std::vector<std::int32_t>> decode_sum_predictions(const Tensor<T>& probs) {
  if (probs.rank() != 3) throw ShapeError("expected [B, T, classes] probabilities");
  const std::size_t B = probs.dim(0), L = probs.dim(1), C = probs.dim(2);
  std::vector<std::vector<std::int32_t>> out(B, std::vector<std::int32_t>(L));
  for (std::size_t n = 0; n < B; ++n)
    for (std::size_t t = 0; t < L; ++t) {
      const T* row = probs.raw() + (n * L + t) * C;
      out[n][t] = std::int32_t(std::max_element(row, row + C) - row);
    }
  return out;
}

template <Real T>
Tensor<T> rollout_batch(Model<T>& model, const QuantPolicy& policy, const Tensor<T>& context,
                        std::size_t horizon) {
  auto* fm = dynamic_cast<FrameModel<T>*>(&model);
  if (!fm) throw ConfigError("rollout needs a frame model");
  if (horizon == 0) throw DomainError("rollout_batch horizon must be at least 1");
  if (context.rank() != 4 || context.dim(2) != fm->height() || context.dim(3) != fm->width()) {
    throw ShapeError("rollout context must be [B, T0, " + std::to_string(fm->height()) + ", " +
                     std::to_string(fm->width()) + "], got " + shape_string(context.shape()));
  }
  const std::size_t B = context.dim(0), T0 = context.dim(1);
  const std::size_t H = context.dim(2), W = context.dim(3), area = H * W;
  // The causal head at step t reads hidden states t - k/2 .. t.
  const std::size_t window = fm->kernel() / 2 + 1;

  Graph<T> g;
  ParamBinder<T> binder(g, model.store(), policy, false);
  auto p = fm->cell().bind(binder);
  ConvLstmState<T> st = fm->cell().zero_state(g, B);
  std::vector<Var<T>> hs;
  Var<T> ctx = g.constant(context.reshaped({B, T0, 1, H, W}));
  Var<T> next;
  Tensor<T> out({B, horizon, H, W});
  for (std::size_t t = 0; t < T0 + horizon - 1; ++t) {
    Var<T> x = t < T0 ? select(ctx, 1, t) : next;
    st = convlstm_step<T>(p, x, st);
    hs.push_back(st.h);
    if (t + 1 < T0) continue;
    const std::size_t w = std::min(window, hs.size());
    std::vector<Var<T>> recent(hs.end() - long(w), hs.end());
    Var<T> frames = fm->decode(binder, recent, NormMode::kEval);
    next = select(frames, 2, w - 1);  // [B, 1, H, W]
    const std::size_t k = t + 1 - T0;
    const Tensor<T>& v = next.value();
    for (std::size_t n = 0; n < B; ++n)
      std::copy_n(v.raw() + n * area, area, out.raw() + (n * horizon + k) * area);
  }
  return out;
}

template <Real T>
std::vector<Tensor<T>> rollout_frames(Model<T>& model, const QuantPolicy& policy,
                                      const Tensor<T>& seed_frames, std::size_t horizon) {
  if (seed_frames.rank() != 3) {
    throw ShapeError("seed frames must be [T0, H, W], got " + shape_string(seed_frames.shape()));
  }
  std::vector<Tensor<T>> frames;
  if (horizon == 0) return frames;
  const std::size_t H = seed_frames.dim(1), W = seed_frames.dim(2);
  const Tensor<T> all = rollout_batch(
      model, policy, seed_frames.reshaped({1, seed_frames.dim(0), H, W}), horizon);
  for (std::size_t k = 0; k < horizon; ++k) {
    Tensor<T> f({H, W});
    std::copy_n(all.raw() + k * H * W, H * W, f.raw());
    frames.push_back(std::move(f));
  }
  return frames;
}

template <Real T>
std::vector<double> rollout_mse(Model<T>& model, const QuantPolicy& policy,
                                const std::vector<FrameSequence>& sequences,
                                std::size_t batch_size) {
  if (sequences.empty()) throw DomainError("rollout_mse of an empty set");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::vector<double> sums(kTargetFrames, 0.0);
  for (std::size_t start = 0; start < sequences.size(); start += batch_size) {
    const std::size_t B = std::min(batch_size, sequences.size() - start);
    const Tensor<float>& f0 = sequences[start].frames;
    const std::size_t H = f0.dim(1), W = f0.dim(2), area = H * W;
    Tensor<T> ctx({B, kContextFrames, H, W});
    std::vector<Tensor<T>> truth;
    for (std::size_t n = 0; n < B; ++n) {
      const FrameSplit s = split_train_predict(sequences[start + n]);
      std::transform(s.context.raw(), s.context.raw() + s.context.size(),
                     ctx.raw() + n * kContextFrames * area, [](float v) { return T(v); });
      truth.push_back(s.targets.template cast<T>());
    }
    const Tensor<T> pred = rollout_batch(model, policy, ctx, kTargetFrames);
    std::vector<Tensor<T>> preds;
    for (std::size_t n = 0; n < B; ++n) {
      Tensor<T> p({kTargetFrames, H, W});
      std::copy_n(pred.raw() + n * kTargetFrames * area, kTargetFrames * area, p.raw());
      preds.push_back(std::move(p));
    }
    const std::vector<double> m = per_frame_mse(preds, truth);
    for (std::size_t k = 0; k < kTargetFrames; ++k) sums[k] += m[k] * double(B);
  }
  for (auto& v : sums) v /= double(sequences.size());
  return sums;
}

#define QRNN_INSTANTIATE_MODELS(T)                                                       \
  template class FrameModel<T>;                                                          \
  template std::unique_ptr<Model<T>> build_model(const ModelSpec&, std::uint64_t);       \
  template class SumSource<T>;                                                           \
  template class SentimentSource<T>;                                                     \
  template class FrameSource<T>;                                                         \
  template std::vector<std::vector<std::int32_t>> decode_sum_predictions(const Tensor<T>&); \
  template Tensor<T> rollout_batch(Model<T>&, const QuantPolicy&, const Tensor<T>&,       \
                                   std::size_t);                                         \
  template std::vector<Tensor<T>> rollout_frames(Model<T>&, const QuantPolicy&,           \
                                                 const Tensor<T>&, std::size_t);         \
  template std::vector<double> rollout_mse(Model<T>&, const QuantPolicy&,                \
                                           const std::vector<FrameSequence>&, std::size_t);

QRNN_INSTANTIATE_MODELS(float)
QRNN_INSTANTIATE_MODELS(double)

#undef QRNN_INSTANTIATE_MODELS

}  // namespace qrnn
