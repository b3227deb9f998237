#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "oracles.h"
#include "qrnn/errors.h"
#include "qrnn/losses.h"
#include "qrnn/models.h"

namespace qrnn {
namespace {

using testing::check_gradients;
using testing::random_tensor;

// ---- losses ----

TEST(Bce, HalfProbabilityCostsLogTwo) {
  Graph<double> g;
  Var<double> p = g.constant(Tensor<double>({2}, 0.5));
  Var<double> t = g.constant(Tensor<double>::vector({1, 0}));
  EXPECT_NEAR(bce_loss(p, t).value()[0], std::log(2.0), 1e-15);
}

TEST(Bce, MatchesScalarOracle) {
  Rng rng(5);
  const auto p = random_tensor<double>({4, 3}, rng, 0.01, 0.99);
  const auto t = random_tensor<double>({4, 3}, rng, 0, 1);
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += t[i] * std::log(p[i]) + (1 - t[i]) * std::log(1 - p[i]);
  Graph<double> g;
  EXPECT_NEAR(bce_loss(g.constant(p), g.constant(t)).value()[0], -acc / 12.0, 1e-13);
}

TEST(Bce, StaysFiniteAtSaturatedPredictions) {
  Graph<double> g;
  const Tensor<double> saturated = Tensor<double>::vector({0, 1, 0, 1});
  Var<double> p = g.parameter(saturated, nullptr);
  Var<double> t = g.constant(Tensor<double>::vector({1, 0, 0, 1}));
  const double v = bce_loss(p, t).value()[0];
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, -std::log(1e-7) / 2.0, 1e-6);
}

TEST(Bce, GradientMatchesFiniteDifferences) {
  Rng rng(6);
  const auto r = check_gradients(
      [](Graph<double>&, const std::vector<Var<double>>& in) { return bce_loss(in[0], in[1]); },
      {random_tensor<double>({3, 4}, rng, 0.05, 0.95), random_tensor<double>({3, 4}, rng, 0, 1)});
  EXPECT_LE(r.worst, 1e-6);
}

TEST(Mse, ValueAndGradient) {
  Graph<double> g;
  Var<double> p = g.constant(Tensor<double>::vector({1, 2, 3}));
  Var<double> t = g.constant(Tensor<double>::vector({1, 0, 0}));
  EXPECT_DOUBLE_EQ(mse_loss(p, t).value()[0], 13.0 / 3.0);
  Rng rng(7);
  const auto r = check_gradients(
      [](Graph<double>&, const std::vector<Var<double>>& in) { return mse_loss(in[0], in[1]); },
      {random_tensor<double>({2, 5}, rng), random_tensor<double>({2, 5}, rng)});
  EXPECT_LE(r.worst, 1e-7);
}

TEST(Losses, RejectMismatchedShapes) {
  Graph<double> g;
  Var<double> a = g.constant(Tensor<double>({2}));
  Var<double> b = g.constant(Tensor<double>({3}));
  EXPECT_THROW(bce_loss(a, b), ShapeError);
  EXPECT_THROW(mse_loss(a, b), ShapeError);
}

// ---- Adam ----

Param<double> scalar_param(double w, double grad) {
  Param<double> p;
  p.name = "w";
  p.value = Tensor<double>::vector({w});
  p.grad = Tensor<double>::vector({grad});
  return p;
}

TEST(Adam, FirstStepMovesByLearningRate) {
  for (double g : {3.0, -0.02, 1e-3}) {
    Param<double> p = scalar_param(0.5, g);
    adam_step(p, 1, AdamConfig{});
    EXPECT_NEAR(p.value[0], 0.5 - 1e-3 * (g > 0 ? 1 : -1), 1e-7) << g;
  }
}

TEST(Adam, ZeroGradientLeavesWeight) {
  Param<double> p = scalar_param(0.25, 0.0);
  adam_step(p, 1, AdamConfig{});
  EXPECT_EQ(p.value[0], 0.25);
}

TEST(Adam, TenStepTraceMatchesRecurrence) {
  const AdamConfig cfg{0.01, 0.8, 0.95, 1e-6};
  Param<double> p = scalar_param(1.0, 0.0);
  double w = 1.0, m = 0, v = 0;
  for (std::size_t t = 1; t <= 10; ++t) {
    const double g = 2 * w - 0.3 * double(t);
    p.grad[0] = g;
    adam_step(p, t, cfg);
    m = 0.8 * m + 0.2 * g;
    v = 0.95 * v + 0.05 * g * g;
    const double mh = m / (1 - std::pow(0.8, double(t)));
    const double vh = v / (1 - std::pow(0.95, double(t)));
    w -= 0.01 * mh / (std::sqrt(vh) + 1e-6);
    EXPECT_NEAR(p.value[0], w, 1e-14) << "step " << t;
  }
}

TEST(Adam, RejectsStepZeroAndMissingGradient) {
  Param<double> p = scalar_param(0, 1);
  EXPECT_THROW(adam_step(p, 0, AdamConfig{}), DomainError);
  p.grad = Tensor<double>();
  EXPECT_THROW(adam_step(p, 1, AdamConfig{}), StateError);
}

// ---- trainer on small hand-built models ----

// pred = x w, one weight column, MSE.
class Linear : public Model<double> {
 public:
  explicit Linear(std::vector<double> w, bool quantizable = true) {
    const std::size_t n = w.size();
    Param<double>& p = store_.add("linear.W", "linear", {n, 1}, quantizable);
    p.value = Tensor<double>({n, 1}, std::move(w));
  }
  ParamStore<double>& store() override { return store_; }
  Var<double> forward(ParamBinder<double>& b, const Batch<double>& batch, NormMode) override {
    return matmul(b.graph().constant(batch.inputs), b.bind(store_.at("linear.W")));
  }
  double metric_sum(const Tensor<double>& pred, const Batch<double>& batch) const override {
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - batch.targets[i]) < 0.5;
    return s;
  }
  std::string metric_name() const override { return "close"; }

 private:
  ParamStore<double> store_;
};

Batch<double> linear_batch(const std::vector<double>& x, const std::vector<double>& y,
                           std::size_t width) {
  Batch<double> b;
  b.size = y.size();
  b.inputs = Tensor<double>({b.size, width}, x);
  b.targets = Tensor<double>({b.size, 1}, y);
  return b;
}

class VectorSource : public BatchSource<double> {
 public:
  VectorSource(std::vector<double> x, std::vector<double> y, std::size_t width)
      : x_(std::move(x)), y_(std::move(y)), width_(width) {}
  std::size_t size() const override { return y_.size(); }
  Batch<double> gather(std::span<const std::size_t> idx) const override {
    std::vector<double> x, y;
    for (auto i : idx) {
      for (std::size_t j = 0; j < width_; ++j) x.push_back(x_[i * width_ + j]);
      y.push_back(y_[i]);
    }
    return linear_batch(x, y, width_);
  }

 private:
  std::vector<double> x_, y_;
  std::size_t width_;
};

TrainConfig mse_config(QuantScheme scheme) {
  TrainConfig c;
  c.scheme = scheme;
  c.loss = LossKind::kMeanSquaredError;
  c.batch_size = 4;
  return c;
}

TEST(Trainer, FullPrecisionGradientIsClosedForm) {
  Linear model({0.7});
  Trainer<double> tr(model, mse_config(QuantScheme::full_precision()));
  const std::vector<double> x{1, 2, -1, 0.5}, y{1, 1, 0, 2};
  const double loss = tr.step(linear_batch(x, y, 1));
  double l = 0, g = 0;
  for (int i = 0; i < 4; ++i) {
    const double r = 0.7 * x[i] - y[i];
    l += r * r / 4;
    g += 2 * r * x[i] / 4;
  }
  EXPECT_NEAR(loss, l, 1e-15);
  const Param<double>& p = model.store().at("linear.W");
  EXPECT_NEAR(p.grad[0], g, 1e-15);
  EXPECT_NEAR(p.value[0], 0.7 - 1e-3 * (g > 0 ? 1 : -1), 1e-9);
}

TEST(Trainer, FullPrecisionStepEqualsHandWrittenPath) {
  Rng rng(12);
  const auto w0 = random_tensor<double>({3, 1}, rng);
  const auto x = random_tensor<double>({4, 3}, rng);
  const auto y = random_tensor<double>({4, 1}, rng);
  Linear model({w0.data().begin(), w0.data().end()});
  Trainer<double> tr(model, mse_config(QuantScheme::full_precision()));
  tr.step(linear_batch({x.data().begin(), x.data().end()}, {y.data().begin(), y.data().end()}, 3));

  Param<double> ref;
  ref.value = w0;
  ref.grad = Tensor<double>({3, 1});
  Graph<double> g;
  Var<double> w = g.parameter(ref.value, &ref.grad);
  g.backward(mse_loss(matmul(g.constant(x), w), g.constant(y)));
  adam_step(ref, 1, AdamConfig{});
  const Param<double>& p = model.store().at("linear.W");
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(p.grad[i], ref.grad[i]);
    EXPECT_EQ(p.value[i], ref.value[i]);
  }
}

TEST(Trainer, StraightThroughGradientIsLossSlopeAtQuantizedWeights) {
  // Shadows 0.3 and -2 quantize to +1 and -1 under BC.
  Linear model({0.3, -2.0});
  Trainer<double> tr(model, mse_config(QuantScheme::binary()));
  const std::vector<double> x{1, 2, 0.5, -1, 3, 1, -2, 0.25}, y{0.5, -1, 2, 0};
  tr.step(linear_batch(x, y, 2));
  auto loss_at = [&](double q0, double q1) {
    double l = 0;
    for (int i = 0; i < 4; ++i) {
      const double r = q0 * x[2 * i] + q1 * x[2 * i + 1] - y[i];
      l += r * r / 4;
    }
    return l;
  };
  const double h = 1e-6;
  const Param<double>& p = model.store().at("linear.W");
  EXPECT_NEAR(p.grad[0], (loss_at(1 + h, -1) - loss_at(1 - h, -1)) / (2 * h), 1e-8);
  EXPECT_NEAR(p.grad[1], (loss_at(1, -1 + h) - loss_at(1, -1 - h)) / (2 * h), 1e-8);
  // The shadow, not the image, moved.
  EXPECT_NE(p.value[0], 1.0);
  EXPECT_NEAR(p.value[0], 0.3 - 1e-3 * (p.grad[0] > 0 ? 1 : -1), 1e-9);
}

TEST(Trainer, GradientClipBoundsGlobalNorm) {
  Linear model({5.0, -5.0}, false);
  TrainConfig c = mse_config(QuantScheme::full_precision());
  c.grad_clip = 0.1;
  Trainer<double> tr(model, c);
  tr.step(linear_batch({1, 1, 2, -1}, {0, 0}, 2));
  const Param<double>& p = model.store().at("linear.W");
  EXPECT_NEAR(std::hypot(p.grad[0], p.grad[1]), 0.1, 1e-12);
}

TEST(Trainer, NonFiniteLossRaisesTrainingError) {
  Linear model({std::numeric_limits<double>::infinity()}, false);
  Trainer<double> tr(model, mse_config(QuantScheme::full_precision()));
  try {
    tr.step(linear_batch({1}, {0}, 1));
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_NE(std::string(e.what()).find("linear.W"), std::string::npos);
  }
}

TEST(Trainer, ConfigValidation) {
  Linear model({1});
  TrainConfig c = mse_config(QuantScheme::full_precision());
  c.adam.lr = 0;
  EXPECT_THROW(Trainer<double>(model, c), ConfigError);
  c = mse_config(QuantScheme::full_precision());
  c.batch_size = 0;
  EXPECT_THROW(Trainer<double>(model, c), ConfigError);
  c = mse_config(QuantScheme::full_precision());
  c.grad_clip = -1;
  EXPECT_THROW(Trainer<double>(model, c), ConfigError);
}

TEST(Trainer, EvaluatePerfectAndConstantPredictors) {
  Linear perfect({2.0});
  Trainer<double> tr(perfect, mse_config(QuantScheme::full_precision()));
  VectorSource data({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10}, 1);
  EvalResult r = tr.evaluate(data);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.metric, 1.0);

  // Zero weights predict 0 for every input: loss is the mean squared target.
  Linear zero({0.0});
  Trainer<double> tz(zero, mse_config(QuantScheme::full_precision()));
  r = tz.evaluate(data);
  EXPECT_NEAR(r.loss, (4 + 16 + 36 + 64 + 100) / 5.0, 1e-12);
  EXPECT_EQ(r.metric, 0.0);
  EXPECT_THROW(tz.evaluate(VectorSource({}, {}, 1)), DomainError);
}

TEST(Trainer, EvaluateUsesShadowsWhenAsked) {
  Linear model({2.0});
  TrainConfig c = mse_config(QuantScheme::binary());
  VectorSource data({1, 2}, {2, 4}, 1);
  EXPECT_GT(Trainer<double>(model, c).evaluate(data).loss, 0.0);
  c.quantized_eval = false;
  EXPECT_EQ(Trainer<double>(model, c).evaluate(data).loss, 0.0);
}

// ---- models ----

TEST(ModelSpec, PairingRules) {
  ModelSpec s;
  s.task = Task::kFrames;
  s.cell = CellKind::kLstm;
  EXPECT_THROW(s.validate(), UsageError);
  s.cell = CellKind::kConvLstm;
  EXPECT_NO_THROW(s.validate());
  s.task = Task::kSentiment;
  EXPECT_THROW(s.validate(), UsageError);
  s.cell = CellKind::kGru;
  EXPECT_NO_THROW(s.validate());
  EXPECT_THROW(parse_task("mnist"), UsageError);
  EXPECT_THROW(parse_cell("rnn"), UsageError);
}

TEST(ModelSpec, JsonRoundTrip) {
  ModelSpec s;
  s.task = Task::kSentiment;
  s.cell = CellKind::kGru;
  s.hidden = 7;
  s.maxlen = 33;
  s.quantize_embedding = true;
  const ModelSpec r = ModelSpec::from_json(s.to_json());
  EXPECT_EQ(r.to_json(), s.to_json());
  EXPECT_THROW(ModelSpec::from_json(nlohmann::json::object()), DataError);
}

TEST(Models, SumSourceAndForwardShapes) {
  const auto data = gen_sum_dataset(5, 2, 1);
  SumSource<double> src(data);
  const std::vector<std::size_t> idx{0, 3};
  const Batch<double> b = src.gather(idx);
  EXPECT_EQ(b.inputs.shape(), (Shape{2, 5, 12}));
  EXPECT_EQ(b.targets.shape(), (Shape{2, 3, 12}));
  EXPECT_EQ(decode_sum_predictions(b.targets)[1], data[3].target_ids);

  ModelSpec spec;
  spec.hidden = 6;
  auto model = build_model<double>(spec, 3);
  Graph<double> g;
  ParamBinder<double> binder(g, model->store(), {}, false);
  const Tensor<double> p = model->forward(binder, b, NormMode::kEval).value();
  ASSERT_EQ(p.shape(), b.targets.shape());
  for (std::size_t r = 0; r < 6; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < 12; ++c) s += p[r * 12 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Models, SentimentSourceIsTimeMajor) {
  const std::vector<SentimentSample> data{{{1, 2, 3}, 1}, {{4, 5, 6}, 0}};
  SentimentSource<double> src(data);
  const std::vector<std::size_t> idx{1, 0};
  const Batch<double> b = src.gather(idx);
  EXPECT_EQ(b.ids, (std::vector<std::int32_t>{4, 1, 5, 2, 6, 3}));
  EXPECT_EQ(b.targets[0], 0.0);
  EXPECT_EQ(b.targets[1], 1.0);
  const std::vector<SentimentSample> ragged{{{1, 2}, 1}, {{4}, 0}};
  EXPECT_THROW(SentimentSource<double>{ragged}, DataError);

  ModelSpec spec;
  spec.task = Task::kSentiment;
  spec.hidden = 4;
  spec.embed = 3;
  spec.maxlen = 3;
  spec.max_features = 10;
  auto model = build_model<double>(spec, 2);
  Graph<double> g;
  ParamBinder<double> binder(g, model->store(), {}, false);
  const Tensor<double> p = model->forward(binder, b, NormMode::kEval).value();
  ASSERT_EQ(p.shape(), (Shape{2, 1}));
  for (double v : p.data()) EXPECT_TRUE(v > 0 && v < 1);
}

TEST(Models, FrameSourceTeacherForcesTenFrames) {
  Tensor<float> f({12, 2, 2});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = float(i / 4);
  const std::vector<FrameSequence> seqs{FrameSequence{f}};
  FrameSource<double> src(seqs);
  const std::vector<std::size_t> idx{0};
  const Batch<double> b = src.gather(idx);
  ASSERT_EQ(b.inputs.shape(), (Shape{1, 9, 1, 2, 2}));
  ASSERT_EQ(b.targets.shape(), (Shape{1, 1, 9, 2, 2}));
  EXPECT_EQ(b.inputs[8 * 4], 8.0);
  EXPECT_EQ(b.targets[0], 1.0);
  EXPECT_EQ(b.targets[8 * 4 + 3], 9.0);
  const std::vector<FrameSequence> short_seqs{FrameSequence{Tensor<float>({9, 2, 2})}};
  EXPECT_THROW(FrameSource<double>{short_seqs}, DomainError);
}

ModelSpec tiny_frames() {
  ModelSpec s;
  s.task = Task::kFrames;
  s.cell = CellKind::kConvLstm;
  s.hidden = 2;
  s.height = s.width = 6;
  return s;
}

TEST(Rollout, HorizonZeroIsEmpty) {
  auto model = build_model<double>(tiny_frames(), 1);
  EXPECT_TRUE(rollout_frames<double>(*model, {}, Tensor<double>({7, 6, 6}), 0).empty());
  EXPECT_THROW(rollout_batch<double>(*model, {}, Tensor<double>({1, 7, 6, 6}), 0), DomainError);
}

TEST(Rollout, ZeroWeightsPredictHalfEverywhere) {
  auto model = build_model<double>(tiny_frames(), 1);
  for (auto& p : model->store().params())
    if (p.trainable) p.value.fill(0.0);
  Rng rng(4);
  const auto out = rollout_frames<double>(*model, {}, random_tensor<double>({7, 6, 6}, rng, 0, 1), 3);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& f : out) {
    ASSERT_EQ(f.shape(), (Shape{6, 6}));
    for (double v : f.data()) EXPECT_EQ(v, 0.5);
  }
  const std::vector<FrameSequence> seqs(2, FrameSequence{Tensor<float>({10, 6, 6})});
  for (double m : rollout_mse<double>(*model, {}, seqs, 1)) EXPECT_DOUBLE_EQ(m, 0.25);
}

TEST(Rollout, FirstStepMatchesTeacherForcedPrediction) {
  ModelSpec spec = tiny_frames();
  auto model = build_model<double>(spec, 9);
  MovingFramesConfig fc;
  fc.sequences = 1;
  fc.height = fc.width = 6;
  fc.glyph_size = 3;
  fc.glyphs_per_sequence = 1;
  fc.max_speed = 1;
  const auto seqs = gen_moving_frames(fc);
  const Tensor<double> frames = seqs[0].frames.cast<double>();

  // Teacher-forced pass over frames 1-7: its last output predicts frame 8.
  Batch<double> b;
  b.size = 1;
  b.inputs = Tensor<double>({1, 7, 1, 6, 6});
  std::copy_n(frames.raw(), 7 * 36, b.inputs.raw());
  Graph<double> g;
  ParamBinder<double> binder(g, model->store(), {}, false);
  const Tensor<double> tf = model->forward(binder, b, NormMode::kEval).value();

  Tensor<double> ctx({7, 6, 6});
  std::copy_n(frames.raw(), 7 * 36, ctx.raw());
  const auto roll = rollout_frames<double>(*model, {}, ctx, 1);
  for (std::size_t i = 0; i < 36; ++i) EXPECT_NEAR(roll[0][i], tf[6 * 36 + i], 1e-12);
}

TEST(Rollout, RejectsNonFrameModels) {
  auto model = build_model<double>(ModelSpec{}, 1);
  EXPECT_THROW(rollout_batch<double>(*model, {}, Tensor<double>({1, 7, 6, 6}), 1), ConfigError);
}

// ---- shadow contract and reports ----

TEST(ShadowContract, BinaryTrainingKeepsShadowsAndUsesSigns) {
  ModelSpec spec;
  spec.hidden = 4;
  auto model = build_model<float>(spec, 5);
  const auto data = gen_sum_dataset(64, 2, 5);
  SumSource<float> src(data);
  TrainConfig c;
  c.scheme = QuantScheme::binary();
  c.batch_size = 8;
  c.adam.lr = 0.01;
  Trainer<float> tr(*model, c);
  std::set<std::string> seen;
  bool only_signs = true;
  tr.set_observer([&](const Param<float>& p, const Tensor<float>& q) {
    seen.insert(p.name);
    for (float v : q.data()) only_signs = only_signs && (v == 1.0f || v == -1.0f);
  });
  Rng rng(1);
  while (tr.steps() < 100) tr.run_epoch(src, rng);
  EXPECT_TRUE(only_signs);
  for (const auto& p : model->store().params()) {
    if (!p.quantizable) continue;
    EXPECT_TRUE(seen.count(p.name)) << p.name;
    bool off_lattice = false;
    for (float v : p.value.data()) off_lattice = off_lattice || (v != 1.0f && v != -1.0f);
    EXPECT_TRUE(off_lattice) << p.name;
  }
}

std::string report_of(std::uint64_t seed) {
  ModelSpec spec;
  spec.hidden = 4;
  auto model = build_model<float>(spec, seed);
  const auto train = gen_sum_dataset(40, 2, seed);
  const auto val = gen_sum_dataset(16, 2, seed + 1);
  SumSource<float> a(train), b(val);
  TrainConfig c;
  c.scheme = QuantScheme::ternary(DistShape::kNormalLike);
  c.batch_size = 16;
  c.epochs = 2;
  c.seed = seed;
  Trainer<float> tr(*model, c);
  TrainReport r = fit(tr, a, &b);
  std::ostringstream out;
  write_report_csv(out, r);
  return out.str();
}

TEST(Report, IdenticalRunsProduceIdenticalCsv) {
  const std::string a = report_of(17);
  EXPECT_EQ(a, report_of(17));
  EXPECT_NE(a, report_of(18));
  EXPECT_NE(a.find("# scheme = tc-normal\n"), std::string::npos) << a;
  EXPECT_NE(a.find("epoch,train_loss,train_metric,val_loss,val_metric,seconds\n1,"),
            std::string::npos);
}

TEST(Report, CsvLayout) {
  TrainReport r;
  r.metric_name = "accuracy";
  r.config = {{"scheme", "BC"}};
  EpochRecord e;
  e.epoch = 1;
  e.train_loss = 0.5;
  e.train_metric = 0.25;
  r.epochs.push_back(e);
  r.test_metric = 0.75;
  std::ostringstream out;
  write_report_csv(out, r);
  EXPECT_EQ(out.str(),
            "# scheme = BC\n# metric = accuracy\n"
            "epoch,train_loss,train_metric,val_loss,val_metric,seconds\n"
            "1,0.5,0.25,nan,nan,0\n# test_metric = 0.75\n");
}

TEST(Histograms, CoverQuantizableParametersOnly) {
  ModelSpec spec;
  spec.hidden = 3;
  auto model = build_model<double>(spec, 2);
  const auto h = quantized_histograms(model->store(), QuantScheme::binary(), 8);
  for (const auto& p : model->store().params()) EXPECT_EQ(h.count(p.name) > 0, p.quantizable) << p.name;
  for (const auto& [name, bins] : h) {
    std::size_t populated = 0;
    for (const auto& b : bins) populated += b.count > 0;
    EXPECT_EQ(populated, 2u) << name;
  }
}

TEST(Models, QuantizeBiasesSwitch) {
  ModelSpec spec;
  spec.hidden = 3;
  auto plain = build_model<double>(spec, 1);
  spec.quantize_biases = true;
  auto all = build_model<double>(spec, 1);
  EXPECT_FALSE(plain->store().at("output.b").quantizable);
  EXPECT_TRUE(all->store().at("output.b").quantizable);
}

}  // namespace
}  // namespace qrnn
