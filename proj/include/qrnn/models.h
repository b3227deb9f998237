#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qrnn/frames.h"
#include "qrnn/sentiment.h"
#include "qrnn/summation.h"
#include "qrnn/training.h"

namespace qrnn {

enum class Task { kSum, kSentiment, kFrames };
enum class CellKind { kLstm, kGru, kConvLstm };

Task parse_task(const std::string& s);
CellKind parse_cell(const std::string& s);
std::string task_token(Task t);
std::string cell_token(CellKind c);

// Declarative description of one of the three task networks.
struct ModelSpec {
  Task task = Task::kSum;
  CellKind cell = CellKind::kLstm;
  std::size_t hidden = 128;

  std::size_t max_digits = 2;

  std::size_t max_features = 20000;
  std::size_t maxlen = 80;
  std::size_t embed = 128;

  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t kernel = 3;

  bool quantize_biases = false;
  bool quantize_embedding = false;

  // sum and sentiment pair with lstm or gru; frames with convlstm.
  void validate() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// Networks built per task:
//   sum        recurrent encoder over the one-hot expression; its final hidden
//              state, repeated, drives a recurrent decoder with a softmax over
//              the 12 symbols at each output position.
//   sentiment  embedding, one recurrent layer over maxlen steps, sigmoid unit.
//   frames     ConvLSTM over the input frames, batch norm over its hidden
//              sequence, causal 3-D reconstruction head predicting each next
//              frame.
//
// Builds the network for `spec` with weights drawn from `seed`.
template <Real T>
std::unique_ptr<Model<T>> build_model(const ModelSpec& spec, std::uint64_t seed);

// Batches for each task. Sources keep a reference to their samples.
template <Real T>
class SumSource : public BatchSource<T> {
 public:
  SumSource(const std::vector<SumSample>& samples) : samples_(samples) {}
  std::size_t size() const override { return samples_.size(); }
  // inputs [B, Tin, 12] one-hot, targets [B, Tout, 12] one-hot.
  Batch<T> gather(std::span<const std::size_t> indices) const override;

 private:
  const std::vector<SumSample>& samples_;
};

template <Real T>
class SentimentSource : public BatchSource<T> {
 public:
  // Samples must already be preprocessed to a common length.
  SentimentSource(const std::vector<SentimentSample>& samples);
  std::size_t size() const override { return samples_.size(); }
  // ids time-major (t * B + b), targets [B, 1].
  Batch<T> gather(std::span<const std::size_t> indices) const override;

 private:
  const std::vector<SentimentSample>& samples_;
};

template <Real T>
class FrameSource : public BatchSource<T> {
 public:
  FrameSource(const std::vector<FrameSequence>& sequences);
  std::size_t size() const override { return sequences_.size(); }
  // Teacher forcing over the first ten frames: inputs are frames 1-9 as
  // [B, 9, 1, H, W] and targets frames 2-10 as [B, 1, 9, H, W], so training
  // covers every time step a rollout to frame 10 visits.
  Batch<T> gather(std::span<const std::size_t> indices) const override;

 private:
  const std::vector<FrameSequence>& sequences_;
};

// Decodes [B, Tout, 12] probabilities into symbol ids by argmax.
template <Real T>
std::vector<std::vector<std::int32_t>> decode_sum_predictions(const Tensor<T>& probs);

// Feeds `seed_frames` [T0, H, W] through a frame model, then feeds each
// prediction back for `horizon` steps. Returns one [H, W] frame per step.
template <Real T>
std::vector<Tensor<T>> rollout_frames(Model<T>& model, const QuantPolicy& policy,
                                      const Tensor<T>& seed_frames, std::size_t horizon);

// Batched rollout over context frames [B, T0, H, W]; returns
// [B, horizon, H, W]. horizon must be at least 1.
template <Real T>
Tensor<T> rollout_batch(Model<T>& model, const QuantPolicy& policy,
                        const Tensor<T>& context, std::size_t horizon);

// Mean frame MSE of autoregressive predictions for frames 8-10 over
// `sequences`, one value per predicted frame.
template <Real T>
std::vector<double> rollout_mse(Model<T>& model, const QuantPolicy& policy,
                                const std::vector<FrameSequence>& sequences,
                                std::size_t batch_size);

}  // namespace qrnn
