#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "qrnn/ops.h"
#include "qrnn/param.h"

namespace qrnn {

// Batched throughout: vectors are rows of [B, n] matrices and the weight
// matrices are stored input-major ([in, out]), so a gate pre-activation is
// x * W + h * U + b.

template <Real T>
struct LstmState {
  Var<T> h;
  Var<T> c;
};

template <Real T>
struct GruState {
  Var<T> h;
};

template <Real T>
struct ConvLstmState {
  Var<T> h;
  Var<T> c;
};

// Elman network: h = tanh(x W_h + h_prev U_h + b_h), y = h W_y + b_y.
template <Real T>
class RnnCell {
 public:
  struct Bound {
    Var<T> w_h, u_h, b_h, w_y, b_y;
  };

  RnnCell(ParamStore<T>& store, const std::string& name, std::size_t input,
          std::size_t hidden, std::size_t output);

  void init(Rng& rng);
  Bound bind(ParamBinder<T>& binder) const;
  const CellParams<T>& params() const { return params_; }

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }

 private:
  CellParams<T> params_;
  std::size_t input_, hidden_, output_;
};

template <Real T>
struct RnnOutput {
  Var<T> h;
  Var<T> y;
};

template <Real T>
RnnOutput<T> rnn_step(const typename RnnCell<T>::Bound& p, Var<T> x, Var<T> h_prev);

// Gate order f, i, c, o. Forget bias starts at 1.
template <Real T>
class LstmCell {
 public:
  // Per-gate parameters fused column-wise: w [in, 4H], u [H, 4H], b [4H].
  struct Bound {
    Var<T> w, u, b;
    std::size_t hidden = 0;
  };

  LstmCell(ParamStore<T>& store, const std::string& name, std::size_t input,
           std::size_t hidden);

  void init(Rng& rng);
  Bound bind(ParamBinder<T>& binder) const;
  LstmState<T> zero_state(Graph<T>& g, std::size_t batch) const;
  const CellParams<T>& params() const { return params_; }

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }

 private:
  CellParams<T> params_;
  std::size_t input_, hidden_;
};

template <Real T>
LstmState<T> lstm_step(const typename LstmCell<T>::Bound& p, Var<T> x,
                       const LstmState<T>& s);

// Gate order z, r, candidate.
template <Real T>
class GruCell {
 public:
  // w [in, 3H] and b [3H] cover z, r, candidate; u_zr [H, 2H]; u_h [H, H].
  struct Bound {
    Var<T> w, u_zr, u_h, b;
    std::size_t hidden = 0;
  };

  GruCell(ParamStore<T>& store, const std::string& name, std::size_t input,
          std::size_t hidden);

  void init(Rng& rng);
  Bound bind(ParamBinder<T>& binder) const;
  GruState<T> zero_state(Graph<T>& g, std::size_t batch) const;
  const CellParams<T>& params() const { return params_; }

  std::size_t input_size() const { return input_; }
  std::size_t hidden_size() const { return hidden_; }

 private:
  CellParams<T> params_;
  std::size_t input_, hidden_;
};

template <Real T>
GruState<T> gru_step(const typename GruCell<T>::Bound& p, Var<T> x,
                     const GruState<T>& s);

// Convolutional LSTM with elementwise peephole weights Wc_i, Wc_f, Wc_o of
// shape [C_h, H, W]. Gate order i, f, c, o.
template <Real T>
class ConvLstmCell {
 public:
  // wx [4C_h, C_in, k, k], wh [4C_h, C_h, k, k], b [4C_h].
  struct Bound {
    Var<T> wx, wh, b, peep_i, peep_f, peep_o;
    std::size_t channels = 0;
  };

  ConvLstmCell(ParamStore<T>& store, const std::string& name,
               std::size_t in_channels, std::size_t hidden_channels,
               std::size_t height, std::size_t width, std::size_t kernel = 3);

  void init(Rng& rng);
  Bound bind(ParamBinder<T>& binder) const;
  ConvLstmState<T> zero_state(Graph<T>& g, std::size_t batch) const;
  const CellParams<T>& params() const { return params_; }

  std::size_t hidden_channels() const { return hidden_; }

 private:
  CellParams<T> params_;
  std::size_t in_, hidden_, height_, width_, kernel_;
};

template <Real T>
ConvLstmState<T> convlstm_step(const typename ConvLstmCell<T>::Bound& p,
                               Var<T> x, const ConvLstmState<T>& s);

// ---------------------------------------------------------------------------
// Feed-forward pieces.

template <Real T>
class Dense {
 public:
  struct Bound {
    Var<T> w, b;
  };

  Dense(ParamStore<T>& store, const std::string& name, std::size_t input,
        std::size_t output);

  void init(Rng& rng);
  Bound bind(ParamBinder<T>& binder) const;
  Param<T>& weight() const { return *w_; }
  Param<T>& bias() const { return *b_; }

 private:
  Param<T>* w_;
  Param<T>* b_;
  std::size_t input_, output_;
};

template <Real T>
Var<T> dense(const typename Dense<T>::Bound& p, Var<T> x);

template <Real T>
class Embedding {
 public:
  Embedding(ParamStore<T>& store, const std::string& name, std::size_t vocab,
            std::size_t width, bool quantizable = false);

  void init(Rng& rng);
  Var<T> bind(ParamBinder<T>& binder) const { return binder.bind(*table_); }
  Param<T>& table() const { return *table_; }

 private:
  Param<T>* table_;
};

enum class NormMode { kTrain, kEval };

// Per-channel (axis 1) batch normalization. Training mode normalizes with
// batch statistics and folds them into the running estimates.
template <Real T>
class BatchNorm {
 public:
  struct Bound {
    Var<T> gamma, beta;
  };

  BatchNorm(ParamStore<T>& store, const std::string& name, std::size_t channels,
            double momentum = 0.99, double eps = 1e-3);

  Bound bind(ParamBinder<T>& binder) const;
  Var<T> forward(const Bound& p, Var<T> x, NormMode mode) const;

  Param<T>& running_mean() const { return *mean_; }
  Param<T>& running_var() const { return *var_; }

 private:
  Param<T>* gamma_;
  Param<T>* beta_;
  Param<T>* mean_;
  Param<T>* var_;
  double momentum_, eps_;
};

// sigmoid(conv3d_same(h_seq, k, b)) with a 3x3x3 kernel onto one channel.
template <Real T>
class Reconstruct3d {
 public:
  struct Bound {
    Var<T> k, b;
  };

  Reconstruct3d(ParamStore<T>& store, const std::string& name,
                std::size_t in_channels, std::size_t kernel = 3);

  void init(Rng& rng);
  Bound bind(ParamBinder<T>& binder) const;
  Param<T>& kernel() const { return *k_; }
  Param<T>& bias() const { return *b_; }

 private:
  Param<T>* k_;
  Param<T>* b_;
  std::size_t in_, size_;
};

template <Real T>
Var<T> reconstruct3d(const typename Reconstruct3d<T>::Bound& p, Var<T> h_seq,
                     TemporalPadding temporal = TemporalPadding::kSame);

}  // namespace qrnn
