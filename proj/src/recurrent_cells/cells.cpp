#include "qrnn/cells.h"

#include <array>

namespace qrnn {

namespace {

template <Real T>
Param<T>* make(ParamStore<T>& store, CellParams<T>& params,
               const std::string& cell, const std::string& role, Shape shape,
               bool quantizable) {
  Param<T>* p = &store.add(cell + "." + role, cell, std::move(shape), quantizable);
  params.set(role, p);
  return p;
}

template <Real T, std::size_t N>
Var<T> fuse(ParamBinder<T>& binder, const CellParams<T>& params,
            const std::array<const char*, N>& roles, std::size_t axis) {
  std::array<Var<T>, N> parts;
  for (std::size_t i = 0; i < N; ++i) parts[i] = binder.bind(params.at(roles[i]));
  return concat<T>(std::span<const Var<T>>(parts), axis);
}

template <Real T>
void check_batch_input(const char* cell, Var<T> x, std::size_t width) {
  if (x.shape().size() != 2 || x.shape()[1] != width) {
    throw ShapeError(std::string(cell) + ": input " + shape_string(x.shape()) +
                     " is not [batch, " + std::to_string(width) + "]");
  }
}

}  // namespace

// --- Elman ------------------------------------------------------------------

template <Real T>
RnnCell<T>::RnnCell(ParamStore<T>& store, const std::string& name,
                    std::size_t input, std::size_t hidden, std::size_t output)
    : input_(input), hidden_(hidden), output_(output) {
  make(store, params_, name, "W_h", {input, hidden}, true);
  make(store, params_, name, "U_h", {hidden, hidden}, true);
  make(store, params_, name, "b_h", {hidden}, false);
  make(store, params_, name, "W_y", {hidden, output}, true);
  make(store, params_, name, "b_y", {output}, false);
}

template <Real T>
void RnnCell<T>::init(Rng& rng) {
  glorot_uniform(params_.at("W_h"), input_, hidden_, rng);
  glorot_uniform(params_.at("U_h"), hidden_, hidden_, rng);
  glorot_uniform(params_.at("W_y"), hidden_, output_, rng);
}

template <Real T>
typename RnnCell<T>::Bound RnnCell<T>::bind(ParamBinder<T>& binder) const {
  return {binder.bind(params_.at("W_h")), binder.bind(params_.at("U_h")),
          binder.bind(params_.at("b_h")), binder.bind(params_.at("W_y")),
          binder.bind(params_.at("b_y"))};
}

template <Real T>
RnnOutput<T> rnn_step(const typename RnnCell<T>::Bound& p, Var<T> x, Var<T> h_prev) {
  check_batch_input("rnn_step", x, p.w_h.shape()[0]);
  Var<T> h = tanh_op(add_bias(add(matmul(x, p.w_h), matmul(h_prev, p.u_h)), p.b_h));
  Var<T> y = add_bias(matmul(h, p.w_y), p.b_y);
  return {h, y};
}

// --- LSTM -------------------------------------------------------------------

template <Real T>
LstmCell<T>::LstmCell(ParamStore<T>& store, const std::string& name,
                      std::size_t input, std::size_t hidden)
    : input_(input), hidden_(hidden) {
  for (const char* g : {"f", "i", "c", "o"}) {
    make(store, params_, name, std::string("W_") + g, {input, hidden}, true);
    make(store, params_, name, std::string("U_") + g, {hidden, hidden}, true);
    make(store, params_, name, std::string("b_") + g, {hidden}, false);
  }
}

template <Real T>
void LstmCell<T>::init(Rng& rng) {
  for (const char* g : {"f", "i", "c", "o"}) {
    glorot_uniform(params_.at(std::string("W_") + g), input_, hidden_, rng);
    glorot_uniform(params_.at(std::string("U_") + g), hidden_, hidden_, rng);
  }
  params_.at("b_f").value.fill(T(1));
}

template <Real T>
typename LstmCell<T>::Bound LstmCell<T>::bind(ParamBinder<T>& binder) const {
  using R = std::array<const char*, 4>;
  return {fuse<T>(binder, params_, R{"W_f", "W_i", "W_c", "W_o"}, 1),
          fuse<T>(binder, params_, R{"U_f", "U_i", "U_c", "U_o"}, 1),
          fuse<T>(binder, params_, R{"b_f", "b_i", "b_c", "b_o"}, 0), hidden_};
}

template <Real T>
LstmState<T> LstmCell<T>::zero_state(Graph<T>& g, std::size_t batch) const {
  return {g.constant(Tensor<T>({batch, hidden_})),
          g.constant(Tensor<T>({batch, hidden_}))};
}

template <Real T>
LstmState<T> lstm_step(const typename LstmCell<T>::Bound& p, Var<T> x,
                       const LstmState<T>& s) {
  check_batch_input("lstm_step", x, p.w.shape()[0]);
  if (s.h.shape() != s.c.shape() || s.h.shape()[1] != p.hidden) {
    throw ShapeError("lstm_step: state " + shape_string(s.h.shape()) +
                     " does not match hidden size " + std::to_string(p.hidden));
  }
  const std::size_t H = p.hidden;
  Var<T> pre = add_bias(add(matmul(x, p.w), matmul(s.h, p.u)), p.b);
  Var<T> f = sigmoid(slice(pre, 1, 0, H));
  Var<T> i = sigmoid(slice(pre, 1, H, H));
  Var<T> c_tilde = tanh_op(slice(pre, 1, 2 * H, H));
  Var<T> o = sigmoid(slice(pre, 1, 3 * H, H));
  Var<T> c = add(hadamard(f, s.c), hadamard(i, c_tilde));
  Var<T> h = hadamard(o, tanh_op(c));
  return {h, c};
}

// --- GRU --------------------------------------------------------------------

template <Real T>
GruCell<T>::GruCell(ParamStore<T>& store, const std::string& name,
                    std::size_t input, std::size_t hidden)
    : input_(input), hidden_(hidden) {
  for (const char* g : {"z", "r", "h"}) {
    make(store, params_, name, std::string("W_") + g, {input, hidden}, true);
    make(store, params_, name, std::string("U_") + g, {hidden, hidden}, true);
    make(store, params_, name, std::string("b_") + g, {hidden}, false);
  }
}

template <Real T>
void GruCell<T>::init(Rng& rng) {
  for (const char* g : {"z", "r", "h"}) {
    glorot_uniform(params_.at(std::string("W_") + g), input_, hidden_, rng);
    glorot_uniform(params_.at(std::string("U_") + g), hidden_, hidden_, rng);
  }
}

template <Real T>
typename GruCell<T>::Bound GruCell<T>::bind(ParamBinder<T>& binder) const {
  using R3 = std::array<const char*, 3>;
  using R2 = std::array<const char*, 2>;
  return {fuse<T>(binder, params_, R3{"W_z", "W_r", "W_h"}, 1),
          fuse<T>(binder, params_, R2{"U_z", "U_r"}, 1),
          binder.bind(params_.at("U_h")),
          fuse<T>(binder, params_, R3{"b_z", "b_r", "b_h"}, 0), hidden_};
}

template <Real T>
GruState<T> GruCell<T>::zero_state(Graph<T>& g, std::size_t batch) const {
  return {g.constant(Tensor<T>({batch, hidden_}))};
}

template <Real T>
GruState<T> gru_step(const typename GruCell<T>::Bound& p, Var<T> x,
                     const GruState<T>& s) {
  check_batch_input("gru_step", x, p.w.shape()[0]);
  if (s.h.shape()[1] != p.hidden) {
    throw ShapeError("gru_step: state " + shape_string(s.h.shape()) +
                     " does not match hidden size " + std::to_string(p.hidden));
  }
  const std::size_t H = p.hidden;
  Var<T> px = add_bias(matmul(x, p.w), p.b);
  Var<T> ph = matmul(s.h, p.u_zr);
  Var<T> z = sigmoid(add(slice(px, 1, 0, H), slice(ph, 1, 0, H)));
  Var<T> r = sigmoid(add(slice(px, 1, H, H), slice(ph, 1, H, H)));
  Var<T> h_tilde =
      tanh_op(add(slice(px, 1, 2 * H, H), matmul(hadamard(r, s.h), p.u_h)));
  // (1 - z) * h_prev + z * h_tilde
  Var<T> h = add(hadamard(affine(z, T(-1), T(1)), s.h), hadamard(z, h_tilde));
  return {h};
}

// --- ConvLSTM ---------------------------------------------------------------

template <Real T>
ConvLstmCell<T>::ConvLstmCell(ParamStore<T>& store, const std::string& name,
                              std::size_t in_channels,
                              std::size_t hidden_channels, std::size_t height,
                              std::size_t width, std::size_t kernel)
    : in_(in_channels),
      hidden_(hidden_channels),
      height_(height),
      width_(width),
      kernel_(kernel) {
  if (kernel % 2 == 0) {
    throw ConfigError("ConvLSTM kernel size must be odd, got " + std::to_string(kernel));
  }
  for (const char* g : {"i", "f", "c", "o"}) {
    make(store, params_, name, std::string("Wx_") + g,
         {hidden_channels, in_channels, kernel, kernel}, true);
    make(store, params_, name, std::string("Wh_") + g,
         {hidden_channels, hidden_channels, kernel, kernel}, true);
    make(store, params_, name, std::string("b_") + g, {hidden_channels}, false);
  }
  for (const char* g : {"i", "f", "o"}) {
    make(store, params_, name, std::string("Wc_") + g,
         {hidden_channels, height, width}, false);
  }
}

template <Real T>
void ConvLstmCell<T>::init(Rng& rng) {
  const std::size_t area = kernel_ * kernel_;
  for (const char* g : {"i", "f", "c", "o"}) {
    glorot_uniform(params_.at(std::string("Wx_") + g), in_ * area,
                   hidden_ * area, rng);
    glorot_uniform(params_.at(std::string("Wh_") + g), hidden_ * area,
                   hidden_ * area, rng);
  }
  params_.at("b_f").value.fill(T(1));
}

template <Real T>
typename ConvLstmCell<T>::Bound ConvLstmCell<T>::bind(ParamBinder<T>& binder) const {
  using R = std::array<const char*, 4>;
  return {fuse<T>(binder, params_, R{"Wx_i", "Wx_f", "Wx_c", "Wx_o"}, 0),
          fuse<T>(binder, params_, R{"Wh_i", "Wh_f", "Wh_c", "Wh_o"}, 0),
          fuse<T>(binder, params_, R{"b_i", "b_f", "b_c", "b_o"}, 0),
          binder.bind(params_.at("Wc_i")),
          binder.bind(params_.at("Wc_f")),
          binder.bind(params_.at("Wc_o")),
          hidden_};
}

template <Real T>
ConvLstmState<T> ConvLstmCell<T>::zero_state(Graph<T>& g, std::size_t batch) const {
  return {g.constant(Tensor<T>({batch, hidden_, height_, width_})),
          g.constant(Tensor<T>({batch, hidden_, height_, width_}))};
}

template <Real T>
ConvLstmState<T> convlstm_step(const typename ConvLstmCell<T>::Bound& p,
                               Var<T> x, const ConvLstmState<T>& s) {
  const Shape& sx = x.shape();
  const Shape& sh = s.h.shape();
  if (sx.size() != 4 || sh.size() != 4 || sx[0] != sh[0] || sx[2] != sh[2] ||
      sx[3] != sh[3]) {
    throw ShapeError("convlstm_step: input " + shape_string(sx) +
                     " does not match state " + shape_string(sh) +
                     " (batch and spatial dims must agree)");
  }
  const std::size_t C = p.channels;
  Var<T> pre = add(conv2d_same(x, p.wx, p.b), conv2d_same(s.h, p.wh, Var<T>()));
  Var<T> i = sigmoid(add(slice(pre, 1, 0, C), mul_broadcast(s.c, p.peep_i)));
  Var<T> f = sigmoid(add(slice(pre, 1, C, C), mul_broadcast(s.c, p.peep_f)));
  Var<T> c_tilde = tanh_op(slice(pre, 1, 2 * C, C));
  Var<T> c = add(hadamard(f, s.c), hadamard(i, c_tilde));
  Var<T> o = sigmoid(add(slice(pre, 1, 3 * C, C), mul_broadcast(c, p.peep_o)));
  Var<T> h = hadamard(o, tanh_op(c));
  return {h, c};
}

// --- Dense / embedding / batch norm / reconstruction ---------------------------

template <Real T>
Dense<T>::Dense(ParamStore<T>& store, const std::string& name, std::size_t input,
                std::size_t output)
    : w_(&store.add(name + ".W", name, {input, output}, true)),
      b_(&store.add(name + ".b", name, {output}, false)),
      input_(input),
      output_(output) {}

template <Real T>
void Dense<T>::init(Rng& rng) {
  glorot_uniform(*w_, input_, output_, rng);
}

template <Real T>
typename Dense<T>::Bound Dense<T>::bind(ParamBinder<T>& binder) const {
  return {binder.bind(*w_), binder.bind(*b_)};
}

template <Real T>
Var<T> dense(const typename Dense<T>::Bound& p, Var<T> x) {
  return add_bias(matmul(x, p.w), p.b);
}

template <Real T>
Embedding<T>::Embedding(ParamStore<T>& store, const std::string& name,
                        std::size_t vocab, std::size_t width, bool quantizable)
    : table_(&store.add(name + ".table", name, {vocab, width}, quantizable)) {}

template <Real T>
void Embedding<T>::init(Rng& rng) {
  uniform_fill(*table_, -0.05, 0.05, rng);
}

template <Real T>
BatchNorm<T>::BatchNorm(ParamStore<T>& store, const std::string& name,
                        std::size_t channels, double momentum, double eps)
    : gamma_(&store.add(name + ".gamma", name, {channels}, false)),
      beta_(&store.add(name + ".beta", name, {channels}, false)),
      mean_(&store.add(name + ".running_mean", name, {channels}, false, false)),
      var_(&store.add(name + ".running_var", name, {channels}, false, false)),
      momentum_(momentum),
      eps_(eps) {
  gamma_->value.fill(T(1));
  var_->value.fill(T(1));
}

template <Real T>
typename BatchNorm<T>::Bound BatchNorm<T>::bind(ParamBinder<T>& binder) const {
  return {binder.bind(*gamma_), binder.bind(*beta_)};
}

template <Real T>
Var<T> BatchNorm<T>::forward(const Bound& p, Var<T> x, NormMode mode) const {
  if (mode == NormMode::kEval) {
    return batch_norm_fixed(x, p.gamma, p.beta, mean_->value, var_->value, T(eps_));
  }
  Tensor<T> batch_mean, batch_var;
  Var<T> y = batch_norm_train(x, p.gamma, p.beta, T(eps_), &batch_mean, &batch_var);
  const T keep = T(momentum_);
  for (std::size_t c = 0; c < batch_mean.size(); ++c) {
    mean_->value[c] = keep * mean_->value[c] + (T(1) - keep) * batch_mean[c];
    var_->value[c] = keep * var_->value[c] + (T(1) - keep) * batch_var[c];
  }
  return y;
}

template <Real T>
Reconstruct3d<T>::Reconstruct3d(ParamStore<T>& store, const std::string& name,
                                std::size_t in_channels, std::size_t kernel)
    : k_(&store.add(name + ".kernel", name, {1, in_channels, kernel, kernel, kernel}, true)),
      b_(&store.add(name + ".bias", name, {1}, false)),
      in_(in_channels),
      size_(kernel) {}

template <Real T>
void Reconstruct3d<T>::init(Rng& rng) {
  const std::size_t vol = size_ * size_ * size_;
  glorot_uniform(*k_, in_ * vol, vol, rng);
}

template <Real T>
typename Reconstruct3d<T>::Bound Reconstruct3d<T>::bind(ParamBinder<T>& binder) const {
  return {binder.bind(*k_), binder.bind(*b_)};
}

template <Real T>
Var<T> reconstruct3d(const typename Reconstruct3d<T>::Bound& p, Var<T> h_seq,
                     TemporalPadding temporal) {
  return sigmoid(conv3d_same(h_seq, p.k, p.b, temporal));
}

#define QRNN_INSTANTIATE_CELLS(T)                                                  \
  template class RnnCell<T>;                                                       \
  template class LstmCell<T>;                                                      \
  template class GruCell<T>;                                                       \
  template class ConvLstmCell<T>;                                                  \
  template class Dense<T>;                                                         \
  template class Embedding<T>;                                                     \
  template class BatchNorm<T>;                                                     \
  template class Reconstruct3d<T>;                                                 \
  template RnnOutput<T> rnn_step<T>(const RnnCell<T>::Bound&, Var<T>, Var<T>);     \
  template LstmState<T> lstm_step<T>(const LstmCell<T>::Bound&, Var<T>,            \
                                     const LstmState<T>&);                         \
  template GruState<T> gru_step<T>(const GruCell<T>::Bound&, Var<T>,               \
                                   const GruState<T>&);                            \
  template ConvLstmState<T> convlstm_step<T>(const ConvLstmCell<T>::Bound&,        \
                                             Var<T>, const ConvLstmState<T>&);     \
  template Var<T> dense<T>(const Dense<T>::Bound&, Var<T>);                        \
  template Var<T> reconstruct3d<T>(const Reconstruct3d<T>::Bound&, Var<T>,         \
                                   TemporalPadding);

QRNN_INSTANTIATE_CELLS(float)
QRNN_INSTANTIATE_CELLS(double)

#undef QRNN_INSTANTIATE_CELLS

}  // namespace qrnn
