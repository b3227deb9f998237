#include "qrnn/metrics.h"

namespace qrnn {

template <Real T>
double mse_frames(const Tensor<T>& I, const Tensor<T>& K) {
  if (I.shape() != K.shape()) {
    throw ShapeError("mse_frames: " + shape_string(I.shape()) + " vs " + shape_string(K.shape()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < I.size(); ++i) {
    const double d = double(I[i]) - double(K[i]);
    acc += d * d;
  }
  return acc / double(I.size());
}

template <Real T>
std::vector<double> per_frame_mse(const std::vector<Tensor<T>>& pred,
                                  const std::vector<Tensor<T>>& truth) {
  if (pred.size() != truth.size()) {
    throw ShapeError("per_frame_mse: " + std::to_string(pred.size()) + " predictions for " +
                     std::to_string(truth.size()) + " ground-truth sequences");
  }
  if (pred.empty()) throw DomainError("per_frame_mse of an empty set");
  const std::size_t F = pred[0].dim(0);
  std::vector<double> out(F, 0.0);
  for (std::size_t n = 0; n < pred.size(); ++n) {
    if (pred[n].shape() != truth[n].shape() || pred[n].dim(0) != F || pred[n].rank() != 3) {
      throw ShapeError("per_frame_mse: sample " + std::to_string(n) + " has shapes " +
                       shape_string(pred[n].shape()) + " and " + shape_string(truth[n].shape()));
    }
    const std::size_t area = pred[n].dim(1) * pred[n].dim(2);
    const Shape frame{pred[n].dim(1), pred[n].dim(2)};
    for (std::size_t f = 0; f < F; ++f) {
      Tensor<T> a(frame), b(frame);
      std::copy_n(pred[n].raw() + f * area, area, a.raw());
      std::copy_n(truth[n].raw() + f * area, area, b.raw());
      out[f] += mse_frames(a, b);
    }
  }
  for (auto& v : out) v /= double(pred.size());
  return out;
}

template double mse_frames(const Tensor<float>&, const Tensor<float>&);
template double mse_frames(const Tensor<double>&, const Tensor<double>&);
template std::vector<double> per_frame_mse(const std::vector<Tensor<float>>&,
                                           const std::vector<Tensor<float>>&);
template std::vector<double> per_frame_mse(const std::vector<Tensor<double>>&,
                                           const std::vector<Tensor<double>>&);

}  // namespace qrnn
