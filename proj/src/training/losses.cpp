#include "qrnn/losses.h"

#include <algorithm>
#include <cmath>

namespace qrnn {

namespace {

template <Real T>
void check_pair(const char* op, Var<T> pred, Var<T> target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError(std::string(op) + ": prediction " + shape_string(pred.shape()) +
                     " vs target " + shape_string(target.shape()));
  }
}

}  // namespace

template <Real T>
Var<T> bce_loss(Var<T> pred, Var<T> target) {
  check_pair("bce_loss", pred, target);
  const Tensor<T>& p = pred.value();
  const Tensor<T>& t = target.value();
  const double n = double(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(double(p[i]), kBceClip, 1.0 - kBceClip);
    const double ti = double(t[i]);
    acc += ti * std::log(pc) + (1.0 - ti) * std::log1p(-pc);
  }
  Graph<T>& g = *pred.graph();
  const std::uint32_t pid = pred.id(), tid = target.id();
  return g.record(Tensor<T>({1}, T(-acc / n)), {pred, target},
                  [pid, tid, n](Graph<T>& g, std::uint32_t self) {
                    const double up = double(g.grad(self)[0]) / n;
                    const Tensor<T>& p = g.value(pid);
                    const Tensor<T>& t = g.value(tid);
                    if (g.requires_grad(pid)) {
                      T* dp = g.grad_buffer(pid).raw();
                      for (std::size_t i = 0; i < p.size(); ++i) {
                        const double pi = double(p[i]);
                        if (pi < kBceClip || pi > 1.0 - kBceClip) continue;
                        const double ti = double(t[i]);
                        dp[i] += T(-up * (ti / pi - (1.0 - ti) / (1.0 - pi)));
                      }
                    }
                    if (g.requires_grad(tid)) {
                      T* dt = g.grad_buffer(tid).raw();
                      for (std::size_t i = 0; i < p.size(); ++i) {
                        const double pc = std::clamp(double(p[i]), kBceClip, 1.0 - kBceClip);
                        dt[i] += T(-up * (std::log(pc) - std::log1p(-pc)));
                      }
                    }
                  });
}

template <Real T>
Var<T> mse_loss(Var<T> pred, Var<T> target) {
  check_pair("mse_loss", pred, target);
  const Tensor<T>& p = pred.value();
  const Tensor<T>& t = target.value();
  const double n = double(p.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = double(p[i]) - double(t[i]);
    acc += d * d;
  }
  Graph<T>& g = *pred.graph();
  const std::uint32_t pid = pred.id(), tid = target.id();
  return g.record(Tensor<T>({1}, T(acc / n)), {pred, target},
                  [pid, tid, n](Graph<T>& g, std::uint32_t self) {
                    const double up = 2.0 * double(g.grad(self)[0]) / n;
                    const Tensor<T>& p = g.value(pid);
                    const Tensor<T>& t = g.value(tid);
                    for (std::uint32_t id : {pid, tid}) {
                      if (!g.requires_grad(id)) continue;
                      const double sign = id == pid ? 1.0 : -1.0;
                      T* d = g.grad_buffer(id).raw();
                      for (std::size_t i = 0; i < p.size(); ++i)
                        d[i] += T(sign * up * (double(p[i]) - double(t[i])));
                    }
                  });
}

template Var<float> bce_loss(Var<float>, Var<float>);
template Var<double> bce_loss(Var<double>, Var<double>);
template Var<float> mse_loss(Var<float>, Var<float>);
template Var<double> mse_loss(Var<double>, Var<double>);

}  // namespace qrnn
