#pragma once

#include "qrnn/graph.h"

namespace qrnn {

// Predictions are clipped to [kBceClip, 1 - kBceClip] before the logs.
inline constexpr double kBceClip = 1e-7;

// -mean(t ln p + (1 - t) ln(1 - p)). Clipped elements pass no gradient.
template <Real T>
Var<T> bce_loss(Var<T> pred, Var<T> target);

// mean((pred - target)^2).
template <Real T>
Var<T> mse_loss(Var<T> pred, Var<T> target);

}  // namespace qrnn
