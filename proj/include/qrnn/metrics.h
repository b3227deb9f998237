#pragma once

#include <vector>

#include "qrnn/tensor.h"

namespace qrnn {

// (1/mn) * sum over pixels of (I - K)^2 for two equally shaped frames.
template <Real T>
double mse_frames(const Tensor<T>& I, const Tensor<T>& K);

// pred and truth hold one [F, H, W] tensor per sample; returns the mean
// frame MSE for each of the F frame indices.
template <Real T>
std::vector<double> per_frame_mse(const std::vector<Tensor<T>>& pred,
                                  const std::vector<Tensor<T>>& truth);

}  // namespace qrnn
