#pragma once

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "qrnn/tensor.h"

namespace qrnn {

enum class QuantKind {
  kFullPrecision,
  kBinaryConnect,
  kTernaryConnect,
  kQuaternaryConnect,
};

// Which statistics-derived cutpoints TC/QC use. Ignored by FP and BC.
enum class DistShape { kNormalLike, kUniformLike };

struct QuantScheme {
  QuantKind kind = QuantKind::kFullPrecision;
  DistShape shape = DistShape::kNormalLike;

  static QuantScheme full_precision() { return {}; }
  static QuantScheme binary() { return {QuantKind::kBinaryConnect}; }
  static QuantScheme ternary(DistShape s) {
    return {QuantKind::kTernaryConnect, s};
  }
  static QuantScheme quaternary(DistShape s) {
    return {QuantKind::kQuaternaryConnect, s};
  }

  // The value set every quantized element belongs to (empty for FP).
  std::vector<double> codomain() const;
  // "fp", "bc", "tc-normal", "qc-uniform", ...
  std::string name() const;

  bool operator==(const QuantScheme& other) const;
};

// Parses the CLI spellings: kind in {fp, bc, tc, qc}, shape in
// {normal, uniform}.
QuantScheme parse_scheme(const std::string& kind, const std::string& shape);
std::string kind_token(QuantKind kind);
std::string shape_token(DistShape shape);

// Piecewise-constant map from the real line onto `levels`. With
// kLowerClosed a value equal to a cutpoint falls in the interval below it
// ("w <= c"); with kUpperClosed it falls in the interval above ("w >= c").
struct ThresholdSet {
  enum class Boundary { kLowerClosed, kUpperClosed };

  double mu = 0.0;
  double sigma = 0.0;
  std::vector<double> cutpoints;
  std::vector<double> levels;
  Boundary boundary = Boundary::kLowerClosed;

  std::size_t bucket(double w) const;
  double apply(double w) const { return levels[bucket(w)]; }
};

ThresholdSet binary_thresholds();
// Cutpoints -(mu + sigma), mu + sigma for NormalLike and
// -(mu + sigma/2), mu + sigma/2 for UniformLike. When they fail to be
// strictly increasing the set degenerates to a single level 0.
ThresholdSet ternary_thresholds(double mu, double sigma, DistShape shape);
// Cutpoints -(mu + sigma/k), 0, mu + sigma/k with k = 4 (NormalLike) or
// 6 (UniformLike); degenerates to a sign split onto {-0.5, 0.5}.
ThresholdSet quaternary_thresholds(double mu, double sigma, DistShape shape);
// Thresholds for `scheme` given precomputed statistics. FP has none.
ThresholdSet thresholds_for(const QuantScheme& scheme, MeanStd stats);

template <Real T>
Tensor<T> quantize_with(const Tensor<T>& w, const ThresholdSet& thresholds);

// Each call recomputes mean/std from `w`.
template <Real T> Tensor<T> quantize_bc(const Tensor<T>& w);
template <Real T> Tensor<T> quantize_tc(const Tensor<T>& w, DistShape shape);
template <Real T> Tensor<T> quantize_qc(const Tensor<T>& w, DistShape shape);
template <Real T> Tensor<T> quantize(const Tensor<T>& w, const QuantScheme& scheme);

struct HistogramBin {
  double center = 0.0;
  std::size_t count = 0;
};

// Equal-width bins over [min(w), max(w)]; the maximum lands in the last
// bin. A constant tensor puts every element in the first bin.
template <Real T>
std::vector<HistogramBin> weight_histogram(const Tensor<T>& w, std::size_t bins);

void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins);

}  // namespace qrnn
