#include "qrnn/quantize.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace qrnn {

std::vector<double> QuantScheme::codomain() const {
  switch (kind) {
    case QuantKind::kFullPrecision: return {};
    case QuantKind::kBinaryConnect: return {-1.0, 1.0};
    case QuantKind::kTernaryConnect: return {-1.0, 0.0, 1.0};
    case QuantKind::kQuaternaryConnect: return {-1.0, -0.5, 0.5, 1.0};
  }
  return {};
}

std::string kind_token(QuantKind kind) {
  switch (kind) {
    case QuantKind::kFullPrecision: return "fp";
    case QuantKind::kBinaryConnect: return "bc";
    case QuantKind::kTernaryConnect: return "tc";
    case QuantKind::kQuaternaryConnect: return "qc";
  }
  return "?";
}

std::string shape_token(DistShape shape) {
  return shape == DistShape::kNormalLike ? "normal" : "uniform";
}

std::string QuantScheme::name() const {
  if (kind == QuantKind::kFullPrecision || kind == QuantKind::kBinaryConnect) {
    return kind_token(kind);
  }
  return kind_token(kind) + "-" + shape_token(shape);
}

bool QuantScheme::operator==(const QuantScheme& other) const {
  if (kind != other.kind) return false;
  if (kind == QuantKind::kFullPrecision || kind == QuantKind::kBinaryConnect) {
    return true;
  }
  return shape == other.shape;
}

QuantScheme parse_scheme(const std::string& kind, const std::string& shape) {
  DistShape s;
  if (shape == "normal") {
    s = DistShape::kNormalLike;
  } else if (shape == "uniform") {
    s = DistShape::kUniformLike;
  } else {
    throw UsageError("unknown distribution shape '" + shape +
                     "' (expected normal or uniform)");
  }
  if (kind == "fp") return QuantScheme::full_precision();
  if (kind == "bc") return QuantScheme::binary();
  if (kind == "tc") return QuantScheme::ternary(s);
  if (kind == "qc") return QuantScheme::quaternary(s);
  throw UsageError("unknown quantization scheme '" + kind +
                   "' (expected fp, bc, tc or qc)");
}

std::size_t ThresholdSet::bucket(double w) const {
  std::size_t i = 0;
  if (boundary == Boundary::kLowerClosed) {
    while (i < cutpoints.size() && w > cutpoints[i]) ++i;
  } else {
    while (i < cutpoints.size() && w >= cutpoints[i]) ++i;
  }
  return i;
}

namespace {

bool strictly_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i - 1] < v[i])) return false;
  return true;
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0)) {
    throw DomainError("threshold sigma must be >= 0, got " +
                      std::to_string(sigma));
  }
}

}  // namespace

ThresholdSet binary_thresholds() {
  ThresholdSet t;
  t.cutpoints = {0.0};
  t.levels = {-1.0, 1.0};
  t.boundary = ThresholdSet::Boundary::kUpperClosed;
  return t;
}

ThresholdSet ternary_thresholds(double mu, double sigma, DistShape shape) {
  check_sigma(sigma);
  const double edge =
      shape == DistShape::kNormalLike ? mu + sigma : mu + sigma / 2.0;
  ThresholdSet t;
  t.mu = mu;
  t.sigma = sigma;
  t.cutpoints = {-edge, edge};
  t.levels = {-1.0, 0.0, 1.0};
  if (!strictly_increasing(t.cutpoints)) {
    t.cutpoints.clear();
    t.levels = {0.0};
  }
  return t;
}

ThresholdSet quaternary_thresholds(double mu, double sigma, DistShape shape) {
  check_sigma(sigma);
  const double edge =
      shape == DistShape::kNormalLike ? mu + sigma / 4.0 : mu + sigma / 6.0;
  ThresholdSet t;
  t.mu = mu;
  t.sigma = sigma;
  t.cutpoints = {-edge, 0.0, edge};
  t.levels = {-1.0, -0.5, 0.5, 1.0};
  if (!strictly_increasing(t.cutpoints)) {
    t.cutpoints = {0.0};
    t.levels = {-0.5, 0.5};
  }
  return t;
}

ThresholdSet thresholds_for(const QuantScheme& scheme, MeanStd stats) {
  switch (scheme.kind) {
    case QuantKind::kFullPrecision:
      return {};
    case QuantKind::kBinaryConnect:
      return binary_thresholds();
    case QuantKind::kTernaryConnect:
      return ternary_thresholds(stats.mean, stats.stddev, scheme.shape);
    case QuantKind::kQuaternaryConnect:
      return quaternary_thresholds(stats.mean, stats.stddev, scheme.shape);
  }
  return {};
}

template <Real T>
Tensor<T> quantize_with(const Tensor<T>& w, const ThresholdSet& thresholds) {
  if (w.empty()) throw DomainError("quantize of an empty tensor");
  if (thresholds.levels.empty()) return w;
  Tensor<T> out(w.shape());
  const T* src = w.raw();
  T* dst = out.raw();
  const std::size_t n = w.size();
  const auto& cuts = thresholds.cutpoints;
  const auto& levels = thresholds.levels;
  if (thresholds.boundary == ThresholdSet::Boundary::kUpperClosed) {
    for (std::size_t i = 0; i < n; ++i)
      dst[i] = T(levels[thresholds.bucket(src[i])]);
  } else if (cuts.size() == 2) {
    const double lo = cuts[0], hi = cuts[1];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = src[i];
      dst[i] = T(v <= lo ? levels[0] : (v <= hi ? levels[1] : levels[2]));
    }
  } else if (cuts.size() == 3) {
    const double a = cuts[0], b = cuts[1], c = cuts[2];
    for (std::size_t i = 0; i < n; ++i) {
      const double v = src[i];
      dst[i] = T(v <= a   ? levels[0]
                 : v <= b ? levels[1]
                 : v <= c ? levels[2]
                          : levels[3]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i)
      dst[i] = T(levels[thresholds.bucket(src[i])]);
  }
  return out;
}

template <Real T>
Tensor<T> quantize_bc(const Tensor<T>& w) {
  return quantize_with(w, binary_thresholds());
}

template <Real T>
Tensor<T> quantize_tc(const Tensor<T>& w, DistShape shape) {
  const MeanStd s = mean_std(w);
  return quantize_with(w, ternary_thresholds(s.mean, s.stddev, shape));
}

template <Real T>
Tensor<T> quantize_qc(const Tensor<T>& w, DistShape shape) {
  const MeanStd s = mean_std(w);
  return quantize_with(w, quaternary_thresholds(s.mean, s.stddev, shape));
}

template <Real T>
Tensor<T> quantize(const Tensor<T>& w, const QuantScheme& scheme) {
  switch (scheme.kind) {
    case QuantKind::kFullPrecision: return w;
    case QuantKind::kBinaryConnect: return quantize_bc(w);
    case QuantKind::kTernaryConnect: return quantize_tc(w, scheme.shape);
    case QuantKind::kQuaternaryConnect: return quantize_qc(w, scheme.shape);
  }
  return w;
}

template <Real T>
std::vector<HistogramBin> weight_histogram(const Tensor<T>& w, std::size_t bins) {
  if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
  if (w.empty()) throw DomainError("histogram of an empty tensor");
  const auto [lo_it, hi_it] = std::minmax_element(w.data().begin(), w.data().end());
  const double lo = *lo_it, hi = *hi_it;
  const double width = (hi - lo) / double(bins);
  std::vector<HistogramBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) out[b].center = lo + (double(b) + 0.5) * width;
  for (T v : w.data()) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>((double(v) - lo) / width);
      b = std::min(b, bins - 1);
    }
    ++out[b].count;
  }
  return out;
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramBin>& bins) {
  out << "bin_center,count\n";
  char buf[64];
  for (const auto& b : bins) {
    std::snprintf(buf, sizeof buf, "%.9g,%zu\n", b.center, b.count);
    out << buf;
  }
}

#define QRNN_INSTANTIATE_QUANT(T)                                              \
  template Tensor<T> quantize_with(const Tensor<T>&, const ThresholdSet&);      \
  template Tensor<T> quantize_bc(const Tensor<T>&);                             \
  template Tensor<T> quantize_tc(const Tensor<T>&, DistShape);                  \
  template Tensor<T> quantize_qc(const Tensor<T>&, DistShape);                  \
  template Tensor<T> quantize(const Tensor<T>&, const QuantScheme&);            \
  template std::vector<HistogramBin> weight_histogram(const Tensor<T>&, std::size_t);

QRNN_INSTANTIATE_QUANT(float)
QRNN_INSTANTIATE_QUANT(double)

#undef QRNN_INSTANTIATE_QUANT

}  // namespace qrnn
