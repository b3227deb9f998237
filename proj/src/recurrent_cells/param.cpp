#include "qrnn/param.h"

#include <cmath>

namespace qrnn {

template <Real T>
Param<T>& ParamStore<T>::add(std::string name, std::string group, Shape shape,
                             bool quantizable, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter name " + name);
  Param<T> p;
  p.name = name;
  p.group = std::move(group);
  p.value = Tensor<T>::zeros(shape);
  p.grad = Tensor<T>::zeros(shape);
  p.m = Tensor<T>::zeros(shape);
  p.v = Tensor<T>::zeros(shape);
  p.quantizable = quantizable;
  p.trainable = trainable;
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

template <Real T>
Param<T>& ParamStore<T>::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named " + name);
  return params_[it->second];
}

template <Real T>
const Param<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("no parameter named " + name);
  return params_[it->second];
}

template <Real T>
void ParamStore<T>::zero_grads() {
  for (auto& p : params_) p.zero_grad();
}

template <Real T>
Param<T>& CellParams<T>::at(const std::string& role) const {
  auto it = roles_.find(role);
  if (it == roles_.end()) throw ConfigError("cell has no parameter role " + role);
  return *it->second;
}

template <Real T>
ParamBinder<T>::ParamBinder(Graph<T>& graph, const ParamStore<T>& store,
                            QuantPolicy policy, bool collect_grads)
    : graph_(graph), policy_(policy), collect_grads_(collect_grads) {
  if (policy_.scheme.kind == QuantKind::kFullPrecision ||
      policy_.granularity != StatsGranularity::kPerCell) {
    return;
  }
  // Pooled statistics over every quantizable tensor of a group.
  std::unordered_map<std::string, std::pair<double, double>> acc;
  for (const auto& p : store.params()) {
    if (!p.quantizable || !p.trainable) continue;
    auto& [sum, count] = acc[p.group];
    for (T v : p.value.data()) sum += v;
    count += double(p.value.size());
  }
  std::unordered_map<std::string, double> sq;
  for (const auto& p : store.params()) {
    if (!p.quantizable || !p.trainable) continue;
    const auto& [sum, count] = acc[p.group];
    const double mean = sum / count;
    double& s = sq[p.group];
    for (T v : p.value.data()) s += (v - mean) * (v - mean);
  }
  for (const auto& [group, sc] : acc) {
    const double mean = sc.first / sc.second;
    group_stats_[group] = {mean, std::sqrt(sq[group] / sc.second)};
  }
}

template <Real T>
Var<T> ParamBinder<T>::bind(Param<T>& p) {
  if (!p.trainable) throw StateError("cannot bind non-trainable buffer " + p.name);
  if (auto it = bound_.find(&p); it != bound_.end()) return it->second;
  Tensor<T>* sink = collect_grads_ ? &p.grad : nullptr;
  Var<T> v;
  if (p.quantizable && policy_.scheme.kind != QuantKind::kFullPrecision) {
    const MeanStd stats = policy_.granularity == StatsGranularity::kPerCell
                              ? group_stats_.at(p.group)
                              : mean_std(p.value);
    images_.push_back(quantize_with(p.value, thresholds_for(policy_.scheme, stats)));
    if (observer_) observer_(p, images_.back());
    v = graph_.parameter(images_.back(), sink);
  } else {
    v = graph_.parameter(p.value, sink);
  }
  bound_.emplace(&p, v);
  return v;
}

template <Real T>
void glorot_uniform(Param<T>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
  uniform_fill(p, -limit, limit, rng);
}

template <Real T>
void uniform_fill(Param<T>& p, double lo, double hi, Rng& rng) {
  for (auto& v : p.value.data()) v = T(rng.uniform(lo, hi));
}

template class ParamStore<float>;
template class ParamStore<double>;
template class CellParams<float>;
template class CellParams<double>;
template class ParamBinder<float>;
template class ParamBinder<double>;
template void glorot_uniform(Param<float>&, std::size_t, std::size_t, Rng&);
template void glorot_uniform(Param<double>&, std::size_t, std::size_t, Rng&);
template void uniform_fill(Param<float>&, double, double, Rng&);
template void uniform_fill(Param<double>&, double, double, Rng&);

}  // namespace qrnn
