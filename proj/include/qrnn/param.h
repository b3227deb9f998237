#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "qrnn/graph.h"
#include "qrnn/quantize.h"
#include "qrnn/random.h"

namespace qrnn {

// A trainable tensor. `value` is the full-precision shadow; the forward
// pass may see a quantized image of it, but updates always land here.
template <Real T>
struct Param {
  std::string name;
  // Layer the tensor belongs to; used when statistics are pooled per cell.
  std::string group;
  Tensor<T> value;
  Tensor<T> grad;
  Tensor<T> m;
  Tensor<T> v;
  bool quantizable = false;
  // Non-trainable buffers (batch-norm running statistics) are stored and
  // checkpointed like parameters but never bound or updated.
  bool trainable = true;

  void zero_grad() { grad.fill(T(0)); }
};

template <Real T>
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Param<T>& add(std::string name, std::string group, Shape shape,
                bool quantizable, bool trainable = true);

  Param<T>& at(const std::string& name);
  const Param<T>& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::deque<Param<T>>& params() { return params_; }
  const std::deque<Param<T>>& params() const { return params_; }

  void zero_grads();

 private:
  std::deque<Param<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Gate-role name -> parameter, e.g. "W_f", "U_i", "b_o", "Wc_f".
template <Real T>
class CellParams {
 public:
  void set(const std::string& role, Param<T>* p) { roles_[role] = p; }
  Param<T>& at(const std::string& role) const;
  const std::map<std::string, Param<T>*>& roles() const { return roles_; }

 private:
  std::map<std::string, Param<T>*> roles_;
};

enum class StatsGranularity { kPerTensor, kPerCell };

struct QuantPolicy {
  QuantScheme scheme;
  StatsGranularity granularity = StatsGranularity::kPerTensor;
};

// Called with every quantized image handed to the forward pass.
template <Real T>
using QuantObserver = std::function<void(const Param<T>&, const Tensor<T>&)>;

// Maps parameters onto leaves of one graph. Quantizable parameters are
// replaced by their quantized image, computed from the shadow's current
// statistics; the image's gradient is routed unchanged into the shadow's
// grad buffer (identity straight-through). Each parameter is bound once.
template <Real T>
class ParamBinder {
 public:
  ParamBinder(Graph<T>& graph, const ParamStore<T>& store, QuantPolicy policy,
              bool collect_grads);

  Var<T> bind(Param<T>& p);
  Graph<T>& graph() { return graph_; }

  void set_observer(QuantObserver<T> observer) { observer_ = std::move(observer); }
  const QuantPolicy& policy() const { return policy_; }

 private:
  Graph<T>& graph_;
  QuantPolicy policy_;
  bool collect_grads_;
  std::unordered_map<std::string, MeanStd> group_stats_;
  std::unordered_map<const Param<T>*, Var<T>> bound_;
  std::deque<Tensor<T>> images_;
  QuantObserver<T> observer_;
};

// Fills a parameter uniformly in +-sqrt(6 / (fan_in + fan_out)).
template <Real T>
void glorot_uniform(Param<T>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng);
template <Real T>
void uniform_fill(Param<T>& p, double lo, double hi, Rng& rng);

extern template class ParamStore<float>;
extern template class ParamStore<double>;
extern template class ParamBinder<float>;
extern template class ParamBinder<double>;

}  // namespace qrnn
