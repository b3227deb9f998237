#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "qrnn/tensor.h"

namespace qrnn {

template <Real T>
class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while its graph lives.
template <Real T>
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return graph_ != nullptr; }
  Graph<T>* graph() const noexcept { return graph_; }
  std::uint32_t id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  Shape shape() const { return value().shape(); }
  // Gradient accumulated by the last backward(); throws StateError if the
  // node received none.
  const Tensor<T>& grad() const;

 private:
  friend class Graph<T>;
  Var(Graph<T>* graph, std::uint32_t id) : graph_(graph), id_(id) {}

  Graph<T>* graph_ = nullptr;
  std::uint32_t id_ = 0;
};

// Reverse-mode tape. Nodes are appended in evaluation order, so walking the
// tape backwards visits every node after all of its consumers.
template <Real T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::uint32_t self)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Value that never receives a gradient.
  Var<T> constant(Tensor<T> value);
  // Leaf that owns its value and receives a gradient (tests, inputs).
  Var<T> variable(Tensor<T> value);
  // Leaf that reads `value` in place. After backward() its gradient is
  // added into *grad_sink; without a sink the leaf acts as a constant.
  // `value` must outlive the graph.
  Var<T> parameter(const Tensor<T>& value, Tensor<T>* grad_sink);

  // Op construction. `fn` is dropped when no parent needs a gradient.
  Var<T> record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                BackwardFn fn);
  Var<T> record(Tensor<T> value, std::span<const Var<T>> parents,
                BackwardFn fn);

  void backward(Var<T> loss);

  const Tensor<T>& value(std::uint32_t id) const;
  const Tensor<T>& grad(std::uint32_t id) const;
  bool has_grad(std::uint32_t id) const;
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  // Zero-initialized on first use.
  Tensor<T>& grad_buffer(std::uint32_t id);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> owned;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Tensor<T>* sink = nullptr;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Var<T> push(Node node);
  void check_var(Var<T> v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

extern template class Var<float>;
extern template class Var<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace qrnn
