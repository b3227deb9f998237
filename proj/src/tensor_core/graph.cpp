#include "qrnn/graph.h"

#include <string>

namespace qrnn {

template <Real T>
const Tensor<T>& Var<T>::value() const {
  if (!graph_) throw StateError("value() on an unset Var");
  return graph_->value(id_);
}

template <Real T>
const Tensor<T>& Var<T>::grad() const {
  if (!graph_) throw StateError("grad() on an unset Var");
  return graph_->grad(id_);
}

template <Real T>
Var<T> Graph<T>::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var<T>(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

template <Real T>
void Graph<T>::check_var(Var<T> v) const {
  if (!v.valid()) throw StateError("unset Var passed to graph");
  if (v.graph() != this) throw StateError("Var belongs to a different graph");
}

template <Real T>
Var<T> Graph<T>::constant(Tensor<T> value) {
  Node node;
  node.owned = std::move(value);
  return push(std::move(node));
}

template <Real T>
Var<T> Graph<T>::variable(Tensor<T> value) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = true;
  return push(std::move(node));
}

template <Real T>
Var<T> Graph<T>::parameter(const Tensor<T>& value, Tensor<T>* grad_sink) {
  Node node;
  node.external = &value;
  node.sink = grad_sink;
  node.requires_grad = grad_sink != nullptr;
  return push(std::move(node));
}

template <Real T>
Var<T> Graph<T>::record(Tensor<T> value, std::initializer_list<Var<T>> parents,
                        BackwardFn fn) {
  return record(std::move(value),
                std::span<const Var<T>>(parents.begin(), parents.size()),
                std::move(fn));
}

template <Real T>
Var<T> Graph<T>::record(Tensor<T> value, std::span<const Var<T>> parents,
                        BackwardFn fn) {
  if (consumed_) throw StateError("graph already ran backward");
  Node node;
  node.owned = std::move(value);
  for (const auto& p : parents) {
    if (!p.valid()) continue;
    check_var(p);
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  return push(std::move(node));
}

template <Real T>
const Tensor<T>& Graph<T>::value(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  return n.external ? *n.external : n.owned;
}

template <Real T>
bool Graph<T>::has_grad(std::uint32_t id) const {
  return !nodes_.at(id).grad.empty();
}

template <Real T>
const Tensor<T>& Graph<T>::grad(std::uint32_t id) const {
  const Node& n = nodes_.at(id);
  if (n.grad.empty()) {
    throw StateError("no gradient for node " + std::to_string(id) +
                     " (backward not run or node unreachable)");
  }
  return n.grad;
}

template <Real T>
Tensor<T>& Graph<T>::grad_buffer(std::uint32_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty()) n.grad = Tensor<T>::zeros(value(id).shape());
  return n.grad;
}

template <Real T>
void Graph<T>::backward(Var<T> loss) {
  if (nodes_.empty() || !loss.valid()) {
    throw StateError("backward() called before any forward computation");
  }
  check_var(loss);
  if (consumed_) throw StateError("backward() already ran on this graph");
  if (value(loss.id()).size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     shape_string(value(loss.id()).shape()));
  }
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;

  grad_buffer(loss.id()).fill(T(1));
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty()) continue;
    // record() is closed once consumed_, so nodes_ cannot reallocate here.
    if (n.backward) n.backward(*this, id);
  }
  for (Node& n : nodes_) {
    if (!n.sink || n.grad.empty()) continue;
    Tensor<T>& sink = *n.sink;
    if (sink.empty()) sink = Tensor<T>::zeros(n.grad.shape());
    if (sink.shape() != n.grad.shape()) {
      throw ShapeError("gradient sink " + shape_string(sink.shape()) +
                       " does not match " + shape_string(n.grad.shape()));
    }
    T* dst = sink.raw();
    const T* src = n.grad.raw();
    for (std::size_t i = 0; i < sink.size(); ++i) dst[i] += src[i];
  }
}

template class Var<float>;
template class Var<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace qrnn
