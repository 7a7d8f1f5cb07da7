#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bof/tensor.hpp"

namespace bof {

template <class S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;

  Param() = default;
  Param(std::string n, Tensor<S> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<S>::zeros(value.shape)) {}

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), S(0)); }
};

template <class S>
class Tape;

// One recorded value in a forward computation. Gradients are allocated
// lazily during the backward sweep.
template <class S>
struct Node {
  Tensor<S> value;
  Tensor<S> grad;
  bool needs_grad = false;
  bool has_grad = false;
  Param<S>* param = nullptr;
  std::function<void()> backward;

  Tensor<S>& ensure_grad() {
    if (!has_grad) {
      grad = Tensor<S>::zeros(value.shape);
      has_grad = true;
    }
    return grad;
  }
};

// Records a single forward computation; replays it in reverse for gradients.
// Not shareable across threads; one tape per forward pass.
template <class S>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  void set_recording(bool r) { recording_ = r; }

  Node<S>* constant(Tensor<S> v) {
    nodes_.emplace_back();
    Node<S>& n = nodes_.back();
    n.value = std::move(v);
    return &n;
  }

  Node<S>* leaf(Param<S>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return it->second;
    nodes_.emplace_back();
    Node<S>& n = nodes_.back();
    n.value = p.value;
    n.needs_grad = recording_;
    n.param = &p;
    param_nodes_.emplace(&p, &n);
    param_order_.push_back(&n);
    return &n;
  }

  Node<S>* make(Tensor<S> v, bool needs_grad) {
    nodes_.emplace_back();
    Node<S>& n = nodes_.back();
    n.value = std::move(v);
    n.needs_grad = needs_grad && recording_;
    return &n;
  }

  // Reverse sweep from a scalar loss. Populates Param::grad (additively) for
  // every parameter reachable from the loss; unreachable parameters are
  // untouched. A second call without a fresh forward is a contract violation.
  void backward(Node<S>* loss) {
    std::vector<std::pair<Param<S>*, Tensor<S>>> sink;
    backward_collect(loss, &sink, /*into_params=*/true);
  }

  // Same sweep, but gradients are handed to the caller instead of being
  // written into the Params. Used for deterministic cross-thread reduction.
  std::vector<std::pair<Param<S>*, Tensor<S>>> backward_collect(Node<S>* loss) {
    std::vector<std::pair<Param<S>*, Tensor<S>>> sink;
    backward_collect(loss, &sink, /*into_params=*/false);
    return sink;
  }

 private:
  void backward_collect(Node<S>* loss, std::vector<std::pair<Param<S>*, Tensor<S>>>* sink,
                        bool into_params) {
    if (consumed_)
      throw std::logic_error("backprop: tape already consumed; re-run the forward pass");
    consumed_ = true;
    if (loss == nullptr || loss->value.size() != 1)
      throw std::invalid_argument("backprop: loss must be a scalar");
    loss->ensure_grad().data[0] = S(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node<S>& n = *it;
      if (n.has_grad && n.backward) n.backward();
      n.backward = nullptr;
    }
    for (Node<S>* pn : param_order_) {
      if (!pn->has_grad) continue;
      if (into_params) {
        Tensor<S>& g = pn->param->grad;
        for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += pn->grad.data[i];
      } else {
        sink->emplace_back(pn->param, std::move(pn->grad));
      }
    }
  }

  std::deque<Node<S>> nodes_;
  std::unordered_map<Param<S>*, Node<S>*> param_nodes_;
  std::vector<Node<S>*> param_order_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace bof
