#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "bof/data.hpp"
#include "bof/ops.hpp"
#include "bof/rng.hpp"
#include "bof/tape.hpp"
#include "json.hpp"

namespace bof::model {

// Owns parameters in registration order; the order defines both the
// checkpoint layout and the RNG draw sequence at initialization.
template <class S>
class ParamSet {
 public:
  Param<S>& add(std::string name, Tensor<S> init) {
    store_.emplace_back(std::move(name), std::move(init));
    order_.push_back(&store_.back());
    return store_.back();
  }

  const std::vector<Param<S>*>& params() const { return order_; }

  Param<S>* find(const std::string& name) const {
    for (Param<S>* p : order_)
      if (p->name == name) return p;
    return nullptr;
  }

  std::size_t count_values() const {
    std::size_t n = 0;
    for (const Param<S>* p : order_) n += p->value.size();
    return n;
  }

 private:
  std::deque<Param<S>> store_;
  std::vector<Param<S>*> order_;
};

// Fan-in-scaled uniform init for dense and convolution weights.
template <class S>
Tensor<S> uniform_init(Rng64& rng, Shape shape, std::size_t fan_in) {
  Tensor<S> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(double(fan_in));
  for (S& v : t.data) v = S(rng.uniform(-bound, bound));
  return t;
}

template <class S>
Tensor<S> gaussian_init(Rng64& rng, Shape shape, double sigma) {
  Tensor<S> t(std::move(shape));
  for (S& v : t.data) v = S(rng.normal(0.0, sigma));
  return t;
}

// Models expose a uniform surface to the training loop and evaluator: a
// normalized log-pressure field node per sample.
template <class S>
struct ModelIface {
  virtual ~ModelIface() = default;
  virtual std::string kind() const = 0;
  virtual nlohmann::json config_json() const = 0;
  virtual const std::vector<Param<S>*>& params() const = 0;
  virtual ops::Var<S> predict(Tape<S>& tape, const data::Sample& sample) = 0;
  virtual std::size_t param_count() const = 0;
};

}  // namespace bof::model
