#ifndef GLOM_AUTODIFF_HPP
#define GLOM_AUTODIFF_HPP

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "glom/error.hpp"
#include "glom/ops.hpp"
#include "glom/tensor.hpp"

namespace glom {

struct NodeRef {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. Operations append nodes in execution order, so the node
// list is already topologically sorted; backward() walks it once in reverse.
// Inputs must precede their consumers (enforced), which also rules out cycles.
class Graph {
 public:
  struct Node {
    const char* op;
    std::vector<int> inputs;
    // Accumulates into the input gradients given this node's gradient.
    std::function<void(Graph&, int)> backward_fn;
    bool requires_grad = false;
  };

  NodeRef leaf(Tensor value, bool requires_grad) {
    return push("leaf", std::move(value), {}, nullptr, requires_grad);
  }

  NodeRef constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(NodeRef r) const { return values_[check(r)]; }

  bool has_grad(NodeRef r) const { return grad_set_[check(r)] != 0; }

  // Gradient of the last backward() target w.r.t. this node. Zero tensor if
  // the target does not depend on it.
  const Tensor& grad(NodeRef r) {
    const std::size_t i = check(r);
    if (!grad_set_[i]) {
      grads_[i] = Tensor(values_[i].shape());
      grad_set_[i] = 1;
    }
    return grads_[i];
  }

  // Seeds d(output)/d(output) = 1 and sweeps the tape once, in reverse
  // recording order. Fan-out accumulates additively.
  void backward(NodeRef output) {
    const std::size_t out = check(output);
    if (values_[out].size() != 1)
      throw GraphError("backward: output must be scalar, got shape " +
                       values_[out].shape_str());
    grad_buffer(static_cast<int>(out))[0] = 1.0;
    for (int id = static_cast<int>(out); id >= 0; --id) {
      const Node& node = nodes_[static_cast<std::size_t>(id)];
      if (!node.backward_fn || !node.requires_grad) continue;
      if (!grad_set_[static_cast<std::size_t>(id)]) continue;
      node.backward_fn(*this, id);
    }
  }

  void clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    grad_set_.clear();
  }

  std::size_t node_count() const { return nodes_.size(); }

  // --- used by the op wrappers ---

  NodeRef push(const char* op, Tensor value, std::vector<int> inputs,
               std::function<void(Graph&, int)> backward_fn,
               bool leaf_requires_grad = false) {
    const int id = static_cast<int>(nodes_.size());
    bool req = leaf_requires_grad;
    for (int in : inputs) {
      if (in < 0 || in >= id)
        throw GraphError("graph: node input out of order (cycle or dangling ref)");
      req = req || nodes_[static_cast<std::size_t>(in)].requires_grad;
    }
    nodes_.push_back(Node{op, std::move(inputs), std::move(backward_fn), req});
    values_.push_back(std::move(value));
    grads_.emplace_back();
    grad_set_.push_back(0);
    return NodeRef{id};
  }

  Tensor& grad_buffer(int id) {
    const auto i = static_cast<std::size_t>(id);
    if (!grad_set_[i]) {
      grads_[i] = Tensor(values_[i].shape());
      grad_set_[i] = 1;
    }
    return grads_[i];
  }

  bool needs_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }

  const Tensor& value_at(int id) const {
    return values_[static_cast<std::size_t>(id)];
  }

 private:
  std::size_t check(NodeRef r) const {
    if (!r.valid() || r.id >= static_cast<int>(nodes_.size()))
      throw GraphError("graph: invalid node reference");
    return static_cast<std::size_t>(r.id);
  }

  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::vector<char> grad_set_;
};

namespace autodiff {

namespace detail {
inline void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}
}  // namespace detail

inline NodeRef conv2d(Graph& g, NodeRef x, NodeRef w, int stride, int pad) {
  Tensor y = ops::conv2d(g.value(x), g.value(w), stride, pad);
  return g.push("conv2d", std::move(y), {x.id, w.id},
                [xi = x.id, wi = w.id, stride, pad](Graph& g, int self) {
                  auto grads = ops::conv2d_backward(
                      g.value_at(xi), g.value_at(wi), stride, pad,
                      g.grad_buffer(self));
                  if (g.needs_grad(xi))
                    detail::accumulate(g.grad_buffer(xi), grads.dx);
                  if (g.needs_grad(wi))
                    detail::accumulate(g.grad_buffer(wi), grads.dw);
                });
}

inline NodeRef maxpool2d(Graph& g, NodeRef x, int window, int stride) {
  auto r = ops::maxpool2d(g.value(x), window, stride);
  return g.push("maxpool2d", std::move(r.y), {x.id},
                [xi = x.id, argmax = std::move(r.argmax)](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  Tensor dx = ops::maxpool2d_backward(
                      g.value_at(xi).shape(), argmax, g.grad_buffer(self));
                  detail::accumulate(g.grad_buffer(xi), dx);
                });
}

inline NodeRef batchnorm(Graph& g, NodeRef x, NodeRef scale, NodeRef shift,
                         ops::BatchNormState& state, ops::Mode mode,
                         double momentum = 0.99, double eps = 1e-5) {
  auto r = ops::batchnorm(g.value(x), g.value(scale), g.value(shift), state,
                          mode, momentum, eps);
  return g.push(
      "batchnorm", std::move(r.y), {x.id, scale.id, shift.id},
      [xi = x.id, si = scale.id, bi = shift.id, mean = std::move(r.mean),
       invstd = std::move(r.invstd), mode](Graph& g, int self) {
        auto grads =
            mode == ops::Mode::train
                ? ops::batchnorm_backward(g.value_at(xi), g.value_at(si), mean,
                                          invstd, g.grad_buffer(self))
                : ops::batchnorm_backward_eval(g.value_at(xi), g.value_at(si),
                                               mean, invstd,
                                               g.grad_buffer(self));
        if (g.needs_grad(xi)) detail::accumulate(g.grad_buffer(xi), grads.dx);
        if (g.needs_grad(si)) detail::accumulate(g.grad_buffer(si), grads.dscale);
        if (g.needs_grad(bi)) detail::accumulate(g.grad_buffer(bi), grads.dshift);
      });
}

inline NodeRef relu(Graph& g, NodeRef x) {
  return g.push("relu", ops::relu(g.value(x)), {x.id},
                [xi = x.id](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  detail::accumulate(
                      g.grad_buffer(xi),
                      ops::relu_backward(g.value_at(xi), g.grad_buffer(self)));
                });
}

inline NodeRef sigmoid(Graph& g, NodeRef x) {
  return g.push("sigmoid", ops::sigmoid(g.value(x)), {x.id},
                [xi = x.id](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  detail::accumulate(g.grad_buffer(xi),
                                     ops::sigmoid_backward(
                                         g.value_at(self), g.grad_buffer(self)));
                });
}

inline NodeRef dense(Graph& g, NodeRef x, NodeRef w, NodeRef b) {
  Tensor y = ops::dense(g.value(x), g.value(w), g.value(b));
  return g.push("dense", std::move(y), {x.id, w.id, b.id},
                [xi = x.id, wi = w.id, bi = b.id](Graph& g, int self) {
                  auto grads = ops::dense_backward(
                      g.value_at(xi), g.value_at(wi), g.grad_buffer(self));
                  if (g.needs_grad(xi))
                    detail::accumulate(g.grad_buffer(xi), grads.dx);
                  if (g.needs_grad(wi))
                    detail::accumulate(g.grad_buffer(wi), grads.dw);
                  if (g.needs_grad(bi))
                    detail::accumulate(g.grad_buffer(bi), grads.db);
                });
}

inline NodeRef dropout(Graph& g, NodeRef x, double p, ops::Mode mode,
                       std::uint64_t seed) {
  auto r = ops::dropout(g.value(x), p, mode, seed);
  return g.push("dropout", std::move(r.y), {x.id},
                [xi = x.id, keep = std::move(r.keep), p](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  detail::accumulate(
                      g.grad_buffer(xi),
                      ops::dropout_backward(g.value_at(xi).shape(), keep, p,
                                            g.grad_buffer(self)));
                });
}

inline NodeRef softmax(Graph& g, NodeRef x) {
  return g.push("softmax", ops::softmax(g.value(x)), {x.id},
                [xi = x.id](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  detail::accumulate(g.grad_buffer(xi),
                                     ops::softmax_backward(
                                         g.value_at(self), g.grad_buffer(self)));
                });
}

inline NodeRef cross_entropy(Graph& g, NodeRef probs, std::vector<int> labels,
                             long* clamp_events = nullptr) {
  const double loss = ops::cross_entropy(g.value(probs), labels, clamp_events);
  return g.push("cross_entropy", Tensor::scalar(loss), {probs.id},
                [pi = probs.id, labels = std::move(labels)](Graph& g, int self) {
                  if (!g.needs_grad(pi)) return;
                  Tensor dp = ops::cross_entropy_backward(g.value_at(pi), labels);
                  const double upstream = g.grad_buffer(self)[0];
                  for (std::size_t i = 0; i < dp.size(); ++i) dp[i] *= upstream;
                  detail::accumulate(g.grad_buffer(pi), dp);
                });
}

inline NodeRef global_avg_pool(Graph& g, NodeRef x) {
  return g.push("global_avg_pool", ops::global_avg_pool(g.value(x)), {x.id},
                [xi = x.id](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  detail::accumulate(g.grad_buffer(xi),
                                     ops::global_avg_pool_backward(
                                         g.value_at(xi).shape(),
                                         g.grad_buffer(self)));
                });
}

inline NodeRef two_class_probs(Graph& g, NodeRef s) {
  return g.push("two_class_probs", ops::two_class_probs(g.value(s)), {s.id},
                [si = s.id](Graph& g, int self) {
                  if (!g.needs_grad(si)) return;
                  detail::accumulate(
                      g.grad_buffer(si),
                      ops::two_class_probs_backward(g.grad_buffer(self)));
                });
}

// Elementwise helpers; enough to express losses and penalties on the tape.

inline NodeRef add(Graph& g, NodeRef a, NodeRef b) {
  const Tensor& ta = g.value(a);
  const Tensor& tb = g.value(b);
  if (!ta.same_shape(tb))
    throw DimensionError("add: shapes " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor y(ta.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = ta[i] + tb[i];
  return g.push("add", std::move(y), {a.id, b.id},
                [ai = a.id, bi = b.id](Graph& g, int self) {
                  const Tensor& dy = g.grad_buffer(self);
                  if (g.needs_grad(ai)) detail::accumulate(g.grad_buffer(ai), dy);
                  if (g.needs_grad(bi)) detail::accumulate(g.grad_buffer(bi), dy);
                });
}

inline NodeRef scale(Graph& g, NodeRef x, double factor) {
  Tensor y = g.value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= factor;
  return g.push("scale", std::move(y), {x.id},
                [xi = x.id, factor](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  const Tensor& dy = g.grad_buffer(self);
                  Tensor dx(dy.shape());
                  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = dy[i] * factor;
                  detail::accumulate(g.grad_buffer(xi), dx);
                });
}

inline NodeRef square(Graph& g, NodeRef x) {
  Tensor y = g.value(x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= y[i];
  return g.push("square", std::move(y), {x.id},
                [xi = x.id](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  const Tensor& dy = g.grad_buffer(self);
                  const Tensor& x = g.value_at(xi);
                  Tensor dx(dy.shape());
                  for (std::size_t i = 0; i < dx.size(); ++i)
                    dx[i] = 2.0 * x[i] * dy[i];
                  detail::accumulate(g.grad_buffer(xi), dx);
                });
}

inline NodeRef sum(Graph& g, NodeRef x) {
  double total = 0.0;
  for (double v : g.value(x).values()) total += v;
  return g.push("sum", Tensor::scalar(total), {x.id},
                [xi = x.id](Graph& g, int self) {
                  if (!g.needs_grad(xi)) return;
                  const double upstream = g.grad_buffer(self)[0];
                  Tensor& dx = g.grad_buffer(xi);
                  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += upstream;
                });
}

}  // namespace autodiff
}  // namespace glom

#endif  // GLOM_AUTODIFF_HPP
