#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

namespace diffanon {

// One value in the computation graph. Gradients accumulate into `grad`,
// which is allocated lazily and zeroed to the value's shape.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.data.empty()) grad = Tensor::zeros(value.shape);
  }
};

using Var = std::shared_ptr<Node>;

Var make_var(Tensor value, bool requires_grad = false);
inline Var make_const(Tensor value) { return make_var(std::move(value), false); }

// Linear record of primitive ops in forward execution order. backward()
// replays the record in reverse, visiting each entry exactly once. A tape
// is single-use: after backward() it must be cleared (re-forward) before
// it can run again.
class GradTape {
 public:
  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void record(std::function<void()> backward_fn) { entries_.push_back(std::move(backward_fn)); }
  std::size_t size() const { return entries_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad leaf.
  // Throws if loss is not scalar or the tape was already consumed.
  void backward(const Var& loss);

  void clear() {
    entries_.clear();
    consumed_ = false;
  }

  // Active tape for the current thread, or nullptr when not recording.
  static GradTape* current();

  // RAII activation; forward passes run under a scope when training.
  class Scope {
   public:
    explicit Scope(GradTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* prev_;
  };

 private:
  std::vector<std::function<void()>> entries_;
  bool consumed_ = false;
};

// ---- primitive ops -------------------------------------------------------
// Every op computes its value eagerly and, when a tape is active and any
// input requires grad, records a backward closure. Supported broadcast is
// deliberately narrow: same shape, scalar, or a per-channel vector [C]
// against a [C,L] tensor.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
// x: [C,L], v: [C] (or [C,1]); v broadcasts across frames.
Var add_channel(const Var& x, const Var& v);

Var matmul(const Var& a, const Var& b);  // [m,k] x [k,n] -> [m,n]
// Same-padded cross-correlation. x: [Cin,L], w: [Cout,Cin,K] with K odd,
// optional bias [Cout]. Output [Cout,L].
Var conv1d(const Var& x, const Var& w, const Var& bias = nullptr);

Var gated(const Var& a, const Var& b);  // tanh(a) * sigmoid(b)
Var silu(const Var& x);                 // x * sigmoid(x)
Var mse_loss(const Var& pred, const Var& target);  // mean((pred-target)^2), scalar
Var sum(const Var& x);                             // scalar
Var reshape(const Var& x, std::vector<int> shape);
Var concat_channels(const Var& a, const Var& b);  // [C1,L]+[C2,L] -> [C1+C2,L]

}  // namespace diffanon
