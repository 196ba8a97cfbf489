#include "core/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace diffanon {

namespace {

thread_local GradTape* g_current_tape = nullptr;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Result node requires grad only while a tape can actually observe it.
inline Var result_of(Tensor value, bool any_input_grad) {
  return make_var(std::move(value), any_input_grad && g_current_tape != nullptr);
}

inline void check_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a->value.shape) + " vs " + shape_str(b->value.shape));
}

// [C] (or [C,1]) against x [C,L].
inline bool channel_vec_compatible(const Tensor& x, const Tensor& v) {
  if (x.rank() != 2) return false;
  if (v.rank() == 1) return v.shape[0] == x.shape[0];
  if (v.rank() == 2) return v.shape[0] == x.shape[0] && v.shape[1] == 1;
  return false;
}

}  // namespace

Var make_var(Tensor value, bool requires_grad) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

GradTape* GradTape::current() { return g_current_tape; }

GradTape::Scope::Scope(GradTape& tape) : prev_(g_current_tape) { g_current_tape = &tape; }
GradTape::Scope::~Scope() { g_current_tape = prev_; }

void GradTape::backward(const Var& loss) {
  if (consumed_)
    throw std::logic_error("GradTape::backward called twice without re-forward");
  if (loss->value.size() != 1)
    throw std::invalid_argument("GradTape::backward: loss must be scalar");
  consumed_ = true;
  loss->ensure_grad();
  loss->grad.data[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
}

Var add(const Var& a, const Var& b) {
  if (channel_vec_compatible(a->value, b->value)) return add_channel(a, b);
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  out += b->value;
  Var r = result_of(std::move(out), a->requires_grad || b->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, b, r] {
      if (a->requires_grad) {
        a->ensure_grad();
        a->grad += r->grad;
      }
      if (b->requires_grad) {
        b->ensure_grad();
        b->grad += r->grad;
      }
    });
  }
  return r;
}

Var sub(const Var& a, const Var& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  out -= b->value;
  Var r = result_of(std::move(out), a->requires_grad || b->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, b, r] {
      if (a->requires_grad) {
        a->ensure_grad();
        a->grad += r->grad;
      }
      if (b->requires_grad) {
        b->ensure_grad();
        b->grad -= r->grad;
      }
    });
  }
  return r;
}

Var mul(const Var& a, const Var& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
  Var r = result_of(std::move(out), a->requires_grad || b->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, b, r] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->grad.data.size(); ++i)
          a->grad.data[i] += r->grad.data[i] * b->value.data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (std::size_t i = 0; i < b->grad.data.size(); ++i)
          b->grad.data[i] += r->grad.data[i] * a->value.data[i];
      }
    });
  }
  return r;
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a->value;
  for (double& v : out.data) v += s;
  Var r = result_of(std::move(out), a->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, r] {
      a->ensure_grad();
      a->grad += r->grad;
    });
  }
  return r;
}

Var mul_scalar(const Var& a, double s) {
  Tensor out = a->value;
  out *= s;
  Var r = result_of(std::move(out), a->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, r, s] {
      a->ensure_grad();
      for (std::size_t i = 0; i < a->grad.data.size(); ++i)
        a->grad.data[i] += r->grad.data[i] * s;
    });
  }
  return r;
}

Var add_channel(const Var& x, const Var& v) {
  if (!channel_vec_compatible(x->value, v->value))
    throw std::invalid_argument("add_channel: expected x [C,L] and v [C], got " +
                                shape_str(x->value.shape) + " and " + shape_str(v->value.shape));
  const int C = x->value.rows(), L = x->value.cols();
  Tensor out = x->value;
  for (int c = 0; c < C; ++c) {
    const double b = v->value.data[c];
    double* row = out.data.data() + static_cast<std::size_t>(c) * L;
    for (int l = 0; l < L; ++l) row[l] += b;
  }
  Var r = result_of(std::move(out), x->requires_grad || v->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([x, v, r, C, L] {
      if (x->requires_grad) {
        x->ensure_grad();
        x->grad += r->grad;
      }
      if (v->requires_grad) {
        v->ensure_grad();
        for (int c = 0; c < C; ++c) {
          const double* g = r->grad.data.data() + static_cast<std::size_t>(c) * L;
          double s = 0.0;
          for (int l = 0; l < L; ++l) s += g[l];
          v->grad.data[c] += s;
        }
      }
    });
  }
  return r;
}

Var matmul(const Var& a, const Var& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.rows())
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a->value.shape) +
                                " x " + shape_str(b->value.shape));
  const int m = a->value.rows(), k = a->value.cols(), n = b->value.cols();
  Tensor out = Tensor::zeros({m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = a->value(i, p);
      const double* brow = b->value.data.data() + static_cast<std::size_t>(p) * n;
      double* orow = out.data.data() + static_cast<std::size_t>(i) * n;
      for (int j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  Var r = result_of(std::move(out), a->requires_grad || b->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, b, r, m, k, n] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            const double* grow = r->grad.data.data() + static_cast<std::size_t>(i) * n;
            const double* brow = b->value.data.data() + static_cast<std::size_t>(p) * n;
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += grow[j] * brow[j];
            a->grad(i, p) += s;
          }
      }
      if (b->requires_grad) {
        b->ensure_grad();
        for (int p = 0; p < k; ++p)
          for (int i = 0; i < m; ++i) {
            const double av = a->value(i, p);
            const double* grow = r->grad.data.data() + static_cast<std::size_t>(i) * n;
            double* brow = b->grad.data.data() + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
      }
    });
  }
  return r;
}

Var conv1d(const Var& x, const Var& w, const Var& bias) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.rank() != 2 || wv.rank() != 3)
    throw std::invalid_argument("conv1d: expected x [Cin,L], w [Cout,Cin,K]");
  const int Ci = xv.shape[0], L = xv.shape[1];
  const int Co = wv.shape[0], K = wv.shape[2];
  if (wv.shape[1] != Ci)
    throw std::invalid_argument("conv1d: channel mismatch, x has " + std::to_string(Ci) +
                                ", w expects " + std::to_string(wv.shape[1]));
  if (K % 2 == 0) throw std::invalid_argument("conv1d: kernel size must be odd");
  if (bias && (bias->value.rank() != 1 || bias->value.shape[0] != Co))
    throw std::invalid_argument("conv1d: bias must be [Cout]");
  const int pad = K / 2;

  Tensor out = Tensor::zeros({Co, L});
  for (int o = 0; o < Co; ++o) {
    double* yo = out.data.data() + static_cast<std::size_t>(o) * L;
    if (bias) {
      const double b = bias->value.data[o];
      for (int l = 0; l < L; ++l) yo[l] = b;
    }
    for (int i = 0; i < Ci; ++i) {
      const double* xi = xv.data.data() + static_cast<std::size_t>(i) * L;
      const double* wo = wv.data.data() + (static_cast<std::size_t>(o) * Ci + i) * K;
      for (int k = 0; k < K; ++k) {
        const double wk = wo[k];
        const int shift = k - pad;  // x index = l + shift
        const int l0 = shift < 0 ? -shift : 0;
        const int l1 = shift > 0 ? L - shift : L;
        const double* xs = xi + shift;
        for (int l = l0; l < l1; ++l) yo[l] += wk * xs[l];
      }
    }
  }

  const bool rg = x->requires_grad || w->requires_grad || (bias && bias->requires_grad);
  Var r = result_of(std::move(out), rg);
  if (r->requires_grad) {
    GradTape::current()->record([x, w, bias, r, Ci, Co, L, K, pad] {
      const Tensor& g = r->grad;
      if (x->requires_grad) {
        x->ensure_grad();
        for (int i = 0; i < Ci; ++i) {
          double* dxi = x->grad.data.data() + static_cast<std::size_t>(i) * L;
          for (int o = 0; o < Co; ++o) {
            const double* go = g.data.data() + static_cast<std::size_t>(o) * L;
            const double* wo = w->value.data.data() + (static_cast<std::size_t>(o) * Ci + i) * K;
            for (int k = 0; k < K; ++k) {
              // dx[l+shift] += w[k] * g[l]  =>  dx[m] += w[k] * g[m-shift]
              const double wk = wo[k];
              const int shift = k - pad;
              const int l0 = shift < 0 ? -shift : 0;
              const int l1 = shift > 0 ? L - shift : L;
              double* dxs = dxi + shift;
              for (int l = l0; l < l1; ++l) dxs[l] += wk * go[l];
            }
          }
        }
      }
      if (w->requires_grad) {
        w->ensure_grad();
        for (int o = 0; o < Co; ++o) {
          const double* go = g.data.data() + static_cast<std::size_t>(o) * L;
          for (int i = 0; i < Ci; ++i) {
            const double* xi = x->value.data.data() + static_cast<std::size_t>(i) * L;
            double* dwo = w->grad.data.data() + (static_cast<std::size_t>(o) * Ci + i) * K;
            for (int k = 0; k < K; ++k) {
              const int shift = k - pad;
              const int l0 = shift < 0 ? -shift : 0;
              const int l1 = shift > 0 ? L - shift : L;
              const double* xs = xi + shift;
              double s = 0.0;
              for (int l = l0; l < l1; ++l) s += go[l] * xs[l];
              dwo[k] += s;
            }
          }
        }
      }
      if (bias && bias->requires_grad) {
        bias->ensure_grad();
        for (int o = 0; o < Co; ++o) {
          const double* go = g.data.data() + static_cast<std::size_t>(o) * L;
          double s = 0.0;
          for (int l = 0; l < L; ++l) s += go[l];
          bias->grad.data[o] += s;
        }
      }
    });
  }
  return r;
}

Var gated(const Var& a, const Var& b) {
  check_same_shape(a, b, "gated");
  Tensor out = Tensor::zeros(a->value.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = std::tanh(a->value.data[i]) * sigmoid(b->value.data[i]);
  Var r = result_of(std::move(out), a->requires_grad || b->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, b, r] {
      for (std::size_t i = 0; i < r->grad.data.size(); ++i) {
        const double t = std::tanh(a->value.data[i]);
        const double s = sigmoid(b->value.data[i]);
        const double g = r->grad.data[i];
        if (a->requires_grad) {
          a->ensure_grad();
          a->grad.data[i] += g * (1.0 - t * t) * s;
        }
        if (b->requires_grad) {
          b->ensure_grad();
          b->grad.data[i] += g * t * s * (1.0 - s);
        }
      }
    });
  }
  return r;
}

Var silu(const Var& x) {
  Tensor out = Tensor::zeros(x->value.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double v = x->value.data[i];
    out.data[i] = v * sigmoid(v);
  }
  Var r = result_of(std::move(out), x->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([x, r] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->grad.data.size(); ++i) {
        const double v = x->value.data[i];
        const double s = sigmoid(v);
        x->grad.data[i] += r->grad.data[i] * (s + v * s * (1.0 - s));
      }
    });
  }
  return r;
}

Var mse_loss(const Var& pred, const Var& target) {
  check_same_shape(pred, target, "mse_loss");
  const double n = static_cast<double>(pred->value.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < pred->value.data.size(); ++i) {
    const double d = pred->value.data[i] - target->value.data[i];
    acc += d * d;
  }
  Var r = result_of(Tensor::scalar(acc / n), pred->requires_grad || target->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([pred, target, r, n] {
      const double g = r->grad.data[0] * 2.0 / n;
      for (std::size_t i = 0; i < pred->value.data.size(); ++i) {
        const double d = pred->value.data[i] - target->value.data[i];
        if (pred->requires_grad) {
          pred->ensure_grad();
          pred->grad.data[i] += g * d;
        }
        if (target->requires_grad) {
          target->ensure_grad();
          target->grad.data[i] -= g * d;
        }
      }
    });
  }
  return r;
}

Var sum(const Var& x) {
  double acc = 0.0;
  for (double v : x->value.data) acc += v;
  Var r = result_of(Tensor::scalar(acc), x->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([x, r] {
      x->ensure_grad();
      const double g = r->grad.data[0];
      for (double& d : x->grad.data) d += g;
    });
  }
  return r;
}

Var reshape(const Var& x, std::vector<int> shape) {
  if (shape_size(shape) != x->value.size())
    throw std::invalid_argument("reshape: size mismatch " + shape_str(x->value.shape) + " -> " +
                                shape_str(shape));
  Tensor out(shape, x->value.data);
  Var r = result_of(std::move(out), x->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([x, r] {
      x->ensure_grad();
      for (std::size_t i = 0; i < x->grad.data.size(); ++i) x->grad.data[i] += r->grad.data[i];
    });
  }
  return r;
}

Var concat_channels(const Var& a, const Var& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.cols())
    throw std::invalid_argument("concat_channels: expected [C1,L] and [C2,L] with equal L");
  const int C1 = a->value.rows(), C2 = b->value.rows(), L = a->value.cols();
  Tensor out = Tensor::zeros({C1 + C2, L});
  std::copy(a->value.data.begin(), a->value.data.end(), out.data.begin());
  std::copy(b->value.data.begin(), b->value.data.end(),
            out.data.begin() + static_cast<std::ptrdiff_t>(C1) * L);
  Var r = result_of(std::move(out), a->requires_grad || b->requires_grad);
  if (r->requires_grad) {
    GradTape::current()->record([a, b, r, C1, C2, L] {
      if (a->requires_grad) {
        a->ensure_grad();
        for (std::size_t i = 0; i < static_cast<std::size_t>(C1) * L; ++i)
          a->grad.data[i] += r->grad.data[i];
      }
      if (b->requires_grad) {
        b->ensure_grad();
        const std::size_t off = static_cast<std::size_t>(C1) * L;
        for (std::size_t i = 0; i < static_cast<std::size_t>(C2) * L; ++i)
          b->grad.data[i] += r->grad.data[off + i];
      }
    });
  }
  return r;
}

}  // namespace diffanon
