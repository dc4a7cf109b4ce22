#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace codecsep::ad {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Plain value container, no graph attached. Rank 0 is not used; scalars are
// shape {1}. Conv weights are rank 3, activations rank <= 2.
template <typename S>
struct TensorT {
  Shape shape;
  std::vector<S> data;

  TensorT() = default;
  TensorT(Shape sh, std::vector<S> d) : shape(std::move(sh)), data(std::move(d)) {
    if (numel(shape) != static_cast<int64_t>(data.size()))
      throw std::invalid_argument("tensor data length does not match shape");
  }
  static TensorT zeros(Shape sh) {
    TensorT t;
    t.data.assign(static_cast<size_t>(numel(sh)), S(0));
    t.shape = std::move(sh);
    return t;
  }
  int64_t size() const { return static_cast<int64_t>(data.size()); }
};

using Tensor = TensorT<float>;

// Reverse-mode tape. Each op records a backward closure; backward() walks
// the nodes in exact reverse execution order, summing contributions for
// tensors used more than once. A tape is single-threaded and is rebuilt per
// forward pass.
template <typename S>
class TapeT {
 public:
  using Id = int32_t;

  struct Node {
    Shape shape;
    std::vector<S> val;
    std::vector<S> grad;  // allocated only when requires_grad
    bool requires_grad = false;
    const char* op = "leaf";
    std::function<void(TapeT&)> back;  // empty for leaves/constants
  };

  // ---- construction ------------------------------------------------------

  Id leaf(Shape shape, std::vector<S> values, bool requires_grad) {
    if (numel(shape) != static_cast<int64_t>(values.size()))
      throw std::invalid_argument("leaf: data length does not match shape");
    check_values(values, "leaf");
    return push(std::move(shape), std::move(values), requires_grad, "leaf", {});
  }

  Id leaf(const TensorT<S>& t, bool requires_grad) {
    return leaf(t.shape, t.data, requires_grad);
  }

  Id constant(Shape shape, std::vector<S> values) {
    return leaf(std::move(shape), std::move(values), false);
  }

  Id scalar(S v) { return constant({1}, {v}); }

  // ---- access ------------------------------------------------------------

  const Node& node(Id id) const { return nodes_.at(static_cast<size_t>(id)); }
  const Shape& shape(Id id) const { return node(id).shape; }
  std::span<const S> val(Id id) const { return node(id).val; }
  std::span<const S> grad(Id id) const {
    const Node& n = node(id);
    if (!n.requires_grad) throw std::runtime_error("grad: node does not require grad");
    return n.grad;
  }
  S scalar_val(Id id) const {
    const Node& n = node(id);
    if (n.val.size() != 1) throw std::runtime_error("scalar_val: node is not scalar");
    return n.val[0];
  }
  size_t num_nodes() const { return nodes_.size(); }
  bool backward_ran() const { return backward_ran_; }

  // First node (in execution order) holding a non-finite value, or -1.
  // Used for NaN diagnostics in training loops.
  Id first_non_finite() const {
    for (size_t i = 0; i < nodes_.size(); ++i)
      for (S v : nodes_[i].val)
        if (!std::isfinite(static_cast<double>(v))) return static_cast<Id>(i);
    return -1;
  }

  // ---- elementwise -------------------------------------------------------

  Id add(Id a, Id b) {
    require_same_shape(a, b, "add");
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] + va(b)[i];
    return unary_binary(shape(a), std::move(out), {a, b}, "add", [a, b](TapeT& t) {
      t.accumulate(a, t.top_grad());
      t.accumulate(b, t.top_grad());
    });
  }

  Id sub(Id a, Id b) {
    require_same_shape(a, b, "sub");
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] - va(b)[i];
    return unary_binary(shape(a), std::move(out), {a, b}, "sub", [a, b](TapeT& t) {
      t.accumulate(a, t.top_grad());
      t.accumulate_scaled(b, t.top_grad(), S(-1));
    });
  }

  Id mul(Id a, Id b) {
    require_same_shape(a, b, "mul");
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] * va(b)[i];
    return unary_binary(shape(a), std::move(out), {a, b}, "mul", [a, b](TapeT& t) {
      if (t.wants_grad(a)) t.accumulate_product(a, t.top_grad(), t.va(b));
      if (t.wants_grad(b)) t.accumulate_product(b, t.top_grad(), t.va(a));
    });
  }

  Id div(Id a, Id b) {
    require_same_shape(a, b, "div");
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] / va(b)[i];
    return unary_binary(shape(a), std::move(out), {a, b}, "div", [a, b](TapeT& t) {
      Id self = t.current_;
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(a)) {
        std::vector<S>& ga = t.mutable_grad(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / t.va(b)[i];
      }
      if (t.wants_grad(b)) {
        std::vector<S>& gb = t.mutable_grad(b);
        for (size_t i = 0; i < g.size(); ++i)
          gb[i] -= g[i] * t.va(self)[i] / t.va(b)[i];
      }
    });
  }

  Id scale(Id a, S c) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] * c;
    return unary_binary(shape(a), std::move(out), {a}, "scale", [a, c](TapeT& t) {
      t.accumulate_scaled(a, t.top_grad(), c);
    });
  }

  Id add_scalar(Id a, S c) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] + c;
    return unary_binary(shape(a), std::move(out), {a}, "add_scalar", [a](TapeT& t) {
      t.accumulate(a, t.top_grad());
    });
  }

  // Tensor times scalar node (e.g. projection by a computed gain).
  Id scale_by(Id a, Id s) {
    if (va(s).size() != 1) throw std::invalid_argument("scale_by: scale must be scalar");
    const S c = va(s)[0];
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] * c;
    return unary_binary(shape(a), std::move(out), {a, s}, "scale_by", [a, s, c](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(a)) t.accumulate_scaled(a, g, c);
      if (t.wants_grad(s)) {
        S acc = 0;
        for (size_t i = 0; i < g.size(); ++i) acc += g[i] * t.va(a)[i];
        t.mutable_grad(s)[0] += acc;
      }
    });
  }

  // x - mean(x) over all elements.
  Id sub_mean(Id a) {
    const auto& x = va(a);
    S m = 0;
    for (S v : x) m += v;
    m /= static_cast<S>(x.size());
    std::vector<S> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x[i] - m;
    return unary_binary(shape(a), std::move(out), {a}, "sub_mean", [a](TapeT& t) {
      std::span<const S> g = t.top_grad();
      S gm = 0;
      for (S v : g) gm += v;
      gm /= static_cast<S>(g.size());
      std::vector<S>& ga = t.mutable_grad(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] - gm;
    });
  }

  Id sum(Id a) {
    S acc = 0;
    for (S v : va(a)) acc += v;
    return unary_binary({1}, {acc}, {a}, "sum", [a](TapeT& t) {
      const S g = t.top_grad()[0];
      std::vector<S>& ga = t.mutable_grad(a);
      for (S& v : ga) v += g;
    });
  }

  Id mean(Id a) {
    const S n = static_cast<S>(va(a).size());
    S acc = 0;
    for (S v : va(a)) acc += v;
    return unary_binary({1}, {acc / n}, {a}, "mean", [a, n](TapeT& t) {
      const S g = t.top_grad()[0] / n;
      std::vector<S>& ga = t.mutable_grad(a);
      for (S& v : ga) v += g;
    });
  }

  Id square(Id a) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] * va(a)[i];
    return unary_binary(shape(a), std::move(out), {a}, "square", [a](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += S(2) * t.va(a)[i] * g[i];
    });
  }

  Id log10(Id a) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log10(va(a)[i]);
    return unary_binary(shape(a), std::move(out), {a}, "log10", [a](TapeT& t) {
      constexpr double kLn10 = 2.302585092994045684;
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / (t.va(a)[i] * S(kLn10));
    });
  }

  Id sin(Id a) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::sin(va(a)[i]);
    return unary_binary(shape(a), std::move(out), {a}, "sin", [a](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (size_t i = 0; i < g.size(); ++i) ga[i] += std::cos(t.va(a)[i]) * g[i];
    });
  }

  // snake(x) = x + sin^2(x); d/dx = 1 + sin(2x).
  Id snake(Id a) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) {
      const S s = std::sin(va(a)[i]);
      out[i] = va(a)[i] + s * s;
    }
    return unary_binary(shape(a), std::move(out), {a}, "snake", [a](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (size_t i = 0; i < g.size(); ++i)
        ga[i] += (S(1) + std::sin(S(2) * t.va(a)[i])) * g[i];
    });
  }

  Id relu(Id a) {
    std::vector<S> out(va(a).size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = va(a)[i] > S(0) ? va(a)[i] : S(0);
    return unary_binary(shape(a), std::move(out), {a}, "relu", [a](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (size_t i = 0; i < g.size(); ++i)
        if (t.va(a)[i] > S(0)) ga[i] += g[i];
    });
  }

  // ---- structure ---------------------------------------------------------

  // Forward takes the value of `value_from`; backward routes the gradient to
  // `grad_to` unchanged (straight-through estimator).
  Id passthrough_grad(Id grad_to, Id value_from) {
    require_same_shape(grad_to, value_from, "passthrough_grad");
    std::vector<S> out(va(value_from).begin(), va(value_from).end());
    return unary_binary(shape(value_from), std::move(out), {grad_to}, "passthrough_grad",
                        [grad_to](TapeT& t) { t.accumulate(grad_to, t.top_grad()); });
  }

  // Constant copy; gradients stop here.
  Id detach(Id a) {
    return constant(shape(a), std::vector<S>(va(a).begin(), va(a).end()));
  }

  Id transpose(Id a) {
    const Shape& sh = shape(a);
    require_rank(a, 2, "transpose");
    const int64_t m = sh[0], n = sh[1];
    std::vector<S> out(static_cast<size_t>(m * n));
    for (int64_t i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j) out[j * m + i] = va(a)[i * n + j];
    return unary_binary({n, m}, std::move(out), {a}, "transpose", [a, m, n](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (int64_t j = 0; j < n; ++j)
        for (int64_t i = 0; i < m; ++i) ga[i * n + j] += g[j * m + i];
    });
  }

  // Concatenate 2-D tensors along an axis (0 = rows, 1 = cols).
  Id concat(int axis, const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    for (Id p : parts) require_rank(p, 2, "concat");
    const Shape& first = shape(parts[0]);
    int64_t rows = first[0], cols = first[1];
    int64_t total = 0;
    for (Id p : parts) {
      const Shape& sh = shape(p);
      if (axis == 0 && sh[1] != cols) throw std::invalid_argument("concat: column mismatch");
      if (axis == 1 && sh[0] != rows) throw std::invalid_argument("concat: row mismatch");
      total += sh[axis];
    }
    Shape out_shape = axis == 0 ? Shape{total, cols} : Shape{rows, total};
    std::vector<S> out(static_cast<size_t>(numel(out_shape)));
    if (axis == 0) {
      size_t off = 0;
      for (Id p : parts) {
        std::span<const S> v = va(p);
        std::copy(v.begin(), v.end(), out.begin() + static_cast<std::ptrdiff_t>(off));
        off += v.size();
      }
    } else {
      int64_t col_off = 0;
      for (Id p : parts) {
        const int64_t pc = shape(p)[1];
        std::span<const S> v = va(p);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < pc; ++c) out[r * total + col_off + c] = v[r * pc + c];
        col_off += pc;
      }
    }
    std::vector<Id> ins = parts;
    return unary_binary(std::move(out_shape), std::move(out), parts, "concat",
                        [ins, axis, rows, total](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (axis == 0) {
        size_t off = 0;
        for (Id p : ins) {
          const size_t n = t.va(p).size();
          if (t.wants_grad(p)) {
            std::vector<S>& gp = t.mutable_grad(p);
            for (size_t i = 0; i < n; ++i) gp[i] += g[off + i];
          }
          off += n;
        }
      } else {
        int64_t col_off = 0;
        for (Id p : ins) {
          const int64_t pc = t.shape(p)[1];
          if (t.wants_grad(p)) {
            std::vector<S>& gp = t.mutable_grad(p);
            for (int64_t r = 0; r < rows; ++r)
              for (int64_t c = 0; c < pc; ++c) gp[r * pc + c] += g[r * total + col_off + c];
          }
          col_off += pc;
        }
      }
    });
  }

  // Contiguous slice of a 2-D tensor along an axis.
  Id slice(Id a, int axis, int64_t start, int64_t len) {
    require_rank(a, 2, "slice");
    const Shape& sh = shape(a);
    if (axis != 0 && axis != 1) throw std::invalid_argument("slice: axis must be 0 or 1");
    if (start < 0 || len <= 0 || start + len > sh[axis])
      throw std::invalid_argument("slice: range out of bounds");
    const int64_t rows = sh[0], cols = sh[1];
    Shape out_shape = axis == 0 ? Shape{len, cols} : Shape{rows, len};
    std::vector<S> out(static_cast<size_t>(numel(out_shape)));
    if (axis == 0) {
      std::copy(va(a).begin() + start * cols, va(a).begin() + (start + len) * cols, out.begin());
    } else {
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < len; ++c) out[r * len + c] = va(a)[r * cols + start + c];
    }
    return unary_binary(std::move(out_shape), std::move(out), {a}, "slice",
                        [a, axis, start, len, rows, cols](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      if (axis == 0) {
        for (int64_t i = 0; i < len * cols; ++i) ga[start * cols + i] += g[i];
      } else {
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < len; ++c) ga[r * cols + start + c] += g[r * len + c];
      }
    });
  }

  // Zero-pad a [T, C] tensor along the time axis.
  Id pad_rows(Id a, int64_t left, int64_t right) {
    require_rank(a, 2, "pad_rows");
    if (left < 0 || right < 0) throw std::invalid_argument("pad_rows: negative padding");
    const int64_t rows = shape(a)[0], cols = shape(a)[1];
    std::vector<S> out(static_cast<size_t>((rows + left + right) * cols), S(0));
    std::copy(va(a).begin(), va(a).end(), out.begin() + left * cols);
    return unary_binary({rows + left + right, cols}, std::move(out), {a}, "pad_rows",
                        [a, left, rows, cols](TapeT& t) {
      std::span<const S> g = t.top_grad();
      std::vector<S>& ga = t.mutable_grad(a);
      for (int64_t i = 0; i < rows * cols; ++i) ga[i] += g[left * cols + i];
    });
  }

  // ---- linear algebra ----------------------------------------------------

  Id matmul(Id a, Id b) {
    require_rank(a, 2, "matmul");
    require_rank(b, 2, "matmul");
    const int64_t m = shape(a)[0], k = shape(a)[1];
    const int64_t k2 = shape(b)[0], n = shape(b)[1];
    if (k != k2)
      throw std::invalid_argument("matmul: inner dims differ " + shape_str(shape(a)) +
                                  " x " + shape_str(shape(b)));
    std::vector<S> out(static_cast<size_t>(m * n), S(0));
    {
      const S* pa = va(a).data();
      const S* pb = va(b).data();
      S* po = out.data();
      for (int64_t i = 0; i < m; ++i)
        for (int64_t l = 0; l < k; ++l) {
          const S ail = pa[i * k + l];
          const S* pbr = pb + l * n;
          S* por = po + i * n;
          for (int64_t j = 0; j < n; ++j) por[j] += ail * pbr[j];
        }
    }
    return unary_binary({m, n}, std::move(out), {a, b}, "matmul", [a, b, m, k, n](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(a)) {
        std::vector<S>& ga = t.mutable_grad(a);
        const S* pb = t.va(b).data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t l = 0; l < k; ++l) {
            S acc = 0;
            const S* pg = g.data() + i * n;
            const S* pbr = pb + l * n;
            for (int64_t j = 0; j < n; ++j) acc += pg[j] * pbr[j];
            ga[i * k + l] += acc;
          }
      }
      if (t.wants_grad(b)) {
        std::vector<S>& gb = t.mutable_grad(b);
        const S* pa = t.va(a).data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t l = 0; l < k; ++l) {
            const S ail = pa[i * k + l];
            const S* pg = g.data() + i * n;
            S* pgb = gb.data() + l * n;
            for (int64_t j = 0; j < n; ++j) pgb[j] += ail * pg[j];
          }
      }
    });
  }

  // x: [T, C] plus per-channel bias [C].
  Id bias_add(Id x, Id b) {
    require_rank(x, 2, "bias_add");
    const int64_t rows = shape(x)[0], cols = shape(x)[1];
    if (shape(b) != Shape{cols}) throw std::invalid_argument("bias_add: bias shape mismatch");
    std::vector<S> out(va(x).begin(), va(x).end());
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) out[r * cols + c] += va(b)[c];
    return unary_binary(shape(x), std::move(out), {x, b}, "bias_add",
                        [x, b, rows, cols](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(x)) t.accumulate(x, g);
      if (t.wants_grad(b)) {
        std::vector<S>& gb = t.mutable_grad(b);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    });
  }

  // x: [T, C], per-channel gain and bias (layer-norm affine).
  Id channel_affine(Id x, Id gain, Id bias) {
    require_rank(x, 2, "channel_affine");
    const int64_t rows = shape(x)[0], cols = shape(x)[1];
    if (shape(gain) != Shape{cols} || shape(bias) != Shape{cols})
      throw std::invalid_argument("channel_affine: parameter shape mismatch");
    std::vector<S> out(va(x).size());
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c)
        out[r * cols + c] = va(x)[r * cols + c] * va(gain)[c] + va(bias)[c];
    return unary_binary(shape(x), std::move(out), {x, gain, bias}, "channel_affine",
                        [x, gain, bias, rows, cols](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(x)) {
        std::vector<S>& gx = t.mutable_grad(x);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gx[r * cols + c] += g[r * cols + c] * t.va(gain)[c];
      }
      if (t.wants_grad(gain)) {
        std::vector<S>& gg = t.mutable_grad(gain);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gg[c] += g[r * cols + c] * t.va(x)[r * cols + c];
      }
      if (t.wants_grad(bias)) {
        std::vector<S>& gb = t.mutable_grad(bias);
        for (int64_t r = 0; r < rows; ++r)
          for (int64_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
      }
    });
  }

  // Row-wise layer norm over channels of [T, C] (no affine; compose with
  // channel_affine for learnable gain/bias).
  Id layer_norm(Id x, S eps) {
    require_rank(x, 2, "layer_norm");
    const int64_t rows = shape(x)[0], cols = shape(x)[1];
    std::vector<S> out(va(x).size());
    std::vector<S> inv_std(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
      const S* px = va(x).data() + r * cols;
      S mu = 0;
      for (int64_t c = 0; c < cols; ++c) mu += px[c];
      mu /= static_cast<S>(cols);
      S var = 0;
      for (int64_t c = 0; c < cols; ++c) var += (px[c] - mu) * (px[c] - mu);
      var /= static_cast<S>(cols);
      const S is = S(1) / std::sqrt(var + eps);
      inv_std[static_cast<size_t>(r)] = is;
      for (int64_t c = 0; c < cols; ++c) out[r * cols + c] = (px[c] - mu) * is;
    }
    return unary_binary(shape(x), std::move(out), {x}, "layer_norm",
                        [x, rows, cols, inv_std](TapeT& t) {
      Id self = t.current_;
      std::span<const S> g = t.top_grad();
      std::span<const S> y = t.va(self);
      std::vector<S>& gx = t.mutable_grad(x);
      for (int64_t r = 0; r < rows; ++r) {
        const S* pg = g.data() + r * cols;
        const S* py = y.data() + r * cols;
        S gm = 0, gym = 0;
        for (int64_t c = 0; c < cols; ++c) {
          gm += pg[c];
          gym += pg[c] * py[c];
        }
        gm /= static_cast<S>(cols);
        gym /= static_cast<S>(cols);
        const S is = inv_std[static_cast<size_t>(r)];
        for (int64_t c = 0; c < cols; ++c)
          gx[r * cols + c] += is * (pg[c] - gm - py[c] * gym);
      }
    });
  }

  // Row-wise softmax of [T, C].
  Id softmax(Id x) {
    require_rank(x, 2, "softmax");
    const int64_t rows = shape(x)[0], cols = shape(x)[1];
    std::vector<S> out(va(x).size());
    for (int64_t r = 0; r < rows; ++r) {
      const S* px = va(x).data() + r * cols;
      S* po = out.data() + r * cols;
      S mx = px[0];
      for (int64_t c = 1; c < cols; ++c) mx = std::max(mx, px[c]);
      S z = 0;
      for (int64_t c = 0; c < cols; ++c) {
        po[c] = std::exp(px[c] - mx);
        z += po[c];
      }
      for (int64_t c = 0; c < cols; ++c) po[c] /= z;
    }
    return unary_binary(shape(x), std::move(out), {x}, "softmax", [x, rows, cols](TapeT& t) {
      Id self = t.current_;
      std::span<const S> g = t.top_grad();
      std::span<const S> y = t.va(self);
      std::vector<S>& gx = t.mutable_grad(x);
      for (int64_t r = 0; r < rows; ++r) {
        const S* pg = g.data() + r * cols;
        const S* py = y.data() + r * cols;
        S dot = 0;
        for (int64_t c = 0; c < cols; ++c) dot += pg[c] * py[c];
        for (int64_t c = 0; c < cols; ++c) gx[r * cols + c] += py[c] * (pg[c] - dot);
      }
    });
  }

  // ---- convolution -------------------------------------------------------
  //
  // conv1d:            x [T, Cin], w [Cout, K, Cin] -> [(T + 2p - K)/s + 1, Cout]
  // conv1d_transposed: x [T, Cin], w [Cin, K, Cout] -> [(T-1)s + K - 2p, Cout]
  //
  // The weight layouts make each ops' input-gradient exactly the other op's
  // forward with the same array (adjoint pair); both gradients are written
  // as their own loops here.

  Id conv1d(Id x, Id w, int64_t stride, int64_t pad) {
    require_rank(x, 2, "conv1d");
    require_rank(w, 3, "conv1d");
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv1d: bad stride/pad");
    const int64_t T = shape(x)[0], cin = shape(x)[1];
    const int64_t cout = shape(w)[0], K = shape(w)[1];
    if (shape(w)[2] != cin) throw std::invalid_argument("conv1d: channel mismatch");
    const int64_t Tout = (T + 2 * pad - K) / stride + 1;
    if (T + 2 * pad < K) throw std::invalid_argument("conv1d: input shorter than kernel");
    std::vector<S> out(static_cast<size_t>(Tout * cout), S(0));
    {
      const S* px = va(x).data();
      const S* pw = va(w).data();
      for (int64_t t = 0; t < Tout; ++t)
        for (int64_t co = 0; co < cout; ++co) {
          S acc = 0;
          for (int64_t k = 0; k < K; ++k) {
            const int64_t ti = t * stride + k - pad;
            if (ti < 0 || ti >= T) continue;
            const S* pxr = px + ti * cin;
            const S* pwr = pw + (co * K + k) * cin;
            for (int64_t ci = 0; ci < cin; ++ci) acc += pxr[ci] * pwr[ci];
          }
          out[t * cout + co] = acc;
        }
    }
    return unary_binary({Tout, cout}, std::move(out), {x, w}, "conv1d",
                        [x, w, stride, pad, T, cin, cout, K, Tout](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(x)) {
        std::vector<S>& gx = t.mutable_grad(x);
        const S* pw = t.va(w).data();
        for (int64_t to = 0; to < Tout; ++to)
          for (int64_t k = 0; k < K; ++k) {
            const int64_t ti = to * stride + k - pad;
            if (ti < 0 || ti >= T) continue;
            for (int64_t co = 0; co < cout; ++co) {
              const S gv = g[to * cout + co];
              const S* pwr = pw + (co * K + k) * cin;
              S* pgx = gx.data() + ti * cin;
              for (int64_t ci = 0; ci < cin; ++ci) pgx[ci] += gv * pwr[ci];
            }
          }
      }
      if (t.wants_grad(w)) {
        std::vector<S>& gw = t.mutable_grad(w);
        const S* px = t.va(x).data();
        for (int64_t to = 0; to < Tout; ++to)
          for (int64_t k = 0; k < K; ++k) {
            const int64_t ti = to * stride + k - pad;
            if (ti < 0 || ti >= T) continue;
            const S* pxr = px + ti * cin;
            for (int64_t co = 0; co < cout; ++co) {
              const S gv = g[to * cout + co];
              S* pgw = gw.data() + (co * K + k) * cin;
              for (int64_t ci = 0; ci < cin; ++ci) pgw[ci] += gv * pxr[ci];
            }
          }
      }
    });
  }

  Id conv1d_transposed(Id x, Id w, int64_t stride, int64_t pad) {
    require_rank(x, 2, "conv1d_transposed");
    require_rank(w, 3, "conv1d_transposed");
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv1d_transposed: bad stride/pad");
    const int64_t T = shape(x)[0], cin = shape(x)[1];
    if (shape(w)[0] != cin) throw std::invalid_argument("conv1d_transposed: channel mismatch");
    const int64_t K = shape(w)[1], cout = shape(w)[2];
    const int64_t Tout = (T - 1) * stride + K - 2 * pad;
    if (Tout < 1) throw std::invalid_argument("conv1d_transposed: empty output");
    std::vector<S> out(static_cast<size_t>(Tout * cout), S(0));
    {
      const S* px = va(x).data();
      const S* pw = va(w).data();
      for (int64_t ti = 0; ti < T; ++ti)
        for (int64_t ci = 0; ci < cin; ++ci) {
          const S xv = px[ti * cin + ci];
          if (xv == S(0)) continue;
          for (int64_t k = 0; k < K; ++k) {
            const int64_t to = ti * stride + k - pad;
            if (to < 0 || to >= Tout) continue;
            const S* pwr = pw + (ci * K + k) * cout;
            S* por = out.data() + to * cout;
            for (int64_t co = 0; co < cout; ++co) por[co] += xv * pwr[co];
          }
        }
    }
    return unary_binary({Tout, cout}, std::move(out), {x, w}, "conv1d_transposed",
                        [x, w, stride, pad, T, cin, cout, K, Tout](TapeT& t) {
      std::span<const S> g = t.top_grad();
      if (t.wants_grad(x)) {
        std::vector<S>& gx = t.mutable_grad(x);
        const S* pw = t.va(w).data();
        for (int64_t ti = 0; ti < T; ++ti)
          for (int64_t ci = 0; ci < cin; ++ci) {
            S acc = 0;
            for (int64_t k = 0; k < K; ++k) {
              const int64_t to = ti * stride + k - pad;
              if (to < 0 || to >= Tout) continue;
              const S* pwr = pw + (ci * K + k) * cout;
              const S* pg = g.data() + to * cout;
              for (int64_t co = 0; co < cout; ++co) acc += pg[co] * pwr[co];
            }
            gx[ti * cin + ci] += acc;
          }
      }
      if (t.wants_grad(w)) {
        std::vector<S>& gw = t.mutable_grad(w);
        const S* px = t.va(x).data();
        for (int64_t ti = 0; ti < T; ++ti)
          for (int64_t ci = 0; ci < cin; ++ci) {
            const S xv = px[ti * cin + ci];
            for (int64_t k = 0; k < K; ++k) {
              const int64_t to = ti * stride + k - pad;
              if (to < 0 || to >= Tout) continue;
              const S* pg = g.data() + to * cout;
              S* pgw = gw.data() + (ci * K + k) * cout;
              for (int64_t co = 0; co < cout; ++co) pgw[co] += xv * pg[co];
            }
          }
      }
    });
  }

  // ---- backward ----------------------------------------------------------

  void backward(Id loss) {
    if (backward_ran_)
      throw std::runtime_error("backward: already ran on this tape; rebuild the graph");
    const Node& ln = node(loss);
    if (ln.val.size() != 1) throw std::runtime_error("backward: loss must be scalar");
    if (!ln.requires_grad)
      throw std::runtime_error("backward: loss does not depend on any trainable leaf");
    backward_ran_ = true;
    nodes_[static_cast<size_t>(loss)].grad[0] = S(1);
    for (int64_t i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.back || !n.requires_grad) continue;
      current_ = static_cast<Id>(i);
      n.back(*this);
    }
  }

 private:
  template <typename F>
  Id unary_binary(Shape out_shape, std::vector<S> out, const std::vector<Id>& inputs,
                  const char* op, F&& back_fn) {
    check_values(out, op);
    bool rg = false;
    for (Id i : inputs) rg = rg || node(i).requires_grad;
    Node n;
    n.shape = std::move(out_shape);
    n.val = std::move(out);
    n.requires_grad = rg;
    n.op = op;
    if (rg) {
      n.grad.assign(n.val.size(), S(0));
      n.back = std::forward<F>(back_fn);
    }
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  Id push(Shape shape, std::vector<S> val, bool rg, const char* op,
          std::function<void(TapeT&)> back) {
    Node n;
    n.shape = std::move(shape);
    n.val = std::move(val);
    n.requires_grad = rg;
    n.op = op;
    n.back = std::move(back);
    if (rg) n.grad.assign(n.val.size(), S(0));
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  void check_values(const std::vector<S>& v, const char* op) const {
    for (S x : v)
      if (!std::isfinite(static_cast<double>(x)))
        throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
  }

  void require_same_shape(Id a, Id b, const char* op) const {
    if (shape(a) != shape(b))
      throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                  shape_str(shape(a)) + " vs " + shape_str(shape(b)));
  }

  void require_rank(Id a, size_t rank, const char* op) const {
    if (shape(a).size() != rank)
      throw std::invalid_argument(std::string(op) + ": expected rank " +
                                  std::to_string(rank) + ", got " + shape_str(shape(a)));
  }

  // Backward-side helpers (called from closures).
  std::span<const S> va(Id id) const { return nodes_[static_cast<size_t>(id)].val; }
  bool wants_grad(Id id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
  std::vector<S>& mutable_grad(Id id) { return nodes_[static_cast<size_t>(id)].grad; }
  std::span<const S> top_grad() const { return nodes_[static_cast<size_t>(current_)].grad; }

  void accumulate(Id id, std::span<const S> g) {
    if (!wants_grad(id)) return;
    std::vector<S>& dst = mutable_grad(id);
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }
  void accumulate_scaled(Id id, std::span<const S> g, S c) {
    if (!wants_grad(id)) return;
    std::vector<S>& dst = mutable_grad(id);
    for (size_t i = 0; i < g.size(); ++i) dst[i] += c * g[i];
  }
  void accumulate_product(Id id, std::span<const S> g, std::span<const S> other) {
    if (!wants_grad(id)) return;
    std::vector<S>& dst = mutable_grad(id);
    for (size_t i = 0; i < g.size(); ++i) dst[i] += g[i] * other[i];
  }

  std::vector<Node> nodes_;
  Id current_ = -1;
  bool backward_ran_ = false;
};

using Tape = TapeT<float>;

}  // namespace codecsep::ad
