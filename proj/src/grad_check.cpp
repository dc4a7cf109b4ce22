#include "codecsep/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "codecsep/nn.hpp"

namespace codecsep::ad {

namespace {

using DTape = TapeT<double>;
using DId = DTape::Id;
using DTensor = TensorT<double>;

DTensor random_tensor(Rng& rng, const Shape& shape, double lo = -1.0, double hi = 1.0) {
  DTensor t = DTensor::zeros(shape);
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

Shape shape_or(const std::vector<Shape>& shapes, size_t i, Shape fallback) {
  return i < shapes.size() ? shapes[i] : fallback;
}

// Scalar loss that weights every output element differently, so gradient
// transposition/permutation bugs cannot cancel.
DId weighted_sum(DTape& t, DId out, Rng& rng) {
  const Shape& sh = t.shape(out);
  std::vector<double> w(static_cast<size_t>(numel(sh)));
  for (double& v : w) v = rng.uniform(-1.0, 1.0);
  return t.sum(t.mul(out, t.constant(sh, std::move(w))));
}

std::map<std::string, GradCheckCase>& registry() {
  static std::map<std::string, GradCheckCase> cases = [] {
    std::map<std::string, GradCheckCase> m;

    auto unary = [](auto op, double lo = -1.0, double hi = 1.0) {
      GradCheckCase c;
      c.make_inputs = [lo, hi](Rng& rng, const std::vector<Shape>& shapes) {
        return std::vector<DTensor>{random_tensor(rng, shape_or(shapes, 0, {4, 6}), lo, hi)};
      };
      c.build = [op](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, op(t, in[0]), rng);
      };
      return c;
    };
    auto binary = [](auto op, double lo = -1.0, double hi = 1.0) {
      GradCheckCase c;
      c.make_inputs = [lo, hi](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape s = shape_or(shapes, 0, {4, 6});
        return std::vector<DTensor>{random_tensor(rng, s), random_tensor(rng, s, lo, hi)};
      };
      c.build = [op](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, op(t, in[0], in[1]), rng);
      };
      return c;
    };

    m["add"] = binary([](DTape& t, DId a, DId b) { return t.add(a, b); });
    m["sub"] = binary([](DTape& t, DId a, DId b) { return t.sub(a, b); });
    m["mul"] = binary([](DTape& t, DId a, DId b) { return t.mul(a, b); });
    // Divisor bounded away from zero.
    m["div"] = binary([](DTape& t, DId a, DId b) { return t.div(a, b); }, 0.5, 1.5);
    m["scale"] = unary([](DTape& t, DId a) { return t.scale(a, 1.7); });
    m["add_scalar"] = unary([](DTape& t, DId a) { return t.add_scalar(a, 0.3); });
    m["sub_mean"] = unary([](DTape& t, DId a) { return t.sub_mean(a); });
    m["sum"] = unary([](DTape& t, DId a) { return t.sum(a); });
    m["mean"] = unary([](DTape& t, DId a) { return t.mean(a); });
    m["square"] = unary([](DTape& t, DId a) { return t.square(a); });
    m["log10"] = unary([](DTape& t, DId a) { return t.log10(a); }, 0.1, 2.0);
    m["sin"] = unary([](DTape& t, DId a) { return t.sin(a); });
    m["snake"] = unary([](DTape& t, DId a) { return t.snake(a); });
    m["transpose"] = unary([](DTape& t, DId a) { return t.transpose(a); });
    m["layer_norm"] = unary([](DTape& t, DId a) { return t.layer_norm(a, 1e-5); });
    m["softmax"] = unary([](DTape& t, DId a) { return t.softmax(a); });

    {  // relu: keep probe points away from the kink
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        DTensor t = random_tensor(rng, shape_or(shapes, 0, {4, 6}));
        for (double& v : t.data)
          if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
        return std::vector<DTensor>{t};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.relu(in[0]), rng);
      };
      m["relu"] = c;
    }

    {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape a = shape_or(shapes, 0, {3, 5});
        return std::vector<DTensor>{random_tensor(rng, a),
                                    random_tensor(rng, {1})};  // scalar
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.scale_by(in[0], in[1]), rng);
      };
      m["scale_by"] = c;
    }

    {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape a = shape_or(shapes, 0, {3, 4});
        const Shape b = shape_or(shapes, 1, {4, 5});
        return std::vector<DTensor>{random_tensor(rng, a), random_tensor(rng, b)};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.matmul(in[0], in[1]), rng);
      };
      m["matmul"] = c;
    }

    for (int axis = 0; axis < 2; ++axis) {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape s = shape_or(shapes, 0, {4, 6});
        return std::vector<DTensor>{random_tensor(rng, s), random_tensor(rng, s)};
      };
      c.build = [axis](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.concat(axis, {in[0], in[1]}), rng);
      };
      m[axis == 0 ? "concat_rows" : "concat_cols"] = c;
    }

    {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        return std::vector<DTensor>{random_tensor(rng, shape_or(shapes, 0, {6, 8}))};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        const int axis = static_cast<int>(rng.below(2));
        const Shape& sh = t.shape(in[0]);
        const int64_t extent = sh[axis];
        const int64_t len = 1 + static_cast<int64_t>(rng.below(static_cast<uint64_t>(extent)));
        const int64_t start =
            static_cast<int64_t>(rng.below(static_cast<uint64_t>(extent - len + 1)));
        return weighted_sum(t, t.slice(in[0], axis, start, len), rng);
      };
      m["slice"] = c;
    }

    {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        return std::vector<DTensor>{random_tensor(rng, shape_or(shapes, 0, {5, 3}))};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.pad_rows(in[0], rng.below(3), rng.below(3)), rng);
      };
      m["pad_rows"] = c;
    }

    {
      GradCheckCase c;  // x [T, Cin], w [Cout, K, Cin]
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape x = shape_or(shapes, 0, {12, 3});
        const Shape w = shape_or(shapes, 1, {4, 5, x[1]});
        return std::vector<DTensor>{random_tensor(rng, x), random_tensor(rng, w)};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        const int64_t stride = 1 + static_cast<int64_t>(rng.below(3));
        const int64_t pad = static_cast<int64_t>(rng.below(3));
        return weighted_sum(t, t.conv1d(in[0], in[1], stride, pad), rng);
      };
      m["conv1d"] = c;
    }

    {
      GradCheckCase c;  // x [T, Cin], w [Cin, K, Cout]
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape x = shape_or(shapes, 0, {6, 3});
        const Shape w = shape_or(shapes, 1, {x[1], 5, 4});
        return std::vector<DTensor>{random_tensor(rng, x), random_tensor(rng, w)};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        const int64_t stride = 1 + static_cast<int64_t>(rng.below(3));
        const int64_t pad = static_cast<int64_t>(rng.below(2));
        return weighted_sum(t, t.conv1d_transposed(in[0], in[1], stride, pad), rng);
      };
      m["conv1d_transposed"] = c;
    }

    {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape x = shape_or(shapes, 0, {5, 4});
        return std::vector<DTensor>{random_tensor(rng, x), random_tensor(rng, {x[1]})};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.bias_add(in[0], in[1]), rng);
      };
      m["bias_add"] = c;
    }

    {
      GradCheckCase c;
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape x = shape_or(shapes, 0, {5, 4});
        return std::vector<DTensor>{random_tensor(rng, x), random_tensor(rng, {x[1]}, 0.5, 1.5),
                                    random_tensor(rng, {x[1]})};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        return weighted_sum(t, t.channel_affine(in[0], in[1], in[2]), rng);
      };
      m["channel_affine"] = c;
    }

    {
      GradCheckCase c;  // gradient routes to the first operand only
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape s = shape_or(shapes, 0, {4, 4});
        return std::vector<DTensor>{random_tensor(rng, s)};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        // Straight-through: forward takes snapshot values, backward sees
        // identity; the FD probe agrees because the snapshot tracks the
        // perturbed input.
        DId snapshot = t.detach(in[0]);
        return weighted_sum(t, t.passthrough_grad(in[0], snapshot), rng);
      };
      m["passthrough_grad"] = c;
    }

    {
      GradCheckCase c;  // multi-head self-attention block
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape x = shape_or(shapes, 0, {6, 8});
        const int64_t d = x[1];
        std::vector<DTensor> in{random_tensor(rng, x)};
        for (int i = 0; i < 4; ++i) {
          in.push_back(random_tensor(rng, {d, d}, -0.5, 0.5));
          in.push_back(random_tensor(rng, {d}, -0.1, 0.1));
        }
        return in;
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        nn::AttentionParams<double> p{in[1], in[2], in[3], in[4],
                                      in[5], in[6], in[7], in[8]};
        return weighted_sum(t, nn::multi_head_attention(t, in[0], p, 2), rng);
      };
      m["attention"] = c;
    }

    {
      GradCheckCase c;  // full pre-norm encoder block
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape x = shape_or(shapes, 0, {5, 8});
        const int64_t d = x[1];
        const int64_t f = 2 * d;
        std::vector<DTensor> in{random_tensor(rng, x)};
        in.push_back(random_tensor(rng, {d}, 0.5, 1.5));  // ln1 gain
        in.push_back(random_tensor(rng, {d}, -0.1, 0.1));
        for (int i = 0; i < 4; ++i) {
          in.push_back(random_tensor(rng, {d, d}, -0.5, 0.5));
          in.push_back(random_tensor(rng, {d}, -0.1, 0.1));
        }
        in.push_back(random_tensor(rng, {d}, 0.5, 1.5));  // ln2 gain
        in.push_back(random_tensor(rng, {d}, -0.1, 0.1));
        in.push_back(random_tensor(rng, {d, f}, -0.5, 0.5));
        in.push_back(random_tensor(rng, {f}, -0.1, 0.1));
        in.push_back(random_tensor(rng, {f, d}, -0.5, 0.5));
        in.push_back(random_tensor(rng, {d}, -0.1, 0.1));
        return in;
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng& rng) {
        nn::BlockParams<double> p;
        size_t i = 1;
        p.ln1_g = in[i++];
        p.ln1_b = in[i++];
        p.attn = {in[i], in[i + 1], in[i + 2], in[i + 3],
                  in[i + 4], in[i + 5], in[i + 6], in[i + 7]};
        i += 8;
        p.ln2_g = in[i++];
        p.ln2_b = in[i++];
        p.ffn_w1 = in[i++];
        p.ffn_b1 = in[i++];
        p.ffn_w2 = in[i++];
        p.ffn_b2 = in[i++];
        return weighted_sum(t, nn::transformer_block(t, in[0], p, 2, 1e-5), rng);
      };
      m["transformer_block"] = c;
    }

    {
      GradCheckCase c;  // the differentiable training loss itself
      c.make_inputs = [](Rng& rng, const std::vector<Shape>& shapes) {
        const Shape s = shape_or(shapes, 0, {32, 1});
        return std::vector<DTensor>{random_tensor(rng, s), random_tensor(rng, s)};
      };
      c.build = [](DTape& t, const std::vector<DId>& in, Rng&) {
        return nn::si_sdr_soft(t, in[0], in[1], 1e-8);
      };
      m["si_sdr_loss"] = c;
    }

    return m;
  }();
  return cases;
}

}  // namespace

void register_grad_check(const std::string& name, GradCheckCase c) {
  registry()[name] = std::move(c);
}

std::vector<std::string> grad_check_ops() {
  std::vector<std::string> names;
  for (const auto& [name, c] : registry()) names.push_back(name);
  return names;
}

GradCheckReport grad_check(const std::string& op_name, const std::vector<Shape>& shapes,
                           double tolerance, uint64_t seed, double fd_step) {
  const auto it = registry().find(op_name);
  if (it == registry().end())
    throw std::invalid_argument("grad_check: unknown op '" + op_name + "'");
  const GradCheckCase& c = it->second;

  Rng input_rng = Rng::from_keys(seed, 0x6ad, 1);
  std::vector<DTensor> inputs = c.make_inputs(input_rng, shapes);

  // Every rebuild draws the builder's constants from an identically seeded
  // stream, so the graph differs only in the perturbed element.
  auto eval = [&](const std::vector<DTensor>& in, bool with_grad, DTape& tape,
                  std::vector<DId>& leaves) {
    leaves.clear();
    for (const DTensor& x : in) leaves.push_back(tape.leaf(x, with_grad));
    Rng build_rng = Rng::from_keys(seed, 0x6ad, 2);
    return c.build(tape, leaves, build_rng);
  };

  // Analytic gradients.
  DTape tape;
  std::vector<DId> leaves;
  const DId loss = eval(inputs, true, tape, leaves);
  tape.backward(loss);
  std::vector<std::vector<double>> analytic;
  for (DId id : leaves)
    analytic.emplace_back(tape.grad(id).begin(), tape.grad(id).end());

  GradCheckReport report;
  report.op = op_name;
  report.tolerance = tolerance;

  // Central finite differences, one element at a time.
  for (size_t i = 0; i < inputs.size(); ++i) {
    for (size_t j = 0; j < inputs[i].data.size(); ++j) {
      const double saved = inputs[i].data[j];
      double fplus, fminus;
      {
        inputs[i].data[j] = saved + fd_step;
        DTape tp;
        std::vector<DId> lv;
        fplus = tp.scalar_val(eval(inputs, false, tp, lv));
      }
      {
        inputs[i].data[j] = saved - fd_step;
        DTape tm;
        std::vector<DId> lv;
        fminus = tm.scalar_val(eval(inputs, false, tm, lv));
      }
      inputs[i].data[j] = saved;

      const double fd = (fplus - fminus) / (2.0 * fd_step);
      const double a = analytic[i][j];
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.detail = "input " + std::to_string(i) + " element " + std::to_string(j) +
                        ": analytic " + std::to_string(a) + " vs fd " + std::to_string(fd);
      }
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace codecsep::ad
