#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "codecsep/autodiff.hpp"

// Graph-building blocks shared by the models and by the gradient-check
// suite (which instantiates them at double precision).
namespace codecsep::nn {

template <typename S>
using Id = typename ad::TapeT<S>::Id;

// x [T, in] * w [in, out] + b [out]
template <typename S>
Id<S> linear(ad::TapeT<S>& t, Id<S> x, Id<S> w, Id<S> b) {
  return t.bias_add(t.matmul(x, w), b);
}

// Sinusoidal positional encodings, rows 0..frames-1, dim channels.
template <typename S>
ad::TensorT<S> sinusoidal_pe(int64_t frames, int64_t dim) {
  ad::TensorT<S> pe = ad::TensorT<S>::zeros({frames, dim});
  for (int64_t pos = 0; pos < frames; ++pos)
    for (int64_t i = 0; i < dim; i += 2) {
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, static_cast<double>(i) / dim);
      pe.data[pos * dim + i] = static_cast<S>(std::sin(angle));
      if (i + 1 < dim) pe.data[pos * dim + i + 1] = static_cast<S>(std::cos(angle));
    }
  return pe;
}

template <typename S>
struct AttentionParams {
  Id<S> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Multi-head self-attention over the full sequence, scores softmaxed per
// query row. Global attention by design: no chunking, the score matrix for
// each head is [T, T].
template <typename S>
Id<S> multi_head_attention(ad::TapeT<S>& t, Id<S> x, const AttentionParams<S>& p,
                           int num_heads) {
  const int64_t d = t.shape(x)[1];
  if (d % num_heads != 0)
    throw std::invalid_argument("attention: model dim not divisible by heads");
  const int64_t dh = d / num_heads;
  const S inv_sqrt_dh = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  Id<S> q = linear(t, x, p.wq, p.bq);
  Id<S> k = linear(t, x, p.wk, p.bk);
  Id<S> v = linear(t, x, p.wv, p.bv);

  std::vector<Id<S>> heads;
  heads.reserve(static_cast<size_t>(num_heads));
  for (int h = 0; h < num_heads; ++h) {
    Id<S> qh = t.slice(q, 1, h * dh, dh);
    Id<S> kh = t.slice(k, 1, h * dh, dh);
    Id<S> vh = t.slice(v, 1, h * dh, dh);
    Id<S> scores = t.scale(t.matmul(qh, t.transpose(kh)), inv_sqrt_dh);
    Id<S> attn = t.softmax(scores);
    heads.push_back(t.matmul(attn, vh));
  }
  Id<S> ctx = num_heads == 1 ? heads[0] : t.concat(1, heads);
  return linear(t, ctx, p.wo, p.bo);
}

template <typename S>
struct BlockParams {
  Id<S> ln1_g, ln1_b;
  AttentionParams<S> attn;
  Id<S> ln2_g, ln2_b;
  Id<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

// Pre-norm transformer encoder block: x + MHSA(LN(x)), then x + FFN(LN(x))
// with ReLU inside the FFN.
template <typename S>
Id<S> transformer_block(ad::TapeT<S>& t, Id<S> x, const BlockParams<S>& p, int num_heads,
                        S ln_eps) {
  Id<S> h = t.channel_affine(t.layer_norm(x, ln_eps), p.ln1_g, p.ln1_b);
  x = t.add(x, multi_head_attention(t, h, p.attn, num_heads));
  Id<S> f = t.channel_affine(t.layer_norm(x, ln_eps), p.ln2_g, p.ln2_b);
  f = linear(t, t.relu(linear(t, f, p.ffn_w1, p.ffn_b1)), p.ffn_w2, p.ffn_b2);
  return t.add(x, f);
}

// Differentiable scale-invariant SDR in dB (higher is better). Both
// operands are mean-subtracted; denominators are eps-regularized and there
// is no capping — capping is evaluation-only semantics.
template <typename S>
Id<S> si_sdr_soft(ad::TapeT<S>& t, Id<S> estimate, Id<S> reference, S eps) {
  Id<S> e = t.sub_mean(estimate);
  Id<S> r = t.sub_mean(reference);
  Id<S> dot = t.sum(t.mul(e, r));
  Id<S> energy = t.add_scalar(t.sum(t.square(r)), eps);
  Id<S> alpha = t.div(dot, energy);
  Id<S> proj = t.scale_by(r, alpha);
  Id<S> num = t.add_scalar(t.sum(t.square(proj)), eps);
  Id<S> den = t.add_scalar(t.sum(t.square(t.sub(proj, e))), eps);
  return t.scale(t.sub(t.log10(num), t.log10(den)), S(10));
}

}  // namespace codecsep::nn
