#pragma once

// Learnable parameters of the scorer and the per-candidate computation graph
// built from the kernels in neural_core.hpp.
//
//   embeddings -> projection -> question encoder on the question rows
//                            -> context encoder on the context rows
//   trilinear S -> (A, B) -> fuse [c, a, c*a, c*b] -> fused-context encoder
//   max-pool both sides -> cosine score
//
// Each encoder block is three pre-norm residual sub-blocks: conv, self
// attention, feed-forward. Dropout (inverted) hits each sub-block output
// while training.

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lmkbqa/neural_core.hpp"

namespace lmkbqa {

struct ModelDims {
  long embedding_dim = 64;
  long width = 128;
  long heads = 4;
  long ffn_dim = 256;
  long blocks = 1;  // encoder blocks per stack

  void validate() const {
    if (embedding_dim <= 0 || width < 2 || heads <= 0 || ffn_dim <= 0 || blocks <= 0)
      throw Error("model dimensions must be positive");
    if (width % heads != 0) throw Error("model width must be divisible by the head count");
  }
  bool operator==(const ModelDims&) const = default;
};

template <typename Scalar>
struct EncoderBlockWeights {
  nn::RowVector<Scalar> conv_norm_gain, conv_norm_bias;
  std::array<nn::Matrix<Scalar>, 3> conv_taps;
  nn::RowVector<Scalar> conv_bias;
  nn::RowVector<Scalar> attn_norm_gain, attn_norm_bias;
  nn::Matrix<Scalar> query, key, value, output;
  nn::RowVector<Scalar> ffn_norm_gain, ffn_norm_bias;
  nn::Matrix<Scalar> ffn_in;
  nn::RowVector<Scalar> ffn_in_bias;
  nn::Matrix<Scalar> ffn_out;
  nn::RowVector<Scalar> ffn_out_bias;
};

template <typename Scalar>
struct ModelWeights {
  ModelDims dims;
  nn::Matrix<Scalar> input_proj;
  nn::RowVector<Scalar> input_bias;
  std::vector<EncoderBlockWeights<Scalar>> question_encoder;
  std::vector<EncoderBlockWeights<Scalar>> context_encoder;
  std::vector<EncoderBlockWeights<Scalar>> fused_encoder;
  nn::RowVector<Scalar> trilinear;  // w0, length 3d
  nn::Matrix<Scalar> fusion_proj;   // 4d x d
  nn::RowVector<Scalar> fusion_bias;
};

// Calls f(name, tensor_a, tensor_b, ...) for every parameter tensor, in a
// fixed order, walking several same-shaped weight sets in lockstep.
template <typename F, typename W, typename... Ws>
void visit_tensors(F&& f, W& first, Ws&... rest) {
  f("input_proj", first.input_proj, rest.input_proj...);
  f("input_bias", first.input_bias, rest.input_bias...);
  auto visit_stack = [&](const std::string& prefix, auto select) {
    for (std::size_t b = 0; b < select(first).size(); ++b) {
      const std::string p = prefix + "." + std::to_string(b) + ".";
      auto blk = [&](auto& w) -> auto& { return select(w)[b]; };
      f(p + "conv_norm_gain", blk(first).conv_norm_gain, blk(rest).conv_norm_gain...);
      f(p + "conv_norm_bias", blk(first).conv_norm_bias, blk(rest).conv_norm_bias...);
      for (std::size_t t = 0; t < 3; ++t)
        f(p + "conv_tap" + std::to_string(t), blk(first).conv_taps[t], blk(rest).conv_taps[t]...);
      f(p + "conv_bias", blk(first).conv_bias, blk(rest).conv_bias...);
      f(p + "attn_norm_gain", blk(first).attn_norm_gain, blk(rest).attn_norm_gain...);
      f(p + "attn_norm_bias", blk(first).attn_norm_bias, blk(rest).attn_norm_bias...);
      f(p + "attn_query", blk(first).query, blk(rest).query...);
      f(p + "attn_key", blk(first).key, blk(rest).key...);
      f(p + "attn_value", blk(first).value, blk(rest).value...);
      f(p + "attn_output", blk(first).output, blk(rest).output...);
      f(p + "ffn_norm_gain", blk(first).ffn_norm_gain, blk(rest).ffn_norm_gain...);
      f(p + "ffn_norm_bias", blk(first).ffn_norm_bias, blk(rest).ffn_norm_bias...);
      f(p + "ffn_in", blk(first).ffn_in, blk(rest).ffn_in...);
      f(p + "ffn_in_bias", blk(first).ffn_in_bias, blk(rest).ffn_in_bias...);
      f(p + "ffn_out", blk(first).ffn_out, blk(rest).ffn_out...);
      f(p + "ffn_out_bias", blk(first).ffn_out_bias, blk(rest).ffn_out_bias...);
    }
  };
  visit_stack("question_encoder", [](auto& w) -> auto& { return w.question_encoder; });
  visit_stack("context_encoder", [](auto& w) -> auto& { return w.context_encoder; });
  visit_stack("fused_encoder", [](auto& w) -> auto& { return w.fused_encoder; });
  f("trilinear", first.trilinear, rest.trilinear...);
  f("fusion_proj", first.fusion_proj, rest.fusion_proj...);
  f("fusion_bias", first.fusion_bias, rest.fusion_bias...);
}

template <typename Scalar>
EncoderBlockWeights<Scalar> zero_block(const ModelDims& dims) {
  using M = nn::Matrix<Scalar>;
  using R = nn::RowVector<Scalar>;
  const long d = dims.width, f = dims.ffn_dim;
  EncoderBlockWeights<Scalar> b;
  b.conv_norm_gain = b.attn_norm_gain = b.ffn_norm_gain = R::Zero(d);
  b.conv_norm_bias = b.attn_norm_bias = b.ffn_norm_bias = R::Zero(d);
  for (auto& t : b.conv_taps) t = M::Zero(d, d);
  b.conv_bias = R::Zero(d);
  b.query = b.key = b.value = b.output = M::Zero(d, d);
  b.ffn_in = M::Zero(d, f);
  b.ffn_in_bias = R::Zero(f);
  b.ffn_out = M::Zero(f, d);
  b.ffn_out_bias = R::Zero(d);
  return b;
}

// All-zero weights with the shapes implied by `dims`; the gradient container.
template <typename Scalar>
ModelWeights<Scalar> zero_weights(const ModelDims& dims) {
  dims.validate();
  const long d = dims.width;
  ModelWeights<Scalar> w;
  w.dims = dims;
  w.input_proj = nn::Matrix<Scalar>::Zero(dims.embedding_dim, d);
  w.input_bias = nn::RowVector<Scalar>::Zero(d);
  for (auto* stack : {&w.question_encoder, &w.context_encoder, &w.fused_encoder})
    stack->assign(static_cast<std::size_t>(dims.blocks), zero_block<Scalar>(dims));
  w.trilinear = nn::RowVector<Scalar>::Zero(3 * d);
  w.fusion_proj = nn::Matrix<Scalar>::Zero(4 * d, d);
  w.fusion_bias = nn::RowVector<Scalar>::Zero(d);
  return w;
}

// Uniform in [0, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Glorot-uniform matrices, unit norm gains, zero biases.
template <typename Scalar>
ModelWeights<Scalar> init_weights(const ModelDims& dims, std::uint64_t seed) {
  auto w = zero_weights<Scalar>(dims);
  std::mt19937_64 rng(seed);
  auto fill = [&](auto& t, double limit) {
    for (long i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>((2.0 * unit_uniform(rng) - 1.0) * limit);
  };
  visit_tensors(
      [&](const std::string& name, auto& t) {
        if (name.ends_with("_gain")) {
          t.setOnes();
        } else if (name == "trilinear") {
          fill(t, std::sqrt(1.0 / static_cast<double>(dims.width)));
        } else if (t.rows() > 1) {
          fill(t, std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols())));
        }
      },
      w);
  return w;
}

template <typename To, typename From>
ModelWeights<To> cast_weights(const ModelWeights<From>& from) {
  auto to = zero_weights<To>(from.dims);
  visit_tensors([](const std::string&, auto& dst, const auto& src) { dst = src.template cast<To>(); }, to, from);
  return to;
}

template <typename Scalar>
std::size_t parameter_count(const ModelWeights<Scalar>& w) {
  std::size_t n = 0;
  visit_tensors([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); }, w);
  return n;
}

// ------------------------------------------------------------------ dropout

struct Dropout {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;  // null means inference: no dropout

  bool active() const { return rng != nullptr && rate > 0.0; }
};

// Inverted-dropout mask (0 or 1/(1-rate)); empty when inactive.
template <typename Scalar>
nn::Matrix<Scalar> dropout_mask(long rows, long cols, const Dropout& dropout) {
  if (!dropout.active()) return {};
  nn::Matrix<Scalar> m(rows, cols);
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - dropout.rate));
  for (long i = 0; i < m.size(); ++i) m.data()[i] = unit_uniform(*dropout.rng) < dropout.rate ? Scalar(0) : keep;
  return m;
}

template <typename Scalar>
nn::Matrix<Scalar> apply_mask(nn::Matrix<Scalar> x, const nn::Matrix<Scalar>& mask) {
  if (mask.size()) x.array() *= mask.array();
  return x;
}

// ------------------------------------------------------------ encoder block

template <typename Scalar>
struct EncoderBlockTrace {
  nn::Matrix<Scalar> conv_in, attn_in, ffn_in;  // normalized sub-block inputs
  nn::LayerNormCache<Scalar> conv_norm, attn_norm, ffn_norm;
  nn::AttentionCache<Scalar> attention;
  nn::FeedForwardCache<Scalar> ffn;
  nn::Matrix<Scalar> conv_mask, attn_mask, ffn_mask;
};

template <typename Scalar>
nn::Matrix<Scalar> encoder_block(const nn::Matrix<Scalar>& x, const EncoderBlockWeights<Scalar>& w, long heads,
                                 const Dropout& dropout = {}, EncoderBlockTrace<Scalar>* trace = nullptr) {
  EncoderBlockTrace<Scalar> local;
  auto& t = trace ? *trace : local;
  const Scalar eps = static_cast<Scalar>(nn::kLayerNormEps);

  t.conv_in = nn::layer_norm<Scalar>(x, w.conv_norm_gain, w.conv_norm_bias, eps, &t.conv_norm);
  t.conv_mask = dropout_mask<Scalar>(x.rows(), x.cols(), dropout);
  nn::Matrix<Scalar> h1 = x + apply_mask<Scalar>(nn::conv1d<Scalar>(t.conv_in, w.conv_taps, w.conv_bias), t.conv_mask);

  t.attn_in = nn::layer_norm<Scalar>(h1, w.attn_norm_gain, w.attn_norm_bias, eps, &t.attn_norm);
  t.attn_mask = dropout_mask<Scalar>(x.rows(), x.cols(), dropout);
  nn::Matrix<Scalar> h2 =
      h1 + apply_mask<Scalar>(
               nn::multi_head_self_attention<Scalar>(t.attn_in, w.query, w.key, w.value, w.output, heads, &t.attention),
               t.attn_mask);

  t.ffn_in = nn::layer_norm<Scalar>(h2, w.ffn_norm_gain, w.ffn_norm_bias, eps, &t.ffn_norm);
  t.ffn_mask = dropout_mask<Scalar>(x.rows(), x.cols(), dropout);
  return h2 + apply_mask<Scalar>(
                  nn::feed_forward<Scalar>(t.ffn_in, w.ffn_in, w.ffn_in_bias, w.ffn_out, w.ffn_out_bias, &t.ffn),
                  t.ffn_mask);
}

template <typename Scalar>
nn::Matrix<Scalar> encoder_block_backward(const EncoderBlockWeights<Scalar>& w, long heads,
                                          const EncoderBlockTrace<Scalar>& t, const nn::Matrix<Scalar>& dy,
                                          EncoderBlockWeights<Scalar>& g) {
  nn::Matrix<Scalar> dffn = apply_mask<Scalar>(dy, t.ffn_mask);
  dffn = nn::feed_forward_backward<Scalar>(t.ffn_in, w.ffn_in, w.ffn_out, t.ffn, dffn, g.ffn_in, g.ffn_in_bias,
                                           g.ffn_out, g.ffn_out_bias);
  nn::Matrix<Scalar> dh2 =
      dy + nn::layer_norm_backward<Scalar>(w.ffn_norm_gain, t.ffn_norm, dffn, g.ffn_norm_gain, g.ffn_norm_bias);

  nn::Matrix<Scalar> dattn = apply_mask<Scalar>(dh2, t.attn_mask);
  dattn = nn::multi_head_self_attention_backward<Scalar>(t.attn_in, w.query, w.key, w.value, w.output, heads,
                                                         t.attention, dattn, g.query, g.key, g.value, g.output);
  nn::Matrix<Scalar> dh1 =
      dh2 + nn::layer_norm_backward<Scalar>(w.attn_norm_gain, t.attn_norm, dattn, g.attn_norm_gain, g.attn_norm_bias);

  nn::Matrix<Scalar> dconv = apply_mask<Scalar>(dh1, t.conv_mask);
  dconv = nn::conv1d_backward<Scalar>(t.conv_in, w.conv_taps, dconv, g.conv_taps, g.conv_bias);
  return dh1 + nn::layer_norm_backward<Scalar>(w.conv_norm_gain, t.conv_norm, dconv, g.conv_norm_gain,
                                               g.conv_norm_bias);
}

template <typename Scalar>
struct EncoderTrace {
  std::vector<nn::Matrix<Scalar>> inputs;
  std::vector<EncoderBlockTrace<Scalar>> blocks;
};

template <typename Scalar>
nn::Matrix<Scalar> encode(const nn::Matrix<Scalar>& x, const std::vector<EncoderBlockWeights<Scalar>>& stack,
                          long heads, const Dropout& dropout = {}, EncoderTrace<Scalar>* trace = nullptr) {
  if (trace) {
    trace->inputs.clear();
    trace->blocks.assign(stack.size(), {});
  }
  nn::Matrix<Scalar> h = x;
  for (std::size_t b = 0; b < stack.size(); ++b) {
    if (trace) trace->inputs.push_back(h);
    h = encoder_block<Scalar>(h, stack[b], heads, dropout, trace ? &trace->blocks[b] : nullptr);
  }
  return h;
}

template <typename Scalar>
nn::Matrix<Scalar> encode_backward(const std::vector<EncoderBlockWeights<Scalar>>& stack, long heads,
                                   const EncoderTrace<Scalar>& trace, nn::Matrix<Scalar> dy,
                                   std::vector<EncoderBlockWeights<Scalar>>& grads) {
  for (std::size_t b = stack.size(); b-- > 0;)
    dy = encoder_block_backward<Scalar>(stack[b], heads, trace.blocks[b], dy, grads[b]);
  return dy;
}

// -------------------------------------------------------- candidate graph

// Rows of the embedded sequence fed to each side.
struct SequenceLayout {
  long question_begin = 1;
  long question_rows = 0;
  long context_begin = 0;
  long context_rows = 0;
};

template <typename Scalar>
struct CandidateTrace {
  nn::Matrix<Scalar> embeddings;
  SequenceLayout layout;
  nn::Matrix<Scalar> question_in, context_in;
  EncoderTrace<Scalar> question_trace, context_trace, fused_trace;
  nn::Matrix<Scalar> question, context;  // encoder outputs
  nn::AttentionMatrices<Scalar> attention;
  nn::Matrix<Scalar> fused_in, fused;
  nn::RowVector<Scalar> question_vec, context_vec;
  std::vector<long> question_argmax, context_argmax;
  Scalar score = 0;
};

template <typename Scalar>
Scalar score_forward(const ModelWeights<Scalar>& w, const nn::Matrix<Scalar>& embeddings, const SequenceLayout& layout,
                     const Dropout& dropout = {}, CandidateTrace<Scalar>* trace = nullptr) {
  nn::require(embeddings.cols() == w.dims.embedding_dim, "score: embedding width != model input width");
  nn::require(layout.question_rows >= 1 && layout.context_rows >= 1, "score: empty side");
  nn::require(layout.question_begin + layout.question_rows <= embeddings.rows() &&
                  layout.context_begin + layout.context_rows <= embeddings.rows(),
              "score: layout exceeds sequence");
  CandidateTrace<Scalar> local;
  auto& t = trace ? *trace : local;
  const long heads = w.dims.heads;

  t.embeddings = embeddings;
  t.layout = layout;
  const nn::Matrix<Scalar> projected = nn::project<Scalar>(embeddings, w.input_proj, w.input_bias);
  t.question_in = projected.middleRows(layout.question_begin, layout.question_rows);
  t.context_in = projected.middleRows(layout.context_begin, layout.context_rows);

  t.question = encode<Scalar>(t.question_in, w.question_encoder, heads, dropout, &t.question_trace);
  t.context = encode<Scalar>(t.context_in, w.context_encoder, heads, dropout, &t.context_trace);

  const nn::Matrix<Scalar> s = nn::trilinear_similarity<Scalar>(t.question, t.context, w.trilinear);
  t.attention = nn::cross_attention<Scalar>(t.question, t.context, s);
  t.fused_in = nn::fuse<Scalar>(t.context, t.attention.c2q, t.attention.q2c, w.fusion_proj, w.fusion_bias);
  t.fused = encode<Scalar>(t.fused_in, w.fused_encoder, heads, dropout, &t.fused_trace);

  t.question_vec = nn::max_pool<Scalar>(t.question, &t.question_argmax);
  t.context_vec = nn::max_pool<Scalar>(t.fused, &t.context_argmax);
  t.score = nn::cosine<Scalar>(t.question_vec, t.context_vec);
  return t.score;
}

// Accumulates dscore * d(score)/d(weights) into `g`.
template <typename Scalar>
void score_backward(const ModelWeights<Scalar>& w, const CandidateTrace<Scalar>& t, Scalar dscore,
                    ModelWeights<Scalar>& g) {
  const long heads = w.dims.heads;
  const long d = w.dims.width;
  nn::RowVector<Scalar> dqvec = nn::RowVector<Scalar>::Zero(d), dcvec = nn::RowVector<Scalar>::Zero(d);
  nn::cosine_backward<Scalar>(t.question_vec, t.context_vec, dscore, dqvec, dcvec);

  nn::Matrix<Scalar> dquestion = nn::max_pool_backward<Scalar>(t.question.rows(), t.question_argmax, dqvec);
  const nn::Matrix<Scalar> dfused = nn::max_pool_backward<Scalar>(t.fused.rows(), t.context_argmax, dcvec);
  const nn::Matrix<Scalar> dfused_in = encode_backward<Scalar>(w.fused_encoder, heads, t.fused_trace, dfused,
                                                               g.fused_encoder);

  const long n = t.context.rows(), m = t.question.rows();
  nn::Matrix<Scalar> dcontext = nn::Matrix<Scalar>::Zero(n, d);
  nn::Matrix<Scalar> dc2q = nn::Matrix<Scalar>::Zero(n, d), dq2c = nn::Matrix<Scalar>::Zero(n, d);
  nn::fuse_backward<Scalar>(t.context, t.attention.c2q, t.attention.q2c, w.fusion_proj, dfused_in, g.fusion_proj,
                            g.fusion_bias, dcontext, dc2q, dq2c);
  const nn::Matrix<Scalar> ds =
      nn::cross_attention_backward<Scalar>(t.question, t.context, t.attention, dc2q, dq2c, dquestion, dcontext);
  nn::require(ds.rows() == n && ds.cols() == m, "score_backward: similarity gradient shape");
  nn::trilinear_similarity_backward<Scalar>(t.question, t.context, w.trilinear, ds, dquestion, dcontext, g.trilinear);

  const nn::Matrix<Scalar> dquestion_in =
      encode_backward<Scalar>(w.question_encoder, heads, t.question_trace, dquestion, g.question_encoder);
  const nn::Matrix<Scalar> dcontext_in =
      encode_backward<Scalar>(w.context_encoder, heads, t.context_trace, dcontext, g.context_encoder);

  nn::Matrix<Scalar> dprojected = nn::Matrix<Scalar>::Zero(t.embeddings.rows(), d);
  dprojected.middleRows(t.layout.question_begin, t.layout.question_rows) += dquestion_in;
  dprojected.middleRows(t.layout.context_begin, t.layout.context_rows) += dcontext_in;
  nn::project_backward<Scalar>(t.embeddings, w.input_proj, dprojected, g.input_proj, g.input_bias);
}

}  // namespace lmkbqa
