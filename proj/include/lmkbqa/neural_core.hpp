#pragma once

// Dense kernels of the scoring model, templated on the scalar type.
//
// Sequences are row-major matrices with one row per position. Every forward
// kernel that takes part in training has a matching `*_backward` that
// accumulates (+=) parameter gradients and returns the input gradient.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "lmkbqa/errors.hpp"

namespace lmkbqa::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

inline void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

// ---------------------------------------------------------------- projection

template <typename Scalar>
Matrix<Scalar> project(const Matrix<Scalar>& x, const Matrix<Scalar>& weight, const RowVector<Scalar>& bias) {
  require(x.cols() == weight.rows(), "project: input width != weight rows");
  require(bias.cols() == weight.cols(), "project: bias width != weight cols");
  Matrix<Scalar> y = x * weight;
  y.rowwise() += bias;
  return y;
}

template <typename Scalar>
Matrix<Scalar> project_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& weight, const Matrix<Scalar>& dy,
                                Matrix<Scalar>& dweight, RowVector<Scalar>& dbias) {
  dweight.noalias() += x.transpose() * dy;
  dbias += dy.colwise().sum();
  return dy * weight.transpose();
}

// --------------------------------------------------------------- convolution

// Width-3 same-length convolution with zero padding:
// out_i = x_{i-1} taps[0] + x_i taps[1] + x_{i+1} taps[2] + bias.
template <typename Scalar>
Matrix<Scalar> conv1d(const Matrix<Scalar>& x, const std::array<Matrix<Scalar>, 3>& taps,
                      const RowVector<Scalar>& bias) {
  const long n = x.rows();
  require(n >= 1, "conv1d: empty sequence");
  for (const auto& t : taps) require(t.rows() == x.cols() && t.cols() == bias.cols(), "conv1d: tap shape");
  Matrix<Scalar> y = x * taps[1];
  if (n > 1) {
    y.bottomRows(n - 1).noalias() += x.topRows(n - 1) * taps[0];
    y.topRows(n - 1).noalias() += x.bottomRows(n - 1) * taps[2];
  }
  y.rowwise() += bias;
  return y;
}

template <typename Scalar>
Matrix<Scalar> conv1d_backward(const Matrix<Scalar>& x, const std::array<Matrix<Scalar>, 3>& taps,
                               const Matrix<Scalar>& dy, std::array<Matrix<Scalar>, 3>& dtaps,
                               RowVector<Scalar>& dbias) {
  const long n = x.rows();
  dbias += dy.colwise().sum();
  dtaps[1].noalias() += x.transpose() * dy;
  Matrix<Scalar> dx = dy * taps[1].transpose();
  if (n > 1) {
    dtaps[0].noalias() += x.topRows(n - 1).transpose() * dy.bottomRows(n - 1);
    dtaps[2].noalias() += x.bottomRows(n - 1).transpose() * dy.topRows(n - 1);
    dx.topRows(n - 1).noalias() += dy.bottomRows(n - 1) * taps[0].transpose();
    dx.bottomRows(n - 1).noalias() += dy.topRows(n - 1) * taps[2].transpose();
  }
  return dx;
}

// ------------------------------------------------------------------- softmax

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& m) {
  Matrix<Scalar> out(m.rows(), m.cols());
  for (long i = 0; i < m.rows(); ++i) {
    const RowVector<Scalar> e = (m.row(i).array() - m.row(i).maxCoeff()).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

// Softmax over each column (normalizes across rows).
template <typename Scalar>
Matrix<Scalar> softmax_cols(const Matrix<Scalar>& m) {
  return softmax_rows<Scalar>(m.transpose()).transpose();
}

// Given p = softmax_rows(s) and dL/dp, returns dL/ds.
template <typename Scalar>
Matrix<Scalar> softmax_rows_backward(const Matrix<Scalar>& p, const Matrix<Scalar>& dp) {
  Vector<Scalar> dot = (p.array() * dp.array()).rowwise().sum();
  return (p.array() * (dp.colwise() - dot).array()).matrix();
}

template <typename Scalar>
Matrix<Scalar> softmax_cols_backward(const Matrix<Scalar>& p, const Matrix<Scalar>& dp) {
  RowVector<Scalar> dot = (p.array() * dp.array()).colwise().sum();
  return (p.array() * (dp.rowwise() - dot).array()).matrix();
}

// --------------------------------------------------------- self-attention

template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> query, key, value;       // n x d, head i owns columns [i*dk, (i+1)*dk)
  std::vector<Matrix<Scalar>> weights;    // per head, n x n
  Matrix<Scalar> heads;                   // n x d, concatenated head outputs
};

// head_i = softmax((X Wq_i)(X Wk_i)^T / sqrt(dk)) (X Wv_i); out = Concat(head_i) Wo.
template <typename Scalar>
Matrix<Scalar> multi_head_self_attention(const Matrix<Scalar>& x, const Matrix<Scalar>& wq,
                                         const Matrix<Scalar>& wk, const Matrix<Scalar>& wv,
                                         const Matrix<Scalar>& wo, long heads,
                                         AttentionCache<Scalar>* cache = nullptr) {
  const long d = wq.cols();
  require(heads > 0 && d % heads == 0, "attention: width not divisible by heads");
  require(x.cols() == wq.rows() && wk.rows() == x.cols() && wv.rows() == x.cols(), "attention: input width");
  require(wk.cols() == d && wv.cols() == d && wo.rows() == d, "attention: projection shapes");
  const long dk = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));

  AttentionCache<Scalar> local;
  AttentionCache<Scalar>& c = cache ? *cache : local;
  c.query = x * wq;
  c.key = x * wk;
  c.value = x * wv;
  c.heads.resize(x.rows(), d);
  c.weights.resize(static_cast<std::size_t>(heads));
  for (long h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * dk, dk);
    Matrix<Scalar> scores = (c.query(Eigen::all, cols) * c.key(Eigen::all, cols).transpose()) * scale;
    c.weights[h] = softmax_rows<Scalar>(scores);
    c.heads(Eigen::all, cols) = c.weights[h] * c.value(Eigen::all, cols);
  }
  return c.heads * wo;
}

template <typename Scalar>
Matrix<Scalar> multi_head_self_attention_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& wq,
                                                  const Matrix<Scalar>& wk, const Matrix<Scalar>& wv,
                                                  const Matrix<Scalar>& wo, long heads,
                                                  const AttentionCache<Scalar>& c, const Matrix<Scalar>& dy,
                                                  Matrix<Scalar>& dwq, Matrix<Scalar>& dwk, Matrix<Scalar>& dwv,
                                                  Matrix<Scalar>& dwo) {
  const long d = wq.cols();
  const long dk = d / heads;
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dk));

  dwo.noalias() += c.heads.transpose() * dy;
  const Matrix<Scalar> dheads = dy * wo.transpose();
  Matrix<Scalar> dq(x.rows(), d), dk_(x.rows(), d), dv(x.rows(), d);
  for (long h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * dk, dk);
    const Matrix<Scalar> dout = dheads(Eigen::all, cols);
    const Matrix<Scalar>& p = c.weights[h];
    dv(Eigen::all, cols) = p.transpose() * dout;
    const Matrix<Scalar> dscores = softmax_rows_backward<Scalar>(p, dout * c.value(Eigen::all, cols).transpose()) * scale;
    dq(Eigen::all, cols) = dscores * c.key(Eigen::all, cols);
    dk_(Eigen::all, cols) = dscores.transpose() * c.query(Eigen::all, cols);
  }
  dwq.noalias() += x.transpose() * dq;
  dwk.noalias() += x.transpose() * dk_;
  dwv.noalias() += x.transpose() * dv;
  return dq * wq.transpose() + dk_ * wk.transpose() + dv * wv.transpose();
}

// -------------------------------------------------------------- feed-forward

template <typename Scalar>
struct FeedForwardCache {
  Matrix<Scalar> pre_activation;
};

template <typename Scalar>
Matrix<Scalar> feed_forward(const Matrix<Scalar>& x, const Matrix<Scalar>& w1, const RowVector<Scalar>& b1,
                            const Matrix<Scalar>& w2, const RowVector<Scalar>& b2,
                            FeedForwardCache<Scalar>* cache = nullptr) {
  require(w1.cols() == w2.rows(), "feed_forward: hidden width");
  Matrix<Scalar> pre = project<Scalar>(x, w1, b1);
  Matrix<Scalar> y = project<Scalar>(pre.cwiseMax(Scalar(0)), w2, b2);
  if (cache) cache->pre_activation = std::move(pre);
  return y;
}

template <typename Scalar>
Matrix<Scalar> feed_forward_backward(const Matrix<Scalar>& x, const Matrix<Scalar>& w1, const Matrix<Scalar>& w2,
                                     const FeedForwardCache<Scalar>& c, const Matrix<Scalar>& dy,
                                     Matrix<Scalar>& dw1, RowVector<Scalar>& db1, Matrix<Scalar>& dw2,
                                     RowVector<Scalar>& db2) {
  const Matrix<Scalar> hidden = c.pre_activation.cwiseMax(Scalar(0));
  Matrix<Scalar> dhidden = project_backward<Scalar>(hidden, w2, dy, dw2, db2);
  dhidden = (c.pre_activation.array() > Scalar(0)).select(dhidden, Scalar(0));
  return project_backward<Scalar>(x, w1, dhidden, dw1, db1);
}

// ---------------------------------------------------------------- layer norm

inline constexpr double kLayerNormEps = 1e-5;

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> normalized;
  Vector<Scalar> inv_std;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const RowVector<Scalar>& gain, const RowVector<Scalar>& bias,
                          Scalar eps = Scalar(kLayerNormEps), LayerNormCache<Scalar>* cache = nullptr) {
  require(x.cols() >= 2, "layer_norm: width < 2");
  require(gain.cols() == x.cols() && bias.cols() == x.cols(), "layer_norm: gain/bias width");
  const Vector<Scalar> mean = x.rowwise().mean();
  const Matrix<Scalar> centered = x.colwise() - mean;
  const Vector<Scalar> var = centered.array().square().rowwise().mean();
  const Vector<Scalar> inv_std = (var.array() + eps).rsqrt();
  Matrix<Scalar> xhat = centered.array().colwise() * inv_std.array();
  Matrix<Scalar> y = xhat.array().rowwise() * gain.array();
  y.rowwise() += bias;
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = inv_std;
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const RowVector<Scalar>& gain, const LayerNormCache<Scalar>& c,
                                   const Matrix<Scalar>& dy, RowVector<Scalar>& dgain, RowVector<Scalar>& dbias) {
  const auto& xhat = c.normalized;
  const Scalar width = static_cast<Scalar>(xhat.cols());
  dgain += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbias += dy.colwise().sum();
  const Matrix<Scalar> dxhat = dy.array().rowwise() * gain.array();
  const Vector<Scalar> sum_d = dxhat.rowwise().sum();
  const Vector<Scalar> sum_dx = (dxhat.array() * xhat.array()).rowwise().sum();
  Matrix<Scalar> dx = (width * dxhat.array()).colwise() - sum_d.array();
  dx.array() -= xhat.array().colwise() * sum_dx.array();
  dx.array().colwise() *= c.inv_std.array() / width;
  return dx;
}

// ----------------------------------------------------------- cross attention

// S[i][j] = w0 . [q_j, c_i, q_j * c_i] for context row i and question row j.
template <typename Scalar>
Matrix<Scalar> trilinear_similarity(const Matrix<Scalar>& question, const Matrix<Scalar>& context,
                                    const RowVector<Scalar>& w0) {
  const long d = question.cols();
  require(context.cols() == d && w0.cols() == 3 * d, "trilinear: widths");
  const RowVector<Scalar> wq = w0.segment(0, d), wc = w0.segment(d, d), wm = w0.segment(2 * d, d);
  Matrix<Scalar> s = (context.array().rowwise() * wm.array()).matrix() * question.transpose();
  s.colwise() += context * wc.transpose();
  s.rowwise() += (question * wq.transpose()).transpose();
  return s;
}

template <typename Scalar>
void trilinear_similarity_backward(const Matrix<Scalar>& question, const Matrix<Scalar>& context,
                                   const RowVector<Scalar>& w0, const Matrix<Scalar>& ds, Matrix<Scalar>& dquestion,
                                   Matrix<Scalar>& dcontext, RowVector<Scalar>& dw0) {
  const long d = question.cols();
  const RowVector<Scalar> wq = w0.segment(0, d), wc = w0.segment(d, d), wm = w0.segment(2 * d, d);
  const Vector<Scalar> col_sums = ds.colwise().sum().transpose();  // per question row
  const Vector<Scalar> row_sums = ds.rowwise().sum();              // per context row
  const Matrix<Scalar> ds_q = ds * question;                       // n x d
  dw0.segment(0, d) += col_sums.transpose() * question;
  dw0.segment(d, d) += row_sums.transpose() * context;
  dw0.segment(2 * d, d) += (context.array() * ds_q.array()).colwise().sum().matrix();
  dquestion += col_sums * wq;
  dquestion += ((ds.transpose() * context).array().rowwise() * wm.array()).matrix();
  dcontext += row_sums * wc;
  dcontext += (ds_q.array().rowwise() * wm.array()).matrix();
}

template <typename Scalar>
struct AttentionMatrices {
  Matrix<Scalar> similarity;    // S, n x m
  Matrix<Scalar> row_weights;   // softmax over each row of S
  Matrix<Scalar> col_weights;   // softmax over each column of S
  Matrix<Scalar> c2q;           // A = row_weights Q, n x d
  Matrix<Scalar> q2c;           // B = row_weights col_weights^T C, n x d
};

template <typename Scalar>
AttentionMatrices<Scalar> cross_attention(const Matrix<Scalar>& question, const Matrix<Scalar>& context,
                                          const Matrix<Scalar>& similarity) {
  require(similarity.rows() == context.rows() && similarity.cols() == question.rows(),
          "cross_attention: similarity shape");
  require(question.cols() == context.cols(), "cross_attention: widths");
  AttentionMatrices<Scalar> out;
  out.similarity = similarity;
  out.row_weights = softmax_rows<Scalar>(similarity);
  out.col_weights = softmax_cols<Scalar>(similarity);
  out.c2q = out.row_weights * question;
  out.q2c = out.row_weights * (out.col_weights.transpose() * context);
  return out;
}

// Returns dL/dS; accumulates into dquestion and dcontext.
template <typename Scalar>
Matrix<Scalar> cross_attention_backward(const Matrix<Scalar>& question, const Matrix<Scalar>& context,
                                        const AttentionMatrices<Scalar>& a, const Matrix<Scalar>& dc2q,
                                        const Matrix<Scalar>& dq2c, Matrix<Scalar>& dquestion,
                                        Matrix<Scalar>& dcontext) {
  // q2c = R T with R = row_weights (n x m), T = col_weights^T C (m x d).
  const Matrix<Scalar> t = a.col_weights.transpose() * context;
  Matrix<Scalar> drow = dc2q * question.transpose() + dq2c * t.transpose();
  dquestion.noalias() += a.row_weights.transpose() * dc2q;
  const Matrix<Scalar> dt = a.row_weights.transpose() * dq2c;  // m x d
  dcontext.noalias() += a.col_weights * dt;
  const Matrix<Scalar> dcol = context * dt.transpose();        // n x m
  return softmax_rows_backward<Scalar>(a.row_weights, drow) + softmax_cols_backward<Scalar>(a.col_weights, dcol);
}

// --------------------------------------------------------------------- fusion

// Per position [c, a, c*a, c*b], width 4d.
template <typename Scalar>
Matrix<Scalar> fusion_input(const Matrix<Scalar>& c, const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
  require(a.rows() == c.rows() && b.rows() == c.rows() && a.cols() == c.cols() && b.cols() == c.cols(),
          "fuse: operand shapes");
  const long d = c.cols();
  Matrix<Scalar> g(c.rows(), 4 * d);
  g.middleCols(0, d) = c;
  g.middleCols(d, d) = a;
  g.middleCols(2 * d, d) = c.cwiseProduct(a);
  g.middleCols(3 * d, d) = c.cwiseProduct(b);
  return g;
}

template <typename Scalar>
Matrix<Scalar> fuse(const Matrix<Scalar>& c, const Matrix<Scalar>& a, const Matrix<Scalar>& b,
                    const Matrix<Scalar>& weight, const RowVector<Scalar>& bias) {
  require(weight.rows() == 4 * c.cols(), "fuse: projection rows != 4d");
  return project<Scalar>(fusion_input<Scalar>(c, a, b), weight, bias);
}

template <typename Scalar>
void fuse_backward(const Matrix<Scalar>& c, const Matrix<Scalar>& a, const Matrix<Scalar>& b,
                   const Matrix<Scalar>& weight, const Matrix<Scalar>& dy, Matrix<Scalar>& dweight,
                   RowVector<Scalar>& dbias, Matrix<Scalar>& dc, Matrix<Scalar>& da, Matrix<Scalar>& db) {
  const long d = c.cols();
  const Matrix<Scalar> dg = project_backward<Scalar>(fusion_input<Scalar>(c, a, b), weight, dy, dweight, dbias);
  dc += dg.middleCols(0, d) + dg.middleCols(2 * d, d).cwiseProduct(a) + dg.middleCols(3 * d, d).cwiseProduct(b);
  da += dg.middleCols(d, d) + dg.middleCols(2 * d, d).cwiseProduct(c);
  db += dg.middleCols(3 * d, d).cwiseProduct(c);
}

// ------------------------------------------------------------ pool & cosine

// Component-wise max over rows; `argmax` receives the winning row per column
// (first on ties).
template <typename Scalar>
RowVector<Scalar> max_pool(const Matrix<Scalar>& x, std::vector<long>* argmax = nullptr) {
  require(x.rows() >= 1, "max_pool: empty sequence");
  RowVector<Scalar> out(x.cols());
  if (argmax) argmax->assign(static_cast<std::size_t>(x.cols()), 0);
  for (long j = 0; j < x.cols(); ++j) {
    long best = 0;
    out[j] = x.col(j).maxCoeff(&best);
    if (argmax) (*argmax)[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> max_pool_backward(long rows, const std::vector<long>& argmax, const RowVector<Scalar>& dy) {
  Matrix<Scalar> dx = Matrix<Scalar>::Zero(rows, dy.cols());
  for (long j = 0; j < dy.cols(); ++j) dx(argmax[static_cast<std::size_t>(j)], j) = dy[j];
  return dx;
}

template <typename Scalar>
Scalar cosine(const RowVector<Scalar>& u, const RowVector<Scalar>& v) {
  require(u.cols() == v.cols(), "cosine: widths");
  const Scalar nu = u.norm(), nv = v.norm();
  if (nu == Scalar(0) || nv == Scalar(0)) throw ZeroVector();
  return u.dot(v) / (nu * nv);
}

// d cos / du and d cos / dv scaled by `dscore`.
template <typename Scalar>
void cosine_backward(const RowVector<Scalar>& u, const RowVector<Scalar>& v, Scalar dscore, RowVector<Scalar>& du,
                     RowVector<Scalar>& dv) {
  const Scalar nu = u.norm(), nv = v.norm();
  const Scalar s = u.dot(v) / (nu * nv);
  du += dscore * (v / (nu * nv) - s * u / (nu * nu));
  dv += dscore * (u / (nu * nv) - s * v / (nv * nv));
}

}  // namespace lmkbqa::nn
