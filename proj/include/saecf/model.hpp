#ifndef SAECF_MODEL_HPP
#define SAECF_MODEL_HPP

#include "saecf/random.hpp"
#include "saecf/sampler.hpp"
#include "saecf/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saecf {

enum class Activation { kTanh, kSigmoid };

inline const char* activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "sigmoid";
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw std::invalid_argument("unknown activation: " + name);
}

// Autoencoder parameters. Both weight matrices are stored item-major
// (num_items x hidden_dim, row i = item i's weights) so restricting to a
// batch's columns is a contiguous row gather and one row-keyed optimizer
// routine serves encoder and decoder alike.
template <class Scalar>
struct ModelParams {
  RowMatrixX<Scalar> enc_weight;  // num_items x d
  VectorX<Scalar> enc_bias;       // d
  RowMatrixX<Scalar> dec_weight;  // num_items x d
  VectorX<Scalar> dec_bias;       // num_items

  Eigen::Index num_items() const { return enc_weight.rows(); }
  Eigen::Index hidden_dim() const { return enc_weight.cols(); }

  template <class T>
  ModelParams<T> cast() const {
    ModelParams<T> out;
    out.enc_weight = enc_weight.template cast<T>();
    out.enc_bias = enc_bias.template cast<T>();
    out.dec_weight = dec_weight.template cast<T>();
    out.dec_bias = dec_bias.template cast<T>();
    return out;
  }
};

// Glorot-uniform weights in +-sqrt(6 / (num_items + hidden_dim)), zero
// biases. Draw order (encoder item-major, then decoder item-major) is pinned
// so a seed fully determines the result.
template <class Scalar>
ModelParams<Scalar> init_params(Eigen::Index num_items, Eigen::Index hidden_dim,
                                std::uint64_t seed) {
  if (num_items < 1 || hidden_dim < 1) {
    throw std::invalid_argument("init_params: need num_items >= 1 and hidden_dim >= 1");
  }
  constexpr std::uint64_t kInitStream = 0x696e6974ULL;  // "init"
  std::mt19937_64 rng(mix_seed(seed, kInitStream));
  const double bound =
      std::sqrt(6.0 / (static_cast<double>(num_items) + static_cast<double>(hidden_dim)));

  ModelParams<Scalar> p;
  p.enc_weight.resize(num_items, hidden_dim);
  p.dec_weight.resize(num_items, hidden_dim);
  for (Eigen::Index i = 0; i < num_items; ++i) {
    for (Eigen::Index j = 0; j < hidden_dim; ++j) {
      p.enc_weight(i, j) = static_cast<Scalar>(bound * (2.0 * uniform_unit(rng) - 1.0));
    }
  }
  for (Eigen::Index i = 0; i < num_items; ++i) {
    for (Eigen::Index j = 0; j < hidden_dim; ++j) {
      p.dec_weight(i, j) = static_cast<Scalar>(bound * (2.0 * uniform_unit(rng) - 1.0));
    }
  }
  p.enc_bias = VectorX<Scalar>::Zero(hidden_dim);
  p.dec_bias = VectorX<Scalar>::Zero(num_items);
  return p;
}

// Inverted dropout on the nonzero entries: each is zeroed with probability p
// and scaled by 1/(1-p) otherwise, so the conditional mean is preserved.
// Zero cells never consume randomness; draws are taken in column-major
// order. Requires 0 <= p < 1.
template <class Scalar>
MatrixX<Scalar> apply_input_dropout(const MatrixX<Scalar>& dense, double p,
                                    std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("apply_input_dropout: p must be in [0, 1)");
  }
  MatrixX<Scalar> out = dense;
  if (p == 0.0) return out;
  const Scalar scale = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      Scalar& v = out(r, c);
      if (v != Scalar(0)) v = uniform_unit(rng) < p ? Scalar(0) : v * scale;
    }
  }
  return out;
}

namespace detail {

template <class Scalar>
void activate_inplace(MatrixX<Scalar>& pre, Activation act) {
  if (act == Activation::kTanh) pre = pre.array().tanh();
  else pre = pre.array().logistic();
}

// Derivative expressed through the activation value.
template <class Scalar>
MatrixX<Scalar> activation_grad(const MatrixX<Scalar>& hidden, Activation act) {
  if (act == Activation::kTanh) return (Scalar(1) - hidden.array().square()).matrix();
  return (hidden.array() * (Scalar(1) - hidden.array())).matrix();
}

template <class Scalar>
RowMatrixX<Scalar> gather_rows(const RowMatrixX<Scalar>& m,
                               std::span<const std::uint32_t> rows) {
  RowMatrixX<Scalar> out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] >= m.rows()) throw std::out_of_range("gather_rows: row index out of range");
    out.row(static_cast<Eigen::Index>(j)) = m.row(rows[j]);
  }
  return out;
}

}  // namespace detail

// Hidden representation of a column-restricted batch: act(X * W_sub + b).
// input is m' x |columns|; columns give each input column's global item.
template <class Scalar>
MatrixX<Scalar> encode(const ModelParams<Scalar>& params, const MatrixX<Scalar>& input,
                       std::span<const std::uint32_t> columns, Activation act) {
  if (input.cols() != static_cast<Eigen::Index>(columns.size())) {
    throw std::invalid_argument("encode: input width != number of columns");
  }
  const RowMatrixX<Scalar> sub = detail::gather_rows(params.enc_weight, columns);
  MatrixX<Scalar> pre = input * sub;
  pre.rowwise() += params.enc_bias.transpose();
  detail::activate_inplace(pre, act);
  return pre;
}

// Hidden representation of a full-width batch (input is m' x num_items).
template <class Scalar>
MatrixX<Scalar> encode_full(const ModelParams<Scalar>& params, const MatrixX<Scalar>& input,
                            Activation act) {
  if (input.cols() != params.num_items()) {
    throw std::invalid_argument("encode_full: input width != num_items");
  }
  MatrixX<Scalar> pre = input * params.enc_weight;
  pre.rowwise() += params.enc_bias.transpose();
  detail::activate_inplace(pre, act);
  return pre;
}

// Logits for the given columns only: H * W_sub^T + b_sub.
template <class Scalar>
MatrixX<Scalar> decode(const ModelParams<Scalar>& params, const MatrixX<Scalar>& hidden,
                       std::span<const std::uint32_t> columns) {
  if (hidden.cols() != params.hidden_dim()) {
    throw std::invalid_argument("decode: hidden width != hidden_dim");
  }
  const RowMatrixX<Scalar> sub = detail::gather_rows(params.dec_weight, columns);
  MatrixX<Scalar> logits = hidden * sub.transpose();
  VectorX<Scalar> bias(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) bias[j] = params.dec_bias[columns[j]];
  logits.rowwise() += bias.transpose();
  return logits;
}

// Logits for every item: H * W_dec^T + b_dec.
template <class Scalar>
MatrixX<Scalar> decode_full(const ModelParams<Scalar>& params, const MatrixX<Scalar>& hidden) {
  if (hidden.cols() != params.hidden_dim()) {
    throw std::invalid_argument("decode_full: hidden width != hidden_dim");
  }
  MatrixX<Scalar> logits = hidden * params.dec_weight.transpose();
  logits.rowwise() += params.dec_bias.transpose();
  return logits;
}

template <class Scalar>
struct LossAndGrad {
  double loss = 0.0;          // summed over items, averaged over batch rows
  MatrixX<Scalar> dlogits;    // (sigmoid(logits) - targets) / rows
};

// Bernoulli negative log-likelihood in logit space, evaluated with the
// overflow-free form max(l,0) - l*x + log1p(exp(-|l|)). The loss sum is
// accumulated in double regardless of Scalar.
template <class Scalar>
LossAndGrad<Scalar> bce_loss_and_grad(const MatrixX<Scalar>& logits,
                                      const MatrixX<Scalar>& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw std::invalid_argument("bce_loss_and_grad: shape mismatch");
  }
  if (logits.rows() == 0) throw std::invalid_argument("bce_loss_and_grad: empty batch");
  const auto l = logits.array();
  const auto x = targets.array();
  LossAndGrad<Scalar> out;
  out.loss = (l.max(Scalar(0)) - l * x + (-l.abs()).exp().log1p())
                 .template cast<double>()
                 .sum() /
             static_cast<double>(logits.rows());
  out.dlogits = ((l.logistic() - x) / static_cast<Scalar>(logits.rows())).matrix();
  return out;
}

// Everything backward needs from the forward pass. cols is null for
// full-width batches.
template <class Scalar>
struct ForwardCache {
  MatrixX<Scalar> dropped_input;
  MatrixX<Scalar> hidden;
  MatrixX<Scalar> logits;
  std::shared_ptr<const ColumnIndex> cols;
};

// Row-keyed gradient block: rows.row(j) is the gradient of the parameter row
// keys[j]. Keys are strictly increasing.
template <class Scalar>
struct GradientSlab {
  IndexList keys;
  RowMatrixX<Scalar> rows;
};

template <class Scalar>
struct GradientEntries {
  IndexList keys;
  VectorX<Scalar> values;
};

template <class Scalar>
struct Gradients {
  GradientSlab<Scalar> enc_weight;    // keyed by columns with nonzero dropped input
  VectorX<Scalar> enc_bias;           // dense, length d
  GradientSlab<Scalar> dec_weight;    // keyed by every batch column
  GradientEntries<Scalar> dec_bias;   // keyed by every batch column
};

template <class Scalar>
struct FullGradients {
  RowMatrixX<Scalar> enc_weight;  // num_items x d
  VectorX<Scalar> enc_bias;
  RowMatrixX<Scalar> dec_weight;  // num_items x d
  VectorX<Scalar> dec_bias;
};

// Backward pass for a column-restricted batch. Decoder grads cover every
// batch column; encoder weight grads cover only columns whose dropped input
// is not identically zero (the rest are exactly zero and never touched).
template <class Scalar>
Gradients<Scalar> backward(const ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                           const MatrixX<Scalar>& dlogits, Activation act) {
  if (cache.cols == nullptr) {
    throw std::invalid_argument("backward: cache has no column index (use backward_full)");
  }
  const IndexList& columns = cache.cols->columns;
  const auto s = static_cast<Eigen::Index>(columns.size());
  if (dlogits.cols() != s || cache.dropped_input.cols() != s) {
    throw std::invalid_argument("backward: width mismatch with column index");
  }

  Gradients<Scalar> g;
  g.dec_weight.keys = columns;
  g.dec_weight.rows.noalias() = dlogits.transpose() * cache.hidden;
  g.dec_bias.keys = columns;
  g.dec_bias.values = dlogits.colwise().sum().transpose();

  const RowMatrixX<Scalar> dec_sub = detail::gather_rows(params.dec_weight, columns);
  MatrixX<Scalar> dpre = dlogits * dec_sub;
  dpre.array() *= detail::activation_grad(cache.hidden, act).array();
  g.enc_bias = dpre.colwise().sum().transpose();

  // Row-major like the slab it feeds, and like backward_full's layout, so
  // the product accumulates in the same order in both paths.
  const RowMatrixX<Scalar> dwe = cache.dropped_input.transpose() * dpre;  // s x d
  IndexList active;
  active.reserve(columns.size());
  std::vector<Eigen::Index> active_pos;
  active_pos.reserve(columns.size());
  for (Eigen::Index j = 0; j < s; ++j) {
    if ((cache.dropped_input.col(j).array() != Scalar(0)).any()) {
      active.push_back(columns[static_cast<std::size_t>(j)]);
      active_pos.push_back(j);
    }
  }
  g.enc_weight.keys = std::move(active);
  g.enc_weight.rows.resize(static_cast<Eigen::Index>(active_pos.size()), params.hidden_dim());
  for (std::size_t j = 0; j < active_pos.size(); ++j) {
    g.enc_weight.rows.row(static_cast<Eigen::Index>(j)) = dwe.row(active_pos[j]);
  }
  return g;
}

// Backward pass for a full-width batch; produces dense gradients for all
// four parameter groups.
template <class Scalar>
FullGradients<Scalar> backward_full(const ModelParams<Scalar>& params,
                                    const ForwardCache<Scalar>& cache,
                                    const MatrixX<Scalar>& dlogits, Activation act) {
  if (dlogits.cols() != params.num_items() || cache.dropped_input.cols() != params.num_items()) {
    throw std::invalid_argument("backward_full: width mismatch with num_items");
  }

  FullGradients<Scalar> g;
  g.dec_weight.noalias() = dlogits.transpose() * cache.hidden;
  g.dec_bias = dlogits.colwise().sum().transpose();

  MatrixX<Scalar> dpre = dlogits * params.dec_weight;
  dpre.array() *= detail::activation_grad(cache.hidden, act).array();
  g.enc_bias = dpre.colwise().sum().transpose();
  g.enc_weight.noalias() = cache.dropped_input.transpose() * dpre;
  return g;
}

// Scores for one user from their fold-in items (unit input vector, no
// dropout); fold-in positions are masked to -inf so ranking never returns
// an input item. fold_in must be non-empty, sorted unique, in range.
template <class Scalar>
VectorX<Scalar> predict_scores(const ModelParams<Scalar>& params,
                               std::span<const std::uint32_t> fold_in, Activation act) {
  if (fold_in.empty()) throw std::invalid_argument("predict_scores: empty fold-in");
  VectorX<Scalar> pre = params.enc_bias;
  for (const auto i : fold_in) {
    if (static_cast<Eigen::Index>(i) >= params.num_items()) {
      throw std::out_of_range("predict_scores: item index out of range");
    }
    pre += params.enc_weight.row(i).transpose();
  }
  VectorX<Scalar> hidden;
  if (act == Activation::kTanh) hidden = pre.array().tanh();
  else hidden = pre.array().logistic();

  VectorX<Scalar> scores = params.dec_weight * hidden + params.dec_bias;
  for (const auto i : fold_in) {
    scores[i] = -std::numeric_limits<Scalar>::infinity();
  }
  return scores;
}

}  // namespace saecf

#endif
