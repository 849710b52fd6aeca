#ifndef SAECF_OPTIM_HPP
#define SAECF_OPTIM_HPP

#include "saecf/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace saecf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // coupled L2: added to the gradient
};

// First/second moment buffers plus step counters. Dense updates use the
// global counter; row-keyed updates keep one counter per row so bias
// correction reflects how often each row was actually touched. Weight decay
// on row-keyed tensors is therefore lazy: a row pays decay only when it
// appears in a batch.
template <class Tensor>
struct AdamState {
  Tensor m1;
  Tensor m2;
  std::vector<std::int64_t> row_steps;  // sized for row-keyed use, else empty
  std::int64_t step = 0;

  static AdamState zeros_like(const Tensor& t, bool per_row = false) {
    AdamState s;
    s.m1 = Tensor::Zero(t.rows(), t.cols());
    s.m2 = Tensor::Zero(t.rows(), t.cols());
    if (per_row) s.row_steps.assign(static_cast<std::size_t>(t.rows()), 0);
    return s;
  }
};

namespace detail {

inline std::pair<double, double> bias_corrections(const AdamConfig& cfg, std::int64_t t) {
  const double c1 = 1.0 / (1.0 - std::pow(cfg.beta1, static_cast<double>(t)));
  const double c2 = 1.0 / (1.0 - std::pow(cfg.beta2, static_cast<double>(t)));
  return {c1, c2};
}

}  // namespace detail

// One Adam step on a whole tensor. param -= lr * m1_hat / (sqrt(m2_hat) + eps).
template <class Tensor>
void adam_step_dense(Tensor& param, const Tensor& grad, AdamState<Tensor>& state,
                     const AdamConfig& cfg, const char* what = "adam_step_dense") {
  using S = typename Tensor::Scalar;
  if (param.rows() != grad.rows() || param.cols() != grad.cols()) {
    throw std::invalid_argument(std::string(what) + ": gradient shape mismatch");
  }
  if (!grad.allFinite()) {
    throw std::runtime_error(std::string(what) + ": non-finite gradient");
  }
  const auto [c1, c2] = detail::bias_corrections(cfg, ++state.step);
  const auto g =
      (grad.array() + static_cast<S>(cfg.weight_decay) * param.array()).eval();
  state.m1.array() = static_cast<S>(cfg.beta1) * state.m1.array() +
                     static_cast<S>(1.0 - cfg.beta1) * g;
  state.m2.array() = static_cast<S>(cfg.beta2) * state.m2.array() +
                     static_cast<S>(1.0 - cfg.beta2) * g.square();
  param.array() -= static_cast<S>(cfg.lr) * (state.m1.array() * static_cast<S>(c1)) /
                   ((state.m2.array() * static_cast<S>(c2)).sqrt() + static_cast<S>(cfg.epsilon));
}

// One Adam step on the given rows only. Keys must be strictly increasing
// (sorted, no duplicates) and grad.row(j) is the gradient for param row
// keys[j]. Rows not listed are untouched: no moment decay, no weight decay,
// no step count.
template <class Scalar>
void adam_step_sparse_rows(RowMatrixX<Scalar>& param, std::span<const std::uint32_t> keys,
                           const RowMatrixX<Scalar>& grad, AdamState<RowMatrixX<Scalar>>& state,
                           const AdamConfig& cfg, const char* what = "adam_step_sparse_rows") {
  if (static_cast<Eigen::Index>(keys.size()) != grad.rows() || grad.cols() != param.cols()) {
    throw std::invalid_argument(std::string(what) + ": gradient shape mismatch");
  }
  if (state.row_steps.size() != static_cast<std::size_t>(param.rows())) {
    throw std::logic_error(std::string(what) + ": state lacks per-row step counters");
  }
  if (!grad.allFinite()) {
    throw std::runtime_error(std::string(what) + ": non-finite gradient");
  }
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (j > 0 && keys[j] <= keys[j - 1]) {
      throw std::invalid_argument(std::string(what) + ": keys not strictly increasing");
    }
    if (keys[j] >= param.rows()) {
      throw std::out_of_range(std::string(what) + ": key out of range");
    }
    const auto r = static_cast<Eigen::Index>(keys[j]);
    const auto [c1, c2] = detail::bias_corrections(cfg, ++state.row_steps[keys[j]]);
    const auto g = (grad.row(static_cast<Eigen::Index>(j)).array() +
                    static_cast<Scalar>(cfg.weight_decay) * param.row(r).array())
                       .eval();
    state.m1.row(r).array() = static_cast<Scalar>(cfg.beta1) * state.m1.row(r).array() +
                              static_cast<Scalar>(1.0 - cfg.beta1) * g;
    state.m2.row(r).array() = static_cast<Scalar>(cfg.beta2) * state.m2.row(r).array() +
                              static_cast<Scalar>(1.0 - cfg.beta2) * g.square();
    param.row(r).array() -=
        static_cast<Scalar>(cfg.lr) * (state.m1.row(r).array() * static_cast<Scalar>(c1)) /
        ((state.m2.row(r).array() * static_cast<Scalar>(c2)).sqrt() +
         static_cast<Scalar>(cfg.epsilon));
  }
}

// Same contract for individual vector entries.
template <class Scalar>
void adam_step_sparse_entries(VectorX<Scalar>& param, std::span<const std::uint32_t> keys,
                              const VectorX<Scalar>& values, AdamState<VectorX<Scalar>>& state,
                              const AdamConfig& cfg,
                              const char* what = "adam_step_sparse_entries") {
  if (static_cast<Eigen::Index>(keys.size()) != values.size()) {
    throw std::invalid_argument(std::string(what) + ": gradient shape mismatch");
  }
  if (state.row_steps.size() != static_cast<std::size_t>(param.size())) {
    throw std::logic_error(std::string(what) + ": state lacks per-entry step counters");
  }
  if (!values.allFinite()) {
    throw std::runtime_error(std::string(what) + ": non-finite gradient");
  }
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (j > 0 && keys[j] <= keys[j - 1]) {
      throw std::invalid_argument(std::string(what) + ": keys not strictly increasing");
    }
    if (keys[j] >= param.size()) {
      throw std::out_of_range(std::string(what) + ": key out of range");
    }
    const auto r = static_cast<Eigen::Index>(keys[j]);
    const auto [c1, c2] = detail::bias_corrections(cfg, ++state.row_steps[keys[j]]);
    const Scalar g = values[static_cast<Eigen::Index>(j)] +
                     static_cast<Scalar>(cfg.weight_decay) * param[r];
    state.m1[r] = static_cast<Scalar>(cfg.beta1) * state.m1[r] +
                  static_cast<Scalar>(1.0 - cfg.beta1) * g;
    state.m2[r] = static_cast<Scalar>(cfg.beta2) * state.m2[r] +
                  static_cast<Scalar>(1.0 - cfg.beta2) * (g * g);  // same association as g.square()
    param[r] -= static_cast<Scalar>(cfg.lr) * (state.m1[r] * static_cast<Scalar>(c1)) /
                (std::sqrt(state.m2[r] * static_cast<Scalar>(c2)) + static_cast<Scalar>(cfg.epsilon));
  }
}

}  // namespace saecf

#endif
