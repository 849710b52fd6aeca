#ifndef SAECF_EVAL_HPP
#define SAECF_EVAL_HPP

#include "saecf/dataio.hpp"
#include "saecf/model.hpp"
#include "saecf/parallel.hpp"
#include "saecf/types.hpp"

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saecf {

// Recall@K denominator: min(K, |held_out|) caps the achievable value at 1
// for users holding out fewer than K items; kHeldOutSize is the plain
// |held_out| variant.
enum class RecallNorm { kMin, kHeldOutSize };

// ranked: recommendation list, best first. held_out_sorted: relevant items,
// sorted ascending. Requires k >= 1 and a non-empty held-out set.
double recall_at_k(std::span<const std::uint32_t> ranked,
                   std::span<const std::uint32_t> held_out_sorted, std::size_t k,
                   RecallNorm norm = RecallNorm::kMin);

// Binary-relevance NDCG@K: DCG with gains 1/log2(rank+1), normalized by the
// ideal DCG of min(k, |held_out|) leading hits.
double ndcg_at_k(std::span<const std::uint32_t> ranked,
                 std::span<const std::uint32_t> held_out_sorted, std::size_t k);

// Indices of the k largest scores, ties broken toward the smaller index, so
// rankings are a deterministic function of the score vector.
template <class Scalar>
IndexList rank_top_k(const VectorX<Scalar>& scores, std::size_t k) {
  const auto n = static_cast<std::size_t>(scores.size());
  const std::size_t kk = std::min(k, n);
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  const auto cmp = [&scores](std::uint32_t a, std::uint32_t b) {
    const Scalar sa = scores[a], sb = scores[b];
    if (sa != sb) return sa > sb;
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(kk), idx.end(), cmp);
  idx.resize(kk);
  return idx;
}

struct MetricKs {
  std::vector<std::size_t> recall = {20, 50};
  std::vector<std::size_t> ndcg = {100};
};

struct EvalReport {
  std::vector<std::size_t> recall_ks;
  std::vector<std::size_t> ndcg_ks;
  std::vector<double> recall_mean;  // parallel to recall_ks
  std::vector<double> ndcg_mean;    // parallel to ndcg_ks
  // One row per user: recall columns first, then ndcg columns.
  MatrixX<double> per_user;
  std::size_t num_users = 0;

  double recall_at(std::size_t k) const;
  double ndcg_at(std::size_t k) const;
};

// Serialized metrics report; per-user rows are included only on request
// (they dominate the size for large splits).
std::string report_to_json(const EvalReport& report, bool include_per_user);

// Scores every user from their fold-in items, ranks the top max(K), and
// averages the metrics. Deterministic given (params, users); parallelism
// only partitions users.
template <class Scalar>
EvalReport evaluate_split(const ModelParams<Scalar>& params, std::span<const EvalUser> users,
                          const MetricKs& ks = {}, Activation act = Activation::kTanh,
                          RecallNorm norm = RecallNorm::kMin, unsigned num_threads = 0) {
  if (users.empty()) throw std::invalid_argument("evaluate_split: no eval users");
  if (ks.recall.empty() && ks.ndcg.empty()) {
    throw std::invalid_argument("evaluate_split: no metrics requested");
  }
  std::size_t max_k = 0;
  for (const auto k : ks.recall) max_k = std::max(max_k, k);
  for (const auto k : ks.ndcg) max_k = std::max(max_k, k);

  EvalReport report;
  report.recall_ks = ks.recall;
  report.ndcg_ks = ks.ndcg;
  report.num_users = users.size();
  const auto n_metrics = ks.recall.size() + ks.ndcg.size();
  report.per_user.resize(static_cast<Eigen::Index>(users.size()),
                         static_cast<Eigen::Index>(n_metrics));

  parallel_for(users.size(), num_threads, [&](std::size_t u) {
    const auto& eu = users[u];
    const VectorX<Scalar> scores = predict_scores(params, eu.fold_in, act);
    const IndexList ranked = rank_top_k(scores, max_k);
    Eigen::Index c = 0;
    for (const auto k : ks.recall) {
      report.per_user(static_cast<Eigen::Index>(u), c++) =
          recall_at_k(ranked, eu.held_out, k, norm);
    }
    for (const auto k : ks.ndcg) {
      report.per_user(static_cast<Eigen::Index>(u), c++) = ndcg_at_k(ranked, eu.held_out, k);
    }
  });

  const Eigen::VectorXd means = report.per_user.colwise().mean();
  report.recall_mean.assign(means.data(), means.data() + ks.recall.size());
  report.ndcg_mean.assign(means.data() + ks.recall.size(), means.data() + n_metrics);
  return report;
}

}  // namespace saecf

#endif
