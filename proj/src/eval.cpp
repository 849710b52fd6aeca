#include "saecf/eval.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace saecf {

namespace {

void check_metric_args(std::span<const std::uint32_t> held_out_sorted, std::size_t k,
                       const char* what) {
  if (k < 1) throw std::invalid_argument(std::string(what) + ": k must be >= 1");
  if (held_out_sorted.empty()) {
    throw std::invalid_argument(std::string(what) + ": empty held-out set");
  }
}

bool contains(std::span<const std::uint32_t> sorted, std::uint32_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

double recall_at_k(std::span<const std::uint32_t> ranked,
                   std::span<const std::uint32_t> held_out_sorted, std::size_t k,
                   RecallNorm norm) {
  check_metric_args(held_out_sorted, k, "recall_at_k");
  const std::size_t depth = std::min(k, ranked.size());
  std::size_t hits = 0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (contains(held_out_sorted, ranked[r])) ++hits;
  }
  const std::size_t denom =
      norm == RecallNorm::kMin ? std::min(k, held_out_sorted.size()) : held_out_sorted.size();
  return static_cast<double>(hits) / static_cast<double>(denom);
}

double ndcg_at_k(std::span<const std::uint32_t> ranked,
                 std::span<const std::uint32_t> held_out_sorted, std::size_t k) {
  check_metric_args(held_out_sorted, k, "ndcg_at_k");
  const std::size_t depth = std::min(k, ranked.size());
  double dcg = 0.0;
  for (std::size_t r = 0; r < depth; ++r) {
    if (contains(held_out_sorted, ranked[r])) {
      dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    }
  }
  const std::size_t ideal = std::min(k, held_out_sorted.size());
  double idcg = 0.0;
  for (std::size_t r = 0; r < ideal; ++r) {
    idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

namespace {

std::size_t find_k(const std::vector<std::size_t>& ks, std::size_t k, const char* what) {
  const auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) {
    throw std::invalid_argument(std::string(what) + ": k=" + std::to_string(k) +
                                " was not evaluated");
  }
  return static_cast<std::size_t>(it - ks.begin());
}

}  // namespace

double EvalReport::recall_at(std::size_t k) const {
  return recall_mean[find_k(recall_ks, k, "EvalReport::recall_at")];
}

double EvalReport::ndcg_at(std::size_t k) const {
  return ndcg_mean[find_k(ndcg_ks, k, "EvalReport::ndcg_at")];
}

std::string report_to_json(const EvalReport& report, bool include_per_user) {
  nlohmann::json j;
  j["num_users"] = report.num_users;
  for (std::size_t i = 0; i < report.recall_ks.size(); ++i) {
    j["recall"]["@" + std::to_string(report.recall_ks[i])] = report.recall_mean[i];
  }
  for (std::size_t i = 0; i < report.ndcg_ks.size(); ++i) {
    j["ndcg"]["@" + std::to_string(report.ndcg_ks[i])] = report.ndcg_mean[i];
  }
  if (include_per_user) {
    auto& rows = j["per_user"] = nlohmann::json::array();
    for (Eigen::Index u = 0; u < report.per_user.rows(); ++u) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < report.per_user.cols(); ++c) {
        row.push_back(report.per_user(u, c));
      }
      rows.push_back(std::move(row));
    }
  }
  return j.dump(2);
}

}  // namespace saecf
