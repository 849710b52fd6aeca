#include "saecf/eval.hpp"

#include "saecf/model.hpp"
#include "saecf/random.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <vector>

using namespace saecf;

namespace {

// Independent reimplementation on plain containers, no binary search, no
// shared helpers.
double oracle_recall(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& held,
                     std::size_t k, RecallNorm norm) {
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) hits += held.count(ranked[r]);
  const double denom = norm == RecallNorm::kMin
                           ? static_cast<double>(std::min(k, held.size()))
                           : static_cast<double>(held.size());
  return static_cast<double>(hits) / denom;
}

double oracle_ndcg(const std::vector<std::uint32_t>& ranked, const std::set<std::uint32_t>& held,
                   std::size_t k) {
  double dcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, ranked.size()); ++r) {
    if (held.count(ranked[r])) dcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
  }
  double idcg = 0.0;
  for (std::size_t r = 0; r < std::min(k, held.size()); ++r) {
    idcg += std::log(2.0) / std::log(static_cast<double>(r) + 2.0);
  }
  return dcg / idcg;
}

}  // namespace

TEST_CASE("recall handles both normalizations") {
  const IndexList ranked = {3, 7};
  const IndexList held = {1, 3};
  CHECK(recall_at_k(ranked, held, 2, RecallNorm::kMin) == 0.5);
  CHECK(recall_at_k(ranked, held, 2, RecallNorm::kHeldOutSize) == 0.5);
  CHECK(recall_at_k(ranked, held, 1, RecallNorm::kMin) == 1.0);  // denom min(1, 2)
  CHECK(recall_at_k(ranked, held, 1, RecallNorm::kHeldOutSize) == 0.5);
  // k beyond the list length counts only what is there.
  CHECK(recall_at_k(ranked, held, 100, RecallNorm::kHeldOutSize) == 0.5);

  const IndexList perfect = {1, 3};
  CHECK(recall_at_k(perfect, held, 2, RecallNorm::kMin) == 1.0);
  const IndexList misses = {0, 2};
  CHECK(recall_at_k(misses, held, 2, RecallNorm::kMin) == 0.0);

  CHECK_THROWS_AS(recall_at_k(ranked, held, 0), std::invalid_argument);
  const IndexList empty;
  CHECK_THROWS_AS(recall_at_k(ranked, empty, 2), std::invalid_argument);
}

TEST_CASE("ndcg matches hand-computed values") {
  {
    const IndexList ranked = {2, 0, 5, 1};
    const IndexList held = {2, 5};
    CHECK(ndcg_at_k(ranked, held, 4) == doctest::Approx(0.9197207891481876).epsilon(1e-14));
  }
  {
    const IndexList ranked = {7, 2, 9};
    const IndexList held = {2};
    CHECK(ndcg_at_k(ranked, held, 3) == doctest::Approx(0.6309297535714575).epsilon(1e-14));
  }
  {
    const IndexList ranked = {4, 0, 6, 5, 1};
    const IndexList held = {1, 4, 6};
    CHECK(ndcg_at_k(ranked, held, 5) == doctest::Approx(0.8854598815714874).epsilon(1e-14));
  }
  {
    // Ideal ranking scores exactly 1, total miss exactly 0.
    const IndexList held = {0, 1};
    const IndexList ideal = {0, 1, 5};
    CHECK(ndcg_at_k(ideal, held, 3) == 1.0);
    const IndexList miss = {5, 6, 7};
    CHECK(ndcg_at_k(miss, held, 3) == 0.0);
  }
  CHECK_THROWS_AS(ndcg_at_k(IndexList{1}, IndexList{}, 1), std::invalid_argument);
}

TEST_CASE("metrics agree with a brute-force reimplementation") {
  std::mt19937_64 rng(2468);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t n = 4 + static_cast<std::uint32_t>(uniform_below(rng, 12));
    IndexList ranked(n);
    for (std::uint32_t i = 0; i < n; ++i) ranked[i] = i;
    fisher_yates(ranked, rng);
    const std::size_t depth = 1 + uniform_below(rng, n);
    ranked.resize(depth);

    std::set<std::uint32_t> held;
    const std::size_t h = 1 + uniform_below(rng, std::min<std::uint64_t>(n, 5));
    while (held.size() < h) held.insert(static_cast<std::uint32_t>(uniform_below(rng, n)));
    IndexList held_sorted(held.begin(), held.end());

    const std::size_t k = 1 + uniform_below(rng, n + 2);
    const std::vector<std::uint32_t> ranked_vec(ranked.begin(), ranked.end());
    for (const auto norm : {RecallNorm::kMin, RecallNorm::kHeldOutSize}) {
      REQUIRE(recall_at_k(ranked, held_sorted, k, norm) ==
              doctest::Approx(oracle_recall(ranked_vec, held, k, norm)).epsilon(1e-12));
    }
    REQUIRE(ndcg_at_k(ranked, held_sorted, k) ==
            doctest::Approx(oracle_ndcg(ranked_vec, held, k)).epsilon(1e-12));
  }
}

TEST_CASE("promoting a relevant item never hurts either metric") {
  std::mt19937_64 rng(1357);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::uint32_t n = 6 + static_cast<std::uint32_t>(uniform_below(rng, 10));
    IndexList ranked(n);
    for (std::uint32_t i = 0; i < n; ++i) ranked[i] = i;
    fisher_yates(ranked, rng);

    std::set<std::uint32_t> held;
    while (held.size() < 3) held.insert(static_cast<std::uint32_t>(uniform_below(rng, n)));
    IndexList held_sorted(held.begin(), held.end());

    // Find a relevant item with an irrelevant item directly above it.
    std::size_t pos = 0;
    bool found = false;
    for (std::size_t r = 1; r < ranked.size(); ++r) {
      if (held.count(ranked[r]) && !held.count(ranked[r - 1])) {
        pos = r;
        found = true;
        break;
      }
    }
    if (!found) continue;

    const std::size_t k = 1 + uniform_below(rng, n);
    const double recall_before = recall_at_k(ranked, held_sorted, k, RecallNorm::kHeldOutSize);
    const double ndcg_before = ndcg_at_k(ranked, held_sorted, k);
    std::swap(ranked[pos], ranked[pos - 1]);
    REQUIRE(recall_at_k(ranked, held_sorted, k, RecallNorm::kHeldOutSize) >= recall_before);
    REQUIRE(ndcg_at_k(ranked, held_sorted, k) >= ndcg_before);
  }
}

TEST_CASE("recall with fixed denominator is monotone in k") {
  std::mt19937_64 rng(8642);
  IndexList ranked(40);
  for (std::uint32_t i = 0; i < 40; ++i) ranked[i] = i;
  fisher_yates(ranked, rng);
  const IndexList held = {3, 11, 17, 29, 38};
  double prev = 0.0;
  for (std::size_t k = 1; k <= 40; ++k) {
    const double r = recall_at_k(ranked, held, k, RecallNorm::kHeldOutSize);
    REQUIRE(r >= prev);
    prev = r;
  }
  CHECK(prev == 1.0);  // full depth finds everything
}

TEST_CASE("rank_top_k orders by score with index tie-break") {
  VectorX<double> scores(6);
  scores << 0.5, 2.0, 2.0, -1.0, 0.5, 3.0;
  const auto top = rank_top_k(scores, 4);
  const IndexList expected = {5, 1, 2, 0};
  CHECK(top == expected);

  const auto all = rank_top_k(scores, 100);  // clamps to size
  REQUIRE(all.size() == 6);
  const IndexList expected_all = {5, 1, 2, 0, 4, 3};
  CHECK(all == expected_all);

  // -inf never outranks a finite score.
  VectorX<double> masked(3);
  masked << -std::numeric_limits<double>::infinity(), -5.0, -7.0;
  const auto r = rank_top_k(masked, 3);
  const IndexList expected_masked = {1, 2, 0};
  CHECK(r == expected_masked);
}

TEST_CASE("rank_top_k is invariant to score translation") {
  std::mt19937_64 rng(99);
  VectorX<double> scores(30);
  for (Eigen::Index i = 0; i < 30; ++i) scores[i] = uniform_unit(rng);
  const auto a = rank_top_k(scores, 10);
  VectorX<double> shifted = scores.array() + 100.0;
  const auto b = rank_top_k(shifted, 10);
  CHECK(a == b);
}

TEST_CASE("evaluate_split averages per-user metrics deterministically") {
  const auto params = init_params<double>(60, 8, 77);
  std::vector<EvalUser> users;
  std::mt19937_64 rng(55);
  for (int u = 0; u < 25; ++u) {
    std::set<std::uint32_t> fold, held;
    while (fold.size() < 4) fold.insert(static_cast<std::uint32_t>(uniform_below(rng, 60)));
    while (held.size() < 3) {
      const auto v = static_cast<std::uint32_t>(uniform_below(rng, 60));
      if (!fold.count(v)) held.insert(v);
    }
    users.push_back({IndexList(fold.begin(), fold.end()), IndexList(held.begin(), held.end())});
  }

  MetricKs ks;
  ks.recall = {5, 10};
  ks.ndcg = {10};
  const auto a = evaluate_split(params, users, ks);
  const auto b = evaluate_split(params, users, ks);
  CHECK(a.per_user == b.per_user);
  CHECK(a.recall_mean == b.recall_mean);

  // Thread count must not change anything.
  const auto c = evaluate_split(params, users, ks, Activation::kTanh, RecallNorm::kMin, 4);
  CHECK(a.per_user == c.per_user);
  CHECK(a.ndcg_mean == c.ndcg_mean);

  // Means really are the column means.
  REQUIRE(a.per_user.rows() == 25);
  REQUIRE(a.per_user.cols() == 3);
  CHECK(a.recall_at(5) == doctest::Approx(a.per_user.col(0).mean()).epsilon(1e-15));
  CHECK(a.recall_at(10) == doctest::Approx(a.per_user.col(1).mean()).epsilon(1e-15));
  CHECK(a.ndcg_at(10) == doctest::Approx(a.per_user.col(2).mean()).epsilon(1e-15));
  CHECK_THROWS_AS(a.recall_at(20), std::invalid_argument);

  // Per-user rows agree with calling the metrics directly.
  const VectorX<double> scores = predict_scores(params, users[0].fold_in, Activation::kTanh);
  const auto ranked = rank_top_k(scores, 10);
  CHECK(a.per_user(0, 0) == recall_at_k(ranked, users[0].held_out, 5));
  CHECK(a.per_user(0, 2) == ndcg_at_k(ranked, users[0].held_out, 10));

  const std::vector<EvalUser> none;
  CHECK_THROWS_AS(evaluate_split(params, none, ks), std::invalid_argument);
  MetricKs empty_ks;
  empty_ks.recall = {};
  empty_ks.ndcg = {};
  CHECK_THROWS_AS(evaluate_split(params, users, empty_ks), std::invalid_argument);
}

TEST_CASE("a model that memorizes one user ranks their items first") {
  // Decoder bias alone can encode popularity; give held-out items big biases
  // and everything else small ones, then the metrics must be perfect.
  ModelParams<double> p;
  p.enc_weight = RowMatrixX<double>::Zero(20, 2);
  p.enc_bias = VectorX<double>::Zero(2);
  p.dec_weight = RowMatrixX<double>::Zero(20, 2);
  p.dec_bias = VectorX<double>::Zero(20);
  p.dec_bias[4] = 5.0;
  p.dec_bias[9] = 4.0;
  p.dec_bias[13] = 3.0;

  std::vector<EvalUser> users;
  users.push_back({{0, 1}, {4, 9, 13}});
  MetricKs ks;
  ks.recall = {3};
  ks.ndcg = {3};
  const auto rep = evaluate_split(p, users, ks);
  CHECK(rep.recall_at(3) == 1.0);
  CHECK(rep.ndcg_at(3) == 1.0);

  // Fold-in items are masked, so even a huge bias cannot leak them back.
  p.dec_bias[0] = 100.0;
  const auto rep2 = evaluate_split(p, users, ks);
  CHECK(rep2.recall_at(3) == 1.0);
}

TEST_CASE("report serializes to json with metric keys") {
  EvalReport rep;
  rep.recall_ks = {20, 50};
  rep.ndcg_ks = {100};
  rep.recall_mean = {0.25, 0.5};
  rep.ndcg_mean = {0.375};
  rep.num_users = 2;
  rep.per_user.resize(2, 3);
  rep.per_user << 0.0, 0.5, 0.25, 0.5, 0.5, 0.5;

  const auto parsed = nlohmann::json::parse(report_to_json(rep, false));
  CHECK(parsed["num_users"].get<int>() == 2);
  CHECK(parsed["recall"]["@20"].get<double>() == doctest::Approx(0.25));
  CHECK(parsed["recall"]["@50"].get<double>() == doctest::Approx(0.5));
  CHECK(parsed["ndcg"]["@100"].get<double>() == doctest::Approx(0.375));
  CHECK(!parsed.contains("per_user"));

  const auto with_rows = nlohmann::json::parse(report_to_json(rep, true));
  REQUIRE(with_rows["per_user"].size() == 2);
  CHECK(with_rows["per_user"][0][1].get<double>() == doctest::Approx(0.5));
  CHECK(with_rows["per_user"][1][2].get<double>() == doctest::Approx(0.5));
}
