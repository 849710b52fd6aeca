#include "saecf/sampler.hpp"

#include "saecf/random.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

using namespace saecf;

TEST_CASE("plan_epoch permutes every user exactly once") {
  const auto plan = plan_epoch(103, 10, 42, 0);
  CHECK(plan.num_batches() == 11);
  IndexList sorted = plan.permutation;
  std::sort(sorted.begin(), sorted.end());
  for (std::uint32_t u = 0; u < 103; ++u) CHECK(sorted[u] == u);

  std::size_t covered = 0;
  for (std::size_t k = 0; k < plan.num_batches(); ++k) {
    const auto users = plan.batch_users(k);
    covered += users.size();
    CHECK(users.size() == (k + 1 < plan.num_batches() ? 10 : 3));
  }
  CHECK(covered == 103);
  CHECK_THROWS_AS(plan.batch_users(11), std::out_of_range);
}

TEST_CASE("plan_epoch is deterministic and epoch-dependent") {
  const auto a = plan_epoch(64, 8, 1, 0);
  const auto b = plan_epoch(64, 8, 1, 0);
  const auto c = plan_epoch(64, 8, 1, 1);
  const auto d = plan_epoch(64, 8, 2, 0);
  CHECK(a.permutation == b.permutation);
  CHECK(a.permutation != c.permutation);
  CHECK(a.permutation != d.permutation);
  CHECK_THROWS_AS(plan_epoch(10, 0, 1, 0), std::invalid_argument);
}

TEST_CASE("gather_batch emits rows in order with sorted columns") {
  const auto ds = test::make_dataset({{1, 4}, {0}, {2, 3, 4}}, 5);
  const IndexList users = {2, 0};
  const auto batch = gather_batch(ds, users);
  CHECK(batch.user_rows == users);
  REQUIRE(batch.entries.size() == 5);
  const std::vector<std::pair<std::uint32_t, std::uint32_t>> expected = {
      {0, 2}, {0, 3}, {0, 4}, {1, 1}, {1, 4}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(batch.entries[i].local_row == expected[i].first);
    CHECK(batch.entries[i].col == expected[i].second);
  }

  const IndexList bad = {3};
  CHECK_THROWS_AS(gather_batch(ds, bad), std::out_of_range);
}

TEST_CASE("downsample_columns restricts to the interacted union exactly") {
  const auto ds = test::make_dataset({{1, 4}, {0}, {2, 3, 4}, {7}}, 8);
  const IndexList users = {0, 2};
  const auto batch = gather_batch(ds, users);
  const auto sb = downsample_columns<double>(batch);

  CHECK(sb.columns() == IndexList{1, 2, 3, 4});
  REQUIRE(sb.dense.rows() == 2);
  REQUIRE(sb.dense.cols() == 4);
  MatrixX<double> expected(2, 4);
  expected << 1, 0, 0, 1,
              0, 1, 1, 1;
  CHECK(sb.dense == expected);
  CHECK(sb.cols->local(4) == 3);
  CHECK_THROWS_AS(sb.cols->local(0), std::out_of_range);
}

TEST_CASE("downsample_columns reconstructs random batches faithfully") {
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 40; ++trial) {
    const auto num_items = 5 + static_cast<std::uint32_t>(uniform_below(rng, 40));
    const auto num_users = 2 + static_cast<std::uint32_t>(uniform_below(rng, 30));
    std::vector<IndexList> rows(num_users);
    for (auto& row : rows) {
      for (std::uint32_t i = 0; i < num_items; ++i) {
        if (uniform_unit(rng) < 0.25) row.push_back(i);
      }
    }
    const auto ds = test::make_dataset(rows, num_items);

    IndexList users;
    for (std::uint32_t u = 0; u < num_users; ++u) {
      if (uniform_unit(rng) < 0.5) users.push_back(u);
    }
    if (users.empty()) users.push_back(0);
    fisher_yates(users, rng);

    const auto sb = downsample_columns<double>(gather_batch(ds, users));

    std::set<std::uint32_t> expected_cols;
    for (const auto u : users) {
      for (const auto c : ds.row(u)) expected_cols.insert(c);
    }
    REQUIRE(sb.columns() == IndexList(expected_cols.begin(), expected_cols.end()));

    for (std::size_t r = 0; r < users.size(); ++r) {
      const auto row = ds.row(users[r]);
      const std::set<std::uint32_t> row_set(row.begin(), row.end());
      double sum = 0.0;
      for (std::uint32_t j = 0; j < sb.columns().size(); ++j) {
        const double v = sb.dense(static_cast<Eigen::Index>(r), j);
        REQUIRE(v == (row_set.count(sb.columns()[j]) ? 1.0 : 0.0));
        sum += v;
      }
      REQUIRE(sum == static_cast<double>(row.size()));
    }
  }
}

TEST_CASE("downsampled columns do not depend on user order within the batch") {
  const auto ds = test::make_zipf_dataset(40, 60, 8, 9);
  IndexList users = {3, 17, 25, 31, 38};
  const auto a = downsample_columns<float>(gather_batch(ds, users));
  std::reverse(users.begin(), users.end());
  const auto b = downsample_columns<float>(gather_batch(ds, users));
  CHECK(a.columns() == b.columns());
  // Rows travel with their users.
  for (Eigen::Index r = 0; r < a.dense.rows(); ++r) {
    CHECK(a.dense.row(r) == b.dense.row(a.dense.rows() - 1 - r));
  }
}

TEST_CASE("slice_batch shares the column index and reassembles the parent") {
  const auto ds = test::make_zipf_dataset(23, 40, 6, 3);
  IndexList users(23);
  for (std::uint32_t u = 0; u < 23; ++u) users[u] = u;
  const auto sb = downsample_columns<double>(gather_batch(ds, users));

  const auto slices = slice_batch(sb, 10);
  REQUIRE(slices.size() == 3);
  CHECK(slices[0].rows() == 10);
  CHECK(slices[1].rows() == 10);
  CHECK(slices[2].rows() == 3);

  Eigen::Index r0 = 0;
  for (const auto& s : slices) {
    CHECK(s.cols.get() == sb.cols.get());  // shared, not copied
    CHECK(s.dense == sb.dense.middleRows(r0, s.rows()));
    r0 += s.rows();
  }
  CHECK(r0 == sb.rows());

  const auto one = slice_batch(sb, 23);
  REQUIRE(one.size() == 1);
  CHECK(one[0].dense == sb.dense);

  CHECK_THROWS_AS(slice_batch(sb, 0), std::invalid_argument);
}

namespace {

// Exact binomials via Pascal's triangle; all values stay far below 2^53 for
// n <= 30 so doubles are exact.
double choose(int n, int k) {
  static std::vector<std::vector<double>> tri;
  if (tri.empty()) {
    tri.resize(31);
    for (int i = 0; i <= 30; ++i) {
      tri[i].assign(i + 1, 1.0);
      for (int j = 1; j < i; ++j) tri[i][j] = tri[i - 1][j - 1] + tri[i - 1][j];
    }
  }
  if (k < 0 || k > n) return 0.0;
  return tri[n][k];
}

}  // namespace

TEST_CASE("inclusion_probability_exact matches small-case combinatorics") {
  // Frozen: 1 - C(7,4)/C(9,4) = 1 - 35/126 = 13/18.
  CHECK(inclusion_probability_exact(2, 10, 5) == doctest::Approx(13.0 / 18.0).epsilon(1e-14));

  for (int n = 2; n <= 20; ++n) {
    for (int m = 1; m <= n; ++m) {
      for (int k = 0; k <= n - 1; ++k) {
        const double expected =
            (n - 1 - k >= m - 1) ? 1.0 - choose(n - 1 - k, m - 1) / choose(n - 1, m - 1) : 1.0;
        const double got = inclusion_probability_exact(k, n, m);
        REQUIRE_MESSAGE(got == doctest::Approx(expected).epsilon(1e-12), "n=", n, " m=", m,
                        " k=", k);
      }
    }
  }
}

TEST_CASE("inclusion_probability_exact edge cases and monotonicity") {
  CHECK(inclusion_probability_exact(0, 100, 10) == 0.0);
  CHECK(inclusion_probability_exact(5, 100, 1) == 0.0);   // no companions
  CHECK(inclusion_probability_exact(99, 100, 2) == 1.0);  // everyone else interacts
  CHECK(inclusion_probability_exact(50, 100, 51) == 1.0); // pigeonhole

  double prev = 0.0;
  for (std::uint64_t k = 1; k <= 99; ++k) {
    const double p = inclusion_probability_exact(k, 100, 10);
    CHECK(p >= prev);
    prev = p;
  }
  prev = 0.0;
  for (std::uint32_t m = 1; m <= 100; ++m) {
    const double p = inclusion_probability_exact(7, 100, m);
    CHECK(p >= prev);
    prev = p;
  }

  CHECK_THROWS_AS(inclusion_probability_exact(3, 10, 0), std::invalid_argument);
  CHECK_THROWS_AS(inclusion_probability_exact(3, 10, 11), std::invalid_argument);
  CHECK_THROWS_AS(inclusion_probability_exact(10, 10, 2), std::invalid_argument);
}

TEST_CASE("inclusion_probability_approx is count over batches, capped at one") {
  CHECK(inclusion_probability_approx(3, 100, 10) == 0.3);
  CHECK(inclusion_probability_approx(30, 100, 10) == 1.0);
  CHECK(inclusion_probability_approx(0, 100, 10) == 0.0);
  CHECK(inclusion_probability_approx(2, 10, 5) == 1.0);  // N = 2
  CHECK(inclusion_probability_approx(5, 103, 10) == doctest::Approx(5.0 / 11.0));  // ragged N
  CHECK_THROWS_AS(inclusion_probability_approx(3, 10, 0), std::invalid_argument);
}

TEST_CASE("simulated column inclusion tracks the exact probability") {
  // 50 users, batches of 10 (all full-size). Users 0..6 interact with item 0;
  // user 49 does not. Frequency of item 0 appearing in user 49's downsampled
  // batch over many epochs must match the hypergeometric value.
  constexpr std::uint32_t kUsers = 50, kBatch = 10, kInteract = 7;
  constexpr int kEpochs = 4000;

  std::vector<IndexList> rows(kUsers);
  for (std::uint32_t u = 0; u < kUsers; ++u) {
    if (u < kInteract) rows[u] = {0, 1};
    else rows[u] = {1};
  }
  const auto ds = test::make_dataset(rows, 2);

  int hits = 0;
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    const auto plan = plan_epoch(kUsers, kBatch, 2026, static_cast<std::uint64_t>(epoch));
    for (std::size_t k = 0; k < plan.num_batches(); ++k) {
      const auto users = plan.batch_users(k);
      if (std::find(users.begin(), users.end(), 49u) == users.end()) continue;
      const auto sb = downsample_columns<float>(gather_batch(ds, users));
      const auto& cols = sb.columns();
      if (std::binary_search(cols.begin(), cols.end(), 0u)) ++hits;
      break;
    }
  }

  const double freq = static_cast<double>(hits) / kEpochs;
  const double exact = inclusion_probability_exact(kInteract, kUsers, kBatch);
  const double se = std::sqrt(exact * (1.0 - exact) / kEpochs);
  CHECK_MESSAGE(std::abs(freq - exact) <= 5.0 * se, "freq=", freq, " exact=", exact,
                " se=", se);
}
