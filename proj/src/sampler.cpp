#include "saecf/sampler.hpp"

#include "saecf/random.hpp"

#include <cmath>
#include <stdexcept>

namespace saecf {

namespace {

constexpr std::uint64_t kShuffleStream = 0x7368756666ULL;  // "shuff"

double lchoose(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

void check_inclusion_args(std::uint64_t count_ui, std::uint64_t num_users, std::uint32_t m) {
  if (m < 1 || m > num_users) {
    throw std::invalid_argument("inclusion probability: need 1 <= m <= num_users");
  }
  if (num_users == 0 || count_ui > num_users - 1) {
    throw std::invalid_argument("inclusion probability: count_ui must be <= num_users - 1");
  }
}

}  // namespace

EpochPlan plan_epoch(std::uint32_t num_users, std::uint32_t batch_size, std::uint64_t seed,
                     std::uint64_t epoch) {
  if (batch_size < 1) throw std::invalid_argument("plan_epoch: batch_size must be >= 1");
  EpochPlan plan;
  plan.batch_size = batch_size;
  plan.permutation.resize(num_users);
  for (std::uint32_t u = 0; u < num_users; ++u) plan.permutation[u] = u;
  std::mt19937_64 rng(mix_seed(mix_seed(seed, epoch), kShuffleStream));
  fisher_yates(plan.permutation, rng);
  return plan;
}

SparseBatch gather_batch(const InteractionDataset& ds, std::span<const std::uint32_t> users) {
  SparseBatch batch;
  batch.user_rows.assign(users.begin(), users.end());
  for (std::uint32_t r = 0; r < users.size(); ++r) {
    if (users[r] >= ds.num_users) {
      throw std::out_of_range("gather_batch: user index out of range");
    }
    for (const auto col : ds.row(users[r])) {
      batch.entries.push_back({r, col});
    }
  }
  return batch;
}

double inclusion_probability_approx(std::uint64_t count_ui, std::uint64_t num_users,
                                   std::uint32_t m) {
  check_inclusion_args(count_ui, num_users, m);
  const double num_batches = std::ceil(static_cast<double>(num_users) / m);
  return std::min(static_cast<double>(count_ui) / num_batches, 1.0);
}

double inclusion_probability_exact(std::uint64_t count_ui, std::uint64_t num_users,
                                   std::uint32_t m) {
  check_inclusion_args(count_ui, num_users, m);
  if (count_ui == 0) return 0.0;
  const double pool = static_cast<double>(num_users - 1 - count_ui);  // non-U_i companions
  const double draws = static_cast<double>(m - 1);                    // companion slots
  if (pool < draws) return 1.0;  // pigeonhole: some U_i user must be drawn
  const double log_miss = lchoose(pool, draws) - lchoose(static_cast<double>(num_users - 1), draws);
  return -std::expm1(log_miss);
}

}  // namespace saecf
