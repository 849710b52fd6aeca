#ifndef SAECF_SAMPLER_HPP
#define SAECF_SAMPLER_HPP

#include "saecf/dataio.hpp"
#include "saecf/types.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

namespace saecf {

// A mini-batch of user rows in sparse (COO) form, before column
// downsampling. Entries are ordered by local row, then by column.
struct SparseBatch {
  IndexList user_rows;  // global user indices, one per local row
  struct Entry {
    std::uint32_t local_row;
    std::uint32_t col;  // global item index
  };
  std::vector<Entry> entries;

  std::size_t rows() const { return user_rows.size(); }
};

// The distinct global columns of a batch, shared (not copied) across every
// slice cut from that batch.
struct ColumnIndex {
  IndexList columns;  // sorted ascending, no duplicates
  std::unordered_map<std::uint32_t, std::uint32_t> to_local;

  std::uint32_t local(std::uint32_t global_col) const {
    const auto it = to_local.find(global_col);
    if (it == to_local.end()) {
      throw std::out_of_range("ColumnIndex: column not in batch");
    }
    return it->second;
  }
};

// Dense downsampled batch: rows are batch users, columns are the batch's
// distinct interacted items, entries are {0,1}.
template <class Scalar>
struct SampledBatch {
  std::shared_ptr<const ColumnIndex> cols;
  MatrixX<Scalar> dense;

  const IndexList& columns() const { return cols->columns; }
  Eigen::Index rows() const { return dense.rows(); }
  Eigen::Index width() const { return dense.cols(); }
};

// One epoch's batch schedule: a seeded permutation of all users cut into
// consecutive batches of batch_size (last one ragged).
struct EpochPlan {
  IndexList permutation;
  std::uint32_t batch_size = 0;

  std::size_t num_batches() const {
    return (permutation.size() + batch_size - 1) / batch_size;
  }
  std::span<const std::uint32_t> batch_users(std::size_t k) const {
    const auto begin = k * batch_size;
    const auto end = std::min(begin + batch_size, permutation.size());
    if (begin >= end) throw std::out_of_range("EpochPlan: batch index out of range");
    return {permutation.data() + begin, permutation.data() + end};
  }
};

// Deterministic given (num_users, batch_size, seed, epoch); different epochs
// get different permutations. batch_size must be >= 1.
EpochPlan plan_epoch(std::uint32_t num_users, std::uint32_t batch_size, std::uint64_t seed,
                     std::uint64_t epoch);

// Collects the given users' rows into a COO batch. Throws if any user index
// is out of range.
SparseBatch gather_batch(const InteractionDataset& ds, std::span<const std::uint32_t> users);

// Restricts a batch to the union of its interacted columns and densifies.
// Every entry of the sparse batch lands in the dense matrix; all other cells
// are zero.
template <class Scalar>
SampledBatch<Scalar> downsample_columns(const SparseBatch& batch) {
  auto index = std::make_shared<ColumnIndex>();
  IndexList& cols = index->columns;
  cols.reserve(batch.entries.size());
  for (const auto& e : batch.entries) cols.push_back(e.col);
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());

  index->to_local.reserve(cols.size());
  for (std::uint32_t j = 0; j < cols.size(); ++j) index->to_local.emplace(cols[j], j);

  SampledBatch<Scalar> out;
  out.dense = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(batch.rows()),
                                    static_cast<Eigen::Index>(cols.size()));
  for (const auto& e : batch.entries) {
    out.dense(e.local_row, index->to_local.at(e.col)) = Scalar(1);
  }
  out.cols = std::move(index);
  return out;
}

// Cuts a downsampled batch into row slices of at most slice_rows rows. All
// slices share the parent's ColumnIndex; the union of slice rows reassembles
// the parent exactly. slice_rows must be >= 1.
template <class Scalar>
std::vector<SampledBatch<Scalar>> slice_batch(const SampledBatch<Scalar>& batch,
                                              Eigen::Index slice_rows) {
  if (slice_rows < 1) throw std::invalid_argument("slice_batch: slice_rows must be >= 1");
  std::vector<SampledBatch<Scalar>> out;
  for (Eigen::Index r0 = 0; r0 < batch.rows(); r0 += slice_rows) {
    const Eigen::Index n = std::min(slice_rows, batch.rows() - r0);
    SampledBatch<Scalar> s;
    s.cols = batch.cols;
    s.dense = batch.dense.middleRows(r0, n);
    out.push_back(std::move(s));
  }
  return out;
}

// Probability that some batch containing a fixed non-interacting user also
// contains at least one of the count_ui users of item i.
//
// inclusion_probability_approx is the closed-form approximation
// min(count_ui / N, 1) with N = ceil(num_users / m); good when count_ui is
// small relative to N. inclusion_probability_exact is the hypergeometric
// value 1 - C(n-1-count_ui, m-1) / C(n-1, m-1) for a full-size batch,
// evaluated in log space. Both require 1 <= m <= num_users and
// count_ui <= num_users - 1.
double inclusion_probability_approx(std::uint64_t count_ui, std::uint64_t num_users,
                                   std::uint32_t m);
double inclusion_probability_exact(std::uint64_t count_ui, std::uint64_t num_users,
                                   std::uint32_t m);

}  // namespace saecf

#endif
