#ifndef SAECF_DATAIO_HPP
#define SAECF_DATAIO_HPP

#include "saecf/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace saecf {

// Parsed (user, item, value) events. External ids are interned into pools in
// first-appearance order and records hold pool indices; with tens of millions
// of events the long external ids dominate memory otherwise. The value is the
// raw observation from the source file (a rating for CSV sources, a play
// count for triplet sources); downstream everything is binary.
struct RawInteractions {
  std::vector<std::string> users;  // distinct external user ids
  std::vector<std::string> items;  // distinct external item ids

  struct Record {
    std::uint32_t user = 0;  // index into users
    std::uint32_t item = 0;  // index into items
    double value = 0.0;
  };
  std::vector<Record> records;

  const std::string& user_of(const Record& r) const { return users[r.user]; }
  const std::string& item_of(const Record& r) const { return items[r.item]; }
};

// Binarized interactions in CSR form over dense user/item indices.
// Invariants: row_offsets has num_users+1 entries, starts at 0, ends at nnz,
// is non-decreasing; column indices are strictly increasing within each row
// (sorted, no duplicates) and < num_items.
struct InteractionDataset {
  std::uint32_t num_users = 0;
  std::uint32_t num_items = 0;
  std::vector<std::uint32_t> row_offsets;
  std::vector<std::uint32_t> col_indices;
  std::vector<std::uint32_t> item_user_counts;  // distinct users per item

  std::vector<std::string> user_ids;  // internal index -> external id
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, std::uint32_t> user_index;  // external -> internal
  std::unordered_map<std::string, std::uint32_t> item_index;

  std::uint64_t nnz() const { return col_indices.size(); }

  std::span<const std::uint32_t> row(std::uint32_t u) const {
    return {col_indices.data() + row_offsets[u], col_indices.data() + row_offsets[u + 1]};
  }

  double sparsity() const {
    if (num_users == 0 || num_items == 0) return 0.0;
    return static_cast<double>(nnz()) / (static_cast<double>(num_users) * num_items);
  }

  // Throws std::runtime_error on any CSR invariant violation.
  void validate() const;
};

// One held-out evaluation user: item indices are in the train dataset's item
// space, each list sorted ascending, the two lists disjoint and non-empty.
struct EvalUser {
  IndexList fold_in;
  IndexList held_out;
};

struct SplitStats {
  std::uint32_t discarded_val = 0;   // val users dropped (too few usable items)
  std::uint32_t discarded_test = 0;
  std::uint64_t dropped_interactions = 0;  // val/test events outside train vocab
};

struct SplitDataset {
  InteractionDataset train;
  std::vector<EvalUser> val;
  std::vector<EvalUser> test;
  SplitStats stats;
};

// Parsers. Both throw std::runtime_error with file/line context on malformed
// input. parse_ratings_csv keeps rows with rating >= positive_threshold and
// tolerates a header line; parse_triplets_tsv keeps every row (any play count
// is an interaction).
RawInteractions parse_ratings_csv(const std::string& path, double positive_threshold);
RawInteractions parse_triplets_tsv(const std::string& path);

// Drops items seen by < min_users_per_item distinct users, then users with
// < min_items_per_user distinct surviving items (one pass each, items first).
// Duplicate (user, item) pairs count once. Record order is preserved; id
// pools are carried over unchanged; thresholds of 0 keep everything.
RawInteractions filter_min_counts(const RawInteractions& raw,
                                  std::uint32_t min_items_per_user,
                                  std::uint32_t min_users_per_item);

// Assigns dense indices in order of first appearance in the record stream,
// deduplicates (user, item) pairs, and builds the CSR structure.
InteractionDataset build_dataset(const RawInteractions& raw);

// Carves n_val + n_test evaluation users out of the dataset (seeded, uniform)
// and re-indexes the remaining train users/items densely. Items never seen in
// train are dropped from eval users; each eval user's items are split
// floor(fold_in_ratio * n) fold-in / rest held-out, and users left empty on
// either side are discarded (counted in stats). Requires 0 < fold_in_ratio < 1
// and n_val + n_test < num_users.
SplitDataset split_by_user(const InteractionDataset& ds, std::uint32_t n_val,
                           std::uint32_t n_test, double fold_in_ratio, std::uint64_t seed);

// Binary dataset file (magic "SAECF-DS"). Id maps are stored; derived fields
// are rebuilt on load, and load validates all CSR invariants before returning.
void save_dataset(const InteractionDataset& ds, const std::string& path);
InteractionDataset load_dataset(const std::string& path);

// Binary eval-user file (magic "SAECF-EU"); num_items pins the item space so
// mismatched train/eval files are rejected early.
struct EvalUserFile {
  std::uint32_t num_items = 0;
  std::vector<EvalUser> users;
};
void save_eval_users(const std::vector<EvalUser>& users, std::uint32_t num_items,
                     const std::string& path);
EvalUserFile load_eval_users(const std::string& path);

}  // namespace saecf

#endif
