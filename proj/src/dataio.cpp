#include "saecf/dataio.hpp"

#include "saecf/binary_io.hpp"
#include "saecf/random.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

namespace saecf {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr std::uint32_t kEvalUsersVersion = 1;
constexpr std::uint64_t kSplitStream = 0x73706c6974ULL;  // "split"

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no, const char* msg) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + msg);
}

double parse_double(std::string_view field, const std::string& path, std::size_t line_no) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) parse_fail(path, line_no, "bad numeric field");
  return v;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream create_or_throw(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path);
  return out;
}

// Interns ids during parsing so each distinct external id is stored once.
// Map keys are node-stable copies; views into the pool would dangle when
// SSO-sized strings move on vector growth. Transparent hashing keeps lookups
// allocation-free.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view sv) const {
    return std::hash<std::string_view>{}(sv);
  }
};

struct StableInterner {
  std::vector<std::string>& pool;
  std::unordered_map<std::string, std::uint32_t, StringHash, std::equal_to<>> index;

  std::uint32_t get(std::string_view id) {
    auto it = index.find(id);
    if (it != index.end()) return it->second;
    if (pool.size() > std::numeric_limits<std::uint32_t>::max()) {
      throw std::runtime_error("id pool exceeds u32 range");
    }
    const auto dense = static_cast<std::uint32_t>(pool.size());
    pool.emplace_back(id);
    index.emplace(pool.back(), dense);
    return dense;
  }
};

}  // namespace

RawInteractions parse_ratings_csv(const std::string& path, double positive_threshold) {
  auto in = open_or_throw(path);
  RawInteractions out;
  StableInterner users{out.users, {}};
  StableInterner items{out.items, {}};

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;

    const auto c1 = sv.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : sv.find(',', c1 + 1);
    if (c2 == std::string_view::npos) parse_fail(path, line_no, "expected at least 3 fields");
    const auto c3 = sv.find(',', c2 + 1);

    const auto user = sv.substr(0, c1);
    const auto item = sv.substr(c1 + 1, c2 - c1 - 1);
    const auto rating_field =
        c3 == std::string_view::npos ? sv.substr(c2 + 1) : sv.substr(c2 + 1, c3 - c2 - 1);
    if (user.empty() || item.empty()) parse_fail(path, line_no, "empty id field");

    // A single header line is tolerated at the top of the file.
    if (line_no == 1) {
      double probe = 0.0;
      auto [ptr, ec] = std::from_chars(rating_field.data(),
                                       rating_field.data() + rating_field.size(), probe);
      if (ec != std::errc() || ptr != rating_field.data() + rating_field.size()) continue;
    }

    const double rating = parse_double(rating_field, path, line_no);
    if (rating < positive_threshold) continue;
    out.records.push_back({users.get(user), items.get(item), rating});
  }
  return out;
}

RawInteractions parse_triplets_tsv(const std::string& path) {
  auto in = open_or_throw(path);
  RawInteractions out;
  StableInterner users{out.users, {}};
  StableInterner items{out.items, {}};

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;

    const auto t1 = sv.find('\t');
    const auto t2 = t1 == std::string_view::npos ? t1 : sv.find('\t', t1 + 1);
    if (t2 == std::string_view::npos) parse_fail(path, line_no, "expected 3 tab-separated fields");

    const auto user = sv.substr(0, t1);
    const auto item = sv.substr(t1 + 1, t2 - t1 - 1);
    const auto count_field = sv.substr(t2 + 1);
    if (user.empty() || item.empty()) parse_fail(path, line_no, "empty id field");

    const double count = parse_double(count_field, path, line_no);
    out.records.push_back({users.get(user), items.get(item), count});
  }
  return out;
}

RawInteractions filter_min_counts(const RawInteractions& raw, std::uint32_t min_items_per_user,
                                  std::uint32_t min_users_per_item) {
  // Distinct (user, item) pairs; first occurrence flags let the output keep
  // the original record order without recounting duplicates.
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(raw.records.size());
  std::vector<char> is_first(raw.records.size(), 0);
  std::vector<std::uint32_t> item_count(raw.items.size(), 0);
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    const auto& r = raw.records[i];
    const std::uint64_t key = (std::uint64_t(r.user) << 32) | r.item;
    if (seen.insert(key).second) {
      is_first[i] = 1;
      ++item_count[r.item];
    }
  }

  std::vector<char> item_kept(raw.items.size(), 0);
  for (std::size_t i = 0; i < raw.items.size(); ++i) {
    item_kept[i] = item_count[i] >= min_users_per_item;
  }

  std::vector<std::uint32_t> user_count(raw.users.size(), 0);
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    const auto& r = raw.records[i];
    if (is_first[i] && item_kept[r.item]) ++user_count[r.user];
  }

  RawInteractions out;
  out.users = raw.users;
  out.items = raw.items;
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    const auto& r = raw.records[i];
    if (is_first[i] && item_kept[r.item] && user_count[r.user] >= min_items_per_user) {
      out.records.push_back(r);
    }
  }
  return out;
}

InteractionDataset build_dataset(const RawInteractions& raw) {
  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();

  InteractionDataset ds;
  std::vector<std::uint32_t> user_dense(raw.users.size(), kUnset);
  std::vector<std::uint32_t> item_dense(raw.items.size(), kUnset);

  std::vector<std::uint64_t> pairs;
  pairs.reserve(raw.records.size());
  for (const auto& r : raw.records) {
    auto& u = user_dense[r.user];
    if (u == kUnset) {
      u = static_cast<std::uint32_t>(ds.user_ids.size());
      ds.user_ids.push_back(raw.users[r.user]);
    }
    auto& i = item_dense[r.item];
    if (i == kUnset) {
      i = static_cast<std::uint32_t>(ds.item_ids.size());
      ds.item_ids.push_back(raw.items[r.item]);
    }
    pairs.push_back((std::uint64_t(u) << 32) | i);
  }

  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  ds.num_users = static_cast<std::uint32_t>(ds.user_ids.size());
  ds.num_items = static_cast<std::uint32_t>(ds.item_ids.size());
  ds.row_offsets.assign(ds.num_users + 1, 0);
  ds.col_indices.reserve(pairs.size());
  ds.item_user_counts.assign(ds.num_items, 0);
  for (const auto key : pairs) {
    const auto u = static_cast<std::uint32_t>(key >> 32);
    const auto i = static_cast<std::uint32_t>(key & 0xffffffffu);
    ++ds.row_offsets[u + 1];
    ds.col_indices.push_back(i);
    ++ds.item_user_counts[i];
  }
  for (std::uint32_t u = 0; u < ds.num_users; ++u) {
    ds.row_offsets[u + 1] += ds.row_offsets[u];
  }

  ds.user_index.reserve(ds.num_users);
  for (std::uint32_t u = 0; u < ds.num_users; ++u) ds.user_index.emplace(ds.user_ids[u], u);
  ds.item_index.reserve(ds.num_items);
  for (std::uint32_t i = 0; i < ds.num_items; ++i) ds.item_index.emplace(ds.item_ids[i], i);

  ds.validate();
  return ds;
}

void InteractionDataset::validate() const {
  if (row_offsets.size() != std::size_t(num_users) + 1) {
    throw std::runtime_error("dataset: row_offsets size mismatch");
  }
  if (row_offsets.front() != 0 || row_offsets.back() != col_indices.size()) {
    throw std::runtime_error("dataset: row_offsets endpoints mismatch");
  }
  for (std::uint32_t u = 0; u < num_users; ++u) {
    if (row_offsets[u] > row_offsets[u + 1]) {
      throw std::runtime_error("dataset: row_offsets not monotone");
    }
    for (std::uint32_t p = row_offsets[u]; p < row_offsets[u + 1]; ++p) {
      if (col_indices[p] >= num_items) throw std::runtime_error("dataset: column out of range");
      if (p > row_offsets[u] && col_indices[p - 1] >= col_indices[p]) {
        throw std::runtime_error("dataset: row not strictly increasing");
      }
    }
  }
  if (item_user_counts.size() != num_items) {
    throw std::runtime_error("dataset: item_user_counts size mismatch");
  }
  std::vector<std::uint32_t> hist(num_items, 0);
  for (const auto c : col_indices) ++hist[c];
  if (hist != item_user_counts) {
    throw std::runtime_error("dataset: item_user_counts inconsistent");
  }
  if (!user_ids.empty() && user_ids.size() != num_users) {
    throw std::runtime_error("dataset: user_ids size mismatch");
  }
  if (!item_ids.empty() && item_ids.size() != num_items) {
    throw std::runtime_error("dataset: item_ids size mismatch");
  }
}

SplitDataset split_by_user(const InteractionDataset& ds, std::uint32_t n_val,
                           std::uint32_t n_test, double fold_in_ratio, std::uint64_t seed) {
  if (std::uint64_t(n_val) + n_test >= ds.num_users) {
    throw std::invalid_argument("split_by_user: n_val + n_test must be < num_users");
  }
  if (!(fold_in_ratio > 0.0 && fold_in_ratio < 1.0)) {
    throw std::invalid_argument("split_by_user: fold_in_ratio must be in (0, 1)");
  }

  std::mt19937_64 rng(mix_seed(seed, kSplitStream));
  IndexList perm(ds.num_users);
  for (std::uint32_t u = 0; u < ds.num_users; ++u) perm[u] = u;
  fisher_yates(perm, rng);

  IndexList val_users(perm.begin(), perm.begin() + n_val);
  IndexList test_users(perm.begin() + n_val, perm.begin() + n_val + n_test);
  IndexList train_users(perm.begin() + n_val + n_test, perm.end());
  std::sort(val_users.begin(), val_users.end());
  std::sort(test_users.begin(), test_users.end());
  std::sort(train_users.begin(), train_users.end());

  SplitDataset out;

  // Train item vocabulary, re-indexed by ascending old index so per-row
  // sortedness survives the remap.
  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> new_item(ds.num_items, kUnset);
  for (const auto u : train_users) {
    for (const auto i : ds.row(u)) new_item[i] = 0;
  }
  std::uint32_t next_item = 0;
  for (std::uint32_t i = 0; i < ds.num_items; ++i) {
    if (new_item[i] != kUnset) new_item[i] = next_item++;
  }

  InteractionDataset& tr = out.train;
  tr.num_users = static_cast<std::uint32_t>(train_users.size());
  tr.num_items = next_item;
  tr.row_offsets.reserve(tr.num_users + 1);
  tr.row_offsets.push_back(0);
  tr.item_user_counts.assign(tr.num_items, 0);
  const bool has_ids = !ds.user_ids.empty();
  for (const auto u : train_users) {
    for (const auto i : ds.row(u)) {
      tr.col_indices.push_back(new_item[i]);
      ++tr.item_user_counts[new_item[i]];
    }
    tr.row_offsets.push_back(static_cast<std::uint32_t>(tr.col_indices.size()));
    if (has_ids) tr.user_ids.push_back(ds.user_ids[u]);
  }
  if (has_ids) {
    for (std::uint32_t i = 0; i < ds.num_items; ++i) {
      if (new_item[i] != kUnset) tr.item_ids.push_back(ds.item_ids[i]);
    }
    tr.user_index.reserve(tr.num_users);
    for (std::uint32_t u = 0; u < tr.num_users; ++u) tr.user_index.emplace(tr.user_ids[u], u);
    tr.item_index.reserve(tr.num_items);
    for (std::uint32_t i = 0; i < tr.num_items; ++i) tr.item_index.emplace(tr.item_ids[i], i);
  }
  tr.validate();

  // Eval users: remap through the train vocabulary, then split fold-in /
  // held-out per user. RNG consumption order (val ascending, then test
  // ascending) is part of the determinism contract.
  auto build_side = [&](const IndexList& users, std::vector<EvalUser>& side,
                        std::uint32_t& discarded) {
    for (const auto u : users) {
      IndexList mapped;
      const auto row = ds.row(u);
      mapped.reserve(row.size());
      for (const auto i : row) {
        if (new_item[i] != kUnset) mapped.push_back(new_item[i]);
      }
      out.stats.dropped_interactions += row.size() - mapped.size();

      const auto n = mapped.size();
      const auto k = static_cast<std::size_t>(fold_in_ratio * static_cast<double>(n));
      if (k == 0 || k >= n) {
        ++discarded;
        continue;
      }
      fisher_yates(mapped, rng);
      EvalUser eu;
      eu.fold_in.assign(mapped.begin(), mapped.begin() + k);
      eu.held_out.assign(mapped.begin() + k, mapped.end());
      std::sort(eu.fold_in.begin(), eu.fold_in.end());
      std::sort(eu.held_out.begin(), eu.held_out.end());
      side.push_back(std::move(eu));
    }
  };
  build_side(val_users, out.val, out.stats.discarded_val);
  build_side(test_users, out.test, out.stats.discarded_test);

  return out;
}

void save_dataset(const InteractionDataset& ds, const std::string& path) {
  ds.validate();
  auto out = create_or_throw(path);
  out.write("SAECF-DS", 8);
  io::write_u32(out, kDatasetVersion);
  io::write_u64(out, ds.num_users);
  io::write_u64(out, ds.num_items);
  io::write_u64(out, ds.nnz());
  io::write_u32_array(out, ds.row_offsets.data(), ds.row_offsets.size());
  io::write_u32_array(out, ds.col_indices.data(), ds.col_indices.size());
  for (std::uint32_t u = 0; u < ds.num_users; ++u) {
    io::write_string(out, ds.user_ids.empty() ? "u" + std::to_string(u) : ds.user_ids[u]);
  }
  for (std::uint32_t i = 0; i < ds.num_items; ++i) {
    io::write_string(out, ds.item_ids.empty() ? "i" + std::to_string(i) : ds.item_ids[i]);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

InteractionDataset load_dataset(const std::string& path) {
  auto in = open_or_throw(path);
  io::expect_magic(in, "SAECF-DS", "dataset");
  const auto version = io::read_u32(in, "dataset version");
  if (version != kDatasetVersion) {
    throw std::runtime_error("unsupported dataset version " + std::to_string(version));
  }

  InteractionDataset ds;
  const auto num_users = io::read_u64(in, "num_users");
  const auto num_items = io::read_u64(in, "num_items");
  const auto nnz = io::read_u64(in, "nnz");
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint32_t>::max();
  if (num_users > kMax || num_items > kMax || nnz > kMax) {
    throw std::runtime_error("dataset dimensions exceed u32 range: " + path);
  }
  ds.num_users = static_cast<std::uint32_t>(num_users);
  ds.num_items = static_cast<std::uint32_t>(num_items);
  ds.row_offsets.resize(ds.num_users + 1);
  io::read_u32_array(in, ds.row_offsets.data(), ds.row_offsets.size(), "row_offsets");
  ds.col_indices.resize(nnz);
  io::read_u32_array(in, ds.col_indices.data(), ds.col_indices.size(), "col_indices");

  ds.user_ids.reserve(ds.num_users);
  ds.user_index.reserve(ds.num_users);
  for (std::uint32_t u = 0; u < ds.num_users; ++u) {
    ds.user_ids.push_back(io::read_string(in, "user id"));
    if (!ds.user_index.emplace(ds.user_ids.back(), u).second) {
      throw std::runtime_error("duplicate user id in " + path);
    }
  }
  ds.item_ids.reserve(ds.num_items);
  ds.item_index.reserve(ds.num_items);
  for (std::uint32_t i = 0; i < ds.num_items; ++i) {
    ds.item_ids.push_back(io::read_string(in, "item id"));
    if (!ds.item_index.emplace(ds.item_ids.back(), i).second) {
      throw std::runtime_error("duplicate item id in " + path);
    }
  }

  ds.item_user_counts.assign(ds.num_items, 0);
  for (const auto c : ds.col_indices) {
    if (c >= ds.num_items) throw std::runtime_error("dataset: column out of range in " + path);
    ++ds.item_user_counts[c];
  }
  ds.validate();
  return ds;
}

void save_eval_users(const std::vector<EvalUser>& users, std::uint32_t num_items,
                     const std::string& path) {
  auto out = create_or_throw(path);
  out.write("SAECF-EU", 8);
  io::write_u32(out, kEvalUsersVersion);
  io::write_u64(out, num_items);
  io::write_u64(out, users.size());
  for (const auto& eu : users) {
    io::write_u32(out, static_cast<std::uint32_t>(eu.fold_in.size()));
    io::write_u32_array(out, eu.fold_in.data(), eu.fold_in.size());
    io::write_u32(out, static_cast<std::uint32_t>(eu.held_out.size()));
    io::write_u32_array(out, eu.held_out.data(), eu.held_out.size());
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

EvalUserFile load_eval_users(const std::string& path) {
  auto in = open_or_throw(path);
  io::expect_magic(in, "SAECF-EU", "eval-user");
  const auto version = io::read_u32(in, "eval-user version");
  if (version != kEvalUsersVersion) {
    throw std::runtime_error("unsupported eval-user version " + std::to_string(version));
  }

  EvalUserFile out;
  const auto num_items = io::read_u64(in, "num_items");
  if (num_items > std::numeric_limits<std::uint32_t>::max()) {
    throw std::runtime_error("eval-user num_items exceeds u32 range: " + path);
  }
  out.num_items = static_cast<std::uint32_t>(num_items);
  const auto n = io::read_u64(in, "num eval users");
  out.users.resize(n);
  for (auto& eu : out.users) {
    const auto nf = io::read_u32(in, "fold_in size");
    eu.fold_in.resize(nf);
    io::read_u32_array(in, eu.fold_in.data(), nf, "fold_in");
    const auto nh = io::read_u32(in, "held_out size");
    eu.held_out.resize(nh);
    io::read_u32_array(in, eu.held_out.data(), nh, "held_out");

    if (eu.fold_in.empty() || eu.held_out.empty()) {
      throw std::runtime_error("eval user with empty side in " + path);
    }
    auto check_sorted = [&](const IndexList& v) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] >= out.num_items || (i > 0 && v[i - 1] >= v[i])) {
          throw std::runtime_error("eval user items not sorted/in-range in " + path);
        }
      }
    };
    check_sorted(eu.fold_in);
    check_sorted(eu.held_out);
    // Disjointness: both sorted, single merge walk.
    std::size_t a = 0, b = 0;
    while (a < eu.fold_in.size() && b < eu.held_out.size()) {
      if (eu.fold_in[a] == eu.held_out[b]) {
        throw std::runtime_error("eval user fold_in/held_out overlap in " + path);
      }
      if (eu.fold_in[a] < eu.held_out[b]) ++a;
      else ++b;
    }
  }
  return out;
}

}  // namespace saecf
