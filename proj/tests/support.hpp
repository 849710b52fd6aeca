#ifndef SAECF_TESTS_SUPPORT_HPP
#define SAECF_TESTS_SUPPORT_HPP

#include "saecf/dataio.hpp"
#include "saecf/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>

namespace saecf::test {

// Builds a dataset from explicit per-user item lists (each sorted, unique).
inline InteractionDataset make_dataset(const std::vector<IndexList>& rows,
                                       std::uint32_t num_items) {
  InteractionDataset ds;
  ds.num_users = static_cast<std::uint32_t>(rows.size());
  ds.num_items = num_items;
  ds.row_offsets.push_back(0);
  ds.item_user_counts.assign(num_items, 0);
  for (const auto& row : rows) {
    for (const auto i : row) {
      ds.col_indices.push_back(i);
      ++ds.item_user_counts.at(i);
    }
    ds.row_offsets.push_back(static_cast<std::uint32_t>(ds.col_indices.size()));
  }
  ds.validate();
  return ds;
}

// Synthetic dataset with a skewed (Zipf-like) item popularity profile:
// every user gets `degree` distinct items drawn with weights 1/(i+10)^1.1.
inline InteractionDataset make_zipf_dataset(std::uint32_t num_users, std::uint32_t num_items,
                                            std::uint32_t degree, std::uint64_t seed) {
  if (degree > num_items) throw std::invalid_argument("make_zipf_dataset: degree > num_items");
  std::vector<double> cum(num_items);
  double acc = 0.0;
  for (std::uint32_t i = 0; i < num_items; ++i) {
    acc += 1.0 / std::pow(static_cast<double>(i) + 10.0, 1.1);
    cum[i] = acc;
  }
  std::mt19937_64 rng(mix_seed(seed, 0x7a697066ULL));  // "zipf"

  std::vector<IndexList> rows(num_users);
  std::vector<char> taken(num_items, 0);
  for (auto& row : rows) {
    row.reserve(degree);
    while (row.size() < degree) {
      const double u = uniform_unit(rng) * acc;
      const auto it = std::lower_bound(cum.begin(), cum.end(), u);
      const auto i = static_cast<std::uint32_t>(it - cum.begin());
      if (!taken[i]) {
        taken[i] = 1;
        row.push_back(i);
      }
    }
    for (const auto i : row) taken[i] = 0;
    std::sort(row.begin(), row.end());
  }
  return make_dataset(rows, num_items);
}

class TempDir {
 public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "saecf-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
      throw std::runtime_error("mkdtemp failed");
    }
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::string& path() const { return path_; }
  std::string file(const std::string& name) const { return path_ + "/" + name; }

 private:
  std::string path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw std::runtime_error("write_file failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_file failed: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline bool same_dataset(const InteractionDataset& a, const InteractionDataset& b) {
  return a.num_users == b.num_users && a.num_items == b.num_items &&
         a.row_offsets == b.row_offsets && a.col_indices == b.col_indices &&
         a.item_user_counts == b.item_user_counts && a.user_ids == b.user_ids &&
         a.item_ids == b.item_ids;
}

}  // namespace saecf::test

#endif
