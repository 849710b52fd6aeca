// saecf: train and evaluate sparse-input autoencoders for implicit feedback.
// Subcommands: preprocess, train, evaluate, recommend, benchmark.

#include "saecf/dataio.hpp"
#include "saecf/eval.hpp"
#include "saecf/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config file overlay: flat key=value lines or a JSON object. Keys mirror the
// long flag names (without the leading dashes). Values from the file apply
// only where the flag was not given on the command line; unknown keys are
// errors.

std::map<std::string, std::string> read_config_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  std::map<std::string, std::string> pairs;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && content[first] == '{') {
    json j;
    try {
      j = json::parse(content);
    } catch (const json::exception& e) {
      throw std::runtime_error("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw std::runtime_error("config file " + path + ": expected an object");
    for (const auto& [key, value] : j.items()) {
      if (value.is_string()) {
        pairs[key] = value.get<std::string>();
      } else if (value.is_boolean()) {
        pairs[key] = value.get<bool>() ? "true" : "false";
      } else if (value.is_number()) {
        pairs[key] = value.dump();
      } else {
        throw std::runtime_error("config key '" + key + "': unsupported value type");
      }
    }
    return pairs;
  }

  std::size_t line_no = 0;
  std::string line;
  std::istringstream stream(content);
  while (std::getline(stream, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    }
    pairs[key] = trim(line.substr(eq + 1));
  }
  return pairs;
}

class ConfigOverlay {
 public:
  template <class T>
  void bind(const std::string& key, T& target) {
    setters_[key] = [key, &target](const std::string& text) { assign(key, text, target); };
  }

  // Applies file values for every key whose flag was not given explicitly.
  void apply(const CLI::App& cmd, const std::string& config_path) const {
    if (config_path.empty()) return;
    for (const auto& [key, value] : read_config_pairs(config_path)) {
      const auto it = setters_.find(key);
      if (it == setters_.end()) {
        throw std::runtime_error("config: unknown key '" + key + "'");
      }
      if (cmd.count("--" + key) > 0) continue;  // command line wins
      it->second(value);
    }
  }

 private:
  static void assign(const std::string& key, const std::string& text, std::string& out) {
    (void)key;
    out = text;
  }
  static void assign(const std::string& key, const std::string& text, bool& out) {
    if (text == "true" || text == "1") out = true;
    else if (text == "false" || text == "0") out = false;
    else throw std::runtime_error("config key '" + key + "': expected a boolean, got '" + text + "'");
  }
  static void assign(const std::string& key, const std::string& text, double& out) {
    try {
      std::size_t used = 0;
      out = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "': expected a number, got '" + text + "'");
    }
  }
  template <class UInt>
  static void assign(const std::string& key, const std::string& text, UInt& out) {
    static_assert(std::is_unsigned_v<UInt>);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(text, &used);
      if (used != text.size() || v > std::numeric_limits<UInt>::max()) {
        throw std::invalid_argument(text);
      }
      out = static_cast<UInt>(v);
    } catch (const std::exception&) {
      throw std::runtime_error("config key '" + key + "': expected a non-negative integer, got '" +
                               text + "'");
    }
  }

  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

// ---------------------------------------------------------------------------
// Shared plumbing.

std::string resolve_dataset_path(const std::string& data) {
  if (fs::is_directory(data)) return data + "/train.ds";
  return data;
}

saecf::Activation activation_from_checkpoint(const std::string& metadata_json) {
  try {
    const auto meta = json::parse(metadata_json);
    if (meta.contains("activation")) {
      return saecf::activation_from_name(meta["activation"].get<std::string>());
    }
  } catch (const json::exception&) {
    // fall through: old or foreign checkpoint, assume the default
  }
  return saecf::Activation::kTanh;
}

void check_item_count(const saecf::ModelParams<float>& params,
                      const saecf::InteractionDataset& ds) {
  if (params.num_items() != static_cast<Eigen::Index>(ds.num_items)) {
    throw std::runtime_error("checkpoint expects " + std::to_string(params.num_items()) +
                             " items but the dataset has " + std::to_string(ds.num_items));
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// preprocess

struct PreprocessArgs {
  std::string data;
  std::string format = "movielens";
  std::string out;
  std::string config;
  std::uint32_t min_user_items = 5;
  std::uint32_t min_item_users = 1;
  double rating_threshold = 4.0;
  std::uint32_t n_val = 10000;
  std::uint32_t n_test = 10000;
  double fold_in_ratio = 0.8;
  std::uint64_t seed = 42;
};

int run_preprocess(const PreprocessArgs& a) {
  saecf::RawInteractions raw;
  if (a.format == "movielens") {
    raw = saecf::parse_ratings_csv(a.data, a.rating_threshold);
  } else if (a.format == "triplets") {
    raw = saecf::parse_triplets_tsv(a.data);
  } else {
    throw std::runtime_error("unknown format '" + a.format + "' (movielens or triplets)");
  }

  const auto filtered = saecf::filter_min_counts(raw, a.min_user_items, a.min_item_users);
  const auto ds = saecf::build_dataset(filtered);
  const auto split = saecf::split_by_user(ds, a.n_val, a.n_test, a.fold_in_ratio, a.seed);

  fs::create_directories(a.out);
  saecf::save_dataset(split.train, a.out + "/train.ds");
  saecf::save_eval_users(split.val, split.train.num_items, a.out + "/val.users");
  saecf::save_eval_users(split.test, split.train.num_items, a.out + "/test.users");

  const double pct = 100.0 * split.train.sparsity();
  const json summary{
      {"num_users", split.train.num_users},
      {"num_items", split.train.num_items},
      {"interactions", split.train.nnz()},
      {"density_percent", pct},
      {"val_users", split.val.size()},
      {"test_users", split.test.size()},
      {"discarded_val_users", split.stats.discarded_val},
      {"discarded_test_users", split.stats.discarded_test},
      {"dropped_interactions", split.stats.dropped_interactions},
      {"config",
       {{"format", a.format},
        {"min_user_items", a.min_user_items},
        {"min_item_users", a.min_item_users},
        {"rating_threshold", a.rating_threshold},
        {"n_val", a.n_val},
        {"n_test", a.n_test},
        {"fold_in_ratio", a.fold_in_ratio},
        {"seed", a.seed}}}};
  write_text_file(a.out + "/summary.json", summary.dump(2) + "\n");

  std::cout << "users:        " << split.train.num_users << "\n"
            << "items:        " << split.train.num_items << "\n"
            << "interactions: " << split.train.nnz() << "\n"
            << "density:      " << pct << "%\n"
            << "val users:    " << split.val.size() << "\n"
            << "test users:   " << split.test.size() << "\n"
            << "wrote " << a.out << "/train.ds, val.users, test.users, summary.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string mode = "sampled";
  std::string activation = "tanh";
  saecf::TrainConfig cfg;
  unsigned threads = 0;
};

saecf::TrainConfig finish_train_config(const std::string& mode, const std::string& activation,
                                       saecf::TrainConfig cfg) {
  cfg.mode = saecf::train_mode_from_name(mode);
  cfg.activation = saecf::activation_from_name(activation);
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const auto ds = saecf::load_dataset(resolve_dataset_path(a.data));
  const auto cfg = finish_train_config(a.mode, a.activation, a.cfg);

  std::vector<saecf::EvalUser> val_users;
  if (fs::is_directory(a.data) && fs::exists(a.data + "/val.users")) {
    auto euf = saecf::load_eval_users(a.data + "/val.users");
    if (euf.num_items != ds.num_items) {
      throw std::runtime_error("val.users was built for " + std::to_string(euf.num_items) +
                               " items but train.ds has " + std::to_string(ds.num_items));
    }
    val_users = std::move(euf.users);
  }

  fs::create_directories(a.out);
  saecf::FitOptions opts;
  opts.checkpoint_dir = a.out;
  opts.metadata_path = a.out + "/run.json";
  if (!val_users.empty()) opts.val_users = &val_users;
  opts.eval_threads = a.threads;
  opts.verbose = true;

  const auto res = saecf::fit<float>(ds, cfg, opts);
  std::cout << "trained " << res.epochs.size() << " epochs in " << res.total_wall_seconds
            << "s; wrote " << a.out << "/model.ck and run.json\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string recall_norm = "min";
  std::string out;
  std::string config;
  std::vector<std::size_t> ks;
  bool per_user = false;
  unsigned threads = 0;
};

saecf::RecallNorm recall_norm_from_name(const std::string& name) {
  if (name == "min") return saecf::RecallNorm::kMin;
  if (name == "held-out") return saecf::RecallNorm::kHeldOutSize;
  throw std::runtime_error("unknown recall norm '" + name + "' (min or held-out)");
}

int run_evaluate(const EvaluateArgs& a) {
  if (a.split != "val" && a.split != "test") {
    throw std::runtime_error("unknown split '" + a.split + "' (val or test)");
  }
  if (!fs::is_directory(a.data)) {
    throw std::runtime_error("--data must be a preprocess output directory: " + a.data);
  }
  const auto loaded = saecf::load_checkpoint<float>(a.checkpoint);
  const auto ds = saecf::load_dataset(a.data + "/train.ds");
  check_item_count(loaded.params, ds);
  const auto euf = saecf::load_eval_users(a.data + "/" + a.split + ".users");
  if (euf.num_items != ds.num_items) {
    throw std::runtime_error(a.split + ".users was built for " + std::to_string(euf.num_items) +
                             " items but train.ds has " + std::to_string(ds.num_items));
  }
  const auto& users = euf.users;

  saecf::MetricKs ks;
  ks.recall = a.ks.empty() ? std::vector<std::size_t>{20, 50, 100} : a.ks;
  ks.ndcg = ks.recall;
  const auto report = saecf::evaluate_split(
      loaded.params, users, ks, activation_from_checkpoint(loaded.metadata_json),
      recall_norm_from_name(a.recall_norm), a.threads);
  const auto text = saecf::report_to_json(report, a.per_user) + "\n";

  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(a.out, text);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------
// recommend

struct RecommendArgs {
  std::string checkpoint;
  std::string data;
  std::string history;
  std::string config;
  std::uint32_t k = 10;
};

int run_recommend(const RecommendArgs& a) {
  if (a.k < 1) throw std::runtime_error("--k must be >= 1");
  const auto loaded = saecf::load_checkpoint<float>(a.checkpoint);
  const auto ds = saecf::load_dataset(resolve_dataset_path(a.data));
  check_item_count(loaded.params, ds);

  std::ifstream in(a.history);
  if (!in) throw std::runtime_error("cannot open history file: " + a.history);
  std::set<std::uint32_t> fold_set;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto it = ds.item_index.find(line);
    if (it == ds.item_index.end()) {
      std::cerr << "warning: unknown item id '" << line << "' skipped\n";
      continue;
    }
    fold_set.insert(it->second);
  }
  if (fold_set.empty()) {
    throw std::runtime_error("history contains no known item ids: " + a.history);
  }

  const saecf::IndexList fold_in(fold_set.begin(), fold_set.end());
  const auto scores = saecf::predict_scores(loaded.params, fold_in,
                                            activation_from_checkpoint(loaded.metadata_json));
  const auto top = saecf::rank_top_k(scores, a.k);
  for (const auto idx : top) std::cout << ds.item_ids.at(idx) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  std::string data;
  std::string out;
  std::string config;
  std::string activation = "tanh";
  saecf::TrainConfig cfg;
  std::size_t warmup_batches = 10;
  std::size_t timed_batches = 50;
};

int run_benchmark(const BenchmarkArgs& a) {
  const auto ds = saecf::load_dataset(resolve_dataset_path(a.data));
  // The mode flag is irrelevant here: both modes are always timed.
  const auto cfg = finish_train_config("sampled", a.activation, a.cfg);
  const auto report = saecf::benchmark<float>(ds, cfg, a.warmup_batches, a.timed_batches);
  const auto text = saecf::benchmark_report_to_json(report) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text_file(a.out, text);
    std::cout << "wrote " << a.out << "\n";
  }
  std::cerr << "sampled " << report.sampled_batches_per_second << " batches/s, full "
            << report.full_batches_per_second << " batches/s, speedup " << report.speedup << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

void add_train_config_flags(CLI::App* cmd, saecf::TrainConfig& cfg, std::string& mode,
                            std::string& activation, ConfigOverlay& overlay) {
  cmd->add_option("--batch-size", cfg.batch_size, "Users per mini-batch")->capture_default_str();
  cmd->add_option("--slice-rows", cfg.slice_rows,
                  "Rows per gradient step within a batch (0 = whole batch)")
      ->capture_default_str();
  cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--dropout", cfg.dropout_p, "Input dropout probability")->capture_default_str();
  cmd->add_option("--weight-decay", cfg.weight_decay, "Coupled L2 penalty on weights")
      ->capture_default_str();
  cmd->add_option("--lr", cfg.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--hidden-dim", cfg.hidden_dim, "Latent dimension")->capture_default_str();
  cmd->add_option("--mode", mode, "Reconstruction mode: sampled or full")->capture_default_str();
  cmd->add_option("--activation", activation, "Encoder activation: tanh or sigmoid")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "RNG seed")->capture_default_str();
  cmd->add_flag("--decay-biases", cfg.decay_biases, "Apply weight decay to biases too");

  overlay.bind("batch-size", cfg.batch_size);
  overlay.bind("slice-rows", cfg.slice_rows);
  overlay.bind("epochs", cfg.epochs);
  overlay.bind("dropout", cfg.dropout_p);
  overlay.bind("weight-decay", cfg.weight_decay);
  overlay.bind("lr", cfg.lr);
  overlay.bind("hidden-dim", cfg.hidden_dim);
  overlay.bind("mode", mode);
  overlay.bind("activation", activation);
  overlay.bind("seed", cfg.seed);
  overlay.bind("decay-biases", cfg.decay_biases);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse autoencoder training for implicit-feedback recommendation"};
  app.require_subcommand(1);

  PreprocessArgs pre;
  ConfigOverlay pre_overlay;
  auto* pre_cmd = app.add_subcommand("preprocess",
                                     "Parse raw interactions, filter, split, and save a dataset");
  pre_cmd->add_option("--data", pre.data, "Raw interactions file")->required();
  pre_cmd->add_option("--format", pre.format, "Input format: movielens (csv) or triplets (tsv)")
      ->capture_default_str();
  pre_cmd->add_option("--out", pre.out, "Output directory")->required();
  pre_cmd->add_option("--min-user-items", pre.min_user_items,
                      "Keep users with at least this many interactions")
      ->capture_default_str();
  pre_cmd->add_option("--min-item-users", pre.min_item_users,
                      "Keep items with at least this many interactions")
      ->capture_default_str();
  pre_cmd->add_option("--rating-threshold", pre.rating_threshold,
                      "Minimum rating that counts as positive (movielens format)")
      ->capture_default_str();
  pre_cmd->add_option("--n-val", pre.n_val, "Held-out validation users")->capture_default_str();
  pre_cmd->add_option("--n-test", pre.n_test, "Held-out test users")->capture_default_str();
  pre_cmd->add_option("--fold-in-ratio", pre.fold_in_ratio,
                      "Fraction of a held-out user's items used as input")
      ->capture_default_str();
  pre_cmd->add_option("--seed", pre.seed, "RNG seed for the user split")->capture_default_str();
  pre_cmd->add_option("--config", pre.config, "Config file (key=value or JSON); flags win");
  pre_overlay.bind("data", pre.data);
  pre_overlay.bind("format", pre.format);
  pre_overlay.bind("out", pre.out);
  pre_overlay.bind("min-user-items", pre.min_user_items);
  pre_overlay.bind("min-item-users", pre.min_item_users);
  pre_overlay.bind("rating-threshold", pre.rating_threshold);
  pre_overlay.bind("n-val", pre.n_val);
  pre_overlay.bind("n-test", pre.n_test);
  pre_overlay.bind("fold-in-ratio", pre.fold_in_ratio);
  pre_overlay.bind("seed", pre.seed);

  TrainArgs tr;
  ConfigOverlay tr_overlay;
  auto* tr_cmd = app.add_subcommand("train", "Train a model and write checkpoints");
  tr_cmd->add_option("--data", tr.data, "Dataset file or preprocess output directory")
      ->required();
  tr_cmd->add_option("--out", tr.out, "Output directory for checkpoints and run metadata")
      ->required();
  tr_cmd->add_option("--checkpoint-every", tr.cfg.checkpoint_every,
                     "Also checkpoint every N epochs (0 = final only)")
      ->capture_default_str();
  tr_cmd->add_option("--threads", tr.threads, "Threads for per-epoch validation scoring")
      ->capture_default_str();
  tr_cmd->add_option("--config", tr.config, "Config file (key=value or JSON); flags win");
  add_train_config_flags(tr_cmd, tr.cfg, tr.mode, tr.activation, tr_overlay);
  tr_overlay.bind("data", tr.data);
  tr_overlay.bind("out", tr.out);
  tr_overlay.bind("checkpoint-every", tr.cfg.checkpoint_every);
  tr_overlay.bind("threads", tr.threads);

  EvaluateArgs ev;
  ConfigOverlay ev_overlay;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a held-out split");
  ev_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint file")->required();
  ev_cmd->add_option("--data", ev.data, "Preprocess output directory")->required();
  ev_cmd->add_option("--split", ev.split, "Which split to score: val or test")
      ->capture_default_str();
  ev_cmd->add_option("--k", ev.ks, "Metric cutoff, repeatable (default 20 50 100)");
  ev_cmd->add_option("--recall-norm", ev.recall_norm,
                     "Recall denominator: min (of k and held-out size) or held-out")
      ->capture_default_str();
  ev_cmd->add_flag("--per-user", ev.per_user, "Include per-user rows in the report");
  ev_cmd->add_option("--threads", ev.threads, "Scoring threads")->capture_default_str();
  ev_cmd->add_option("--out", ev.out, "Report path (default: stdout)");
  ev_cmd->add_option("--config", ev.config, "Config file (key=value or JSON); flags win");
  ev_overlay.bind("checkpoint", ev.checkpoint);
  ev_overlay.bind("data", ev.data);
  ev_overlay.bind("split", ev.split);
  ev_overlay.bind("recall-norm", ev.recall_norm);
  ev_overlay.bind("out", ev.out);

  RecommendArgs rec;
  ConfigOverlay rec_overlay;
  auto* rec_cmd = app.add_subcommand("recommend", "Print top-K item ids for an item history");
  rec_cmd->add_option("--checkpoint", rec.checkpoint, "Model checkpoint file")->required();
  rec_cmd->add_option("--data", rec.data, "Dataset file or preprocess output directory")
      ->required();
  rec_cmd->add_option("--history", rec.history, "File with one external item id per line")
      ->required();
  rec_cmd->add_option("--k", rec.k, "Number of recommendations")->capture_default_str();
  rec_cmd->add_option("--config", rec.config, "Config file (key=value or JSON); flags win");
  rec_overlay.bind("checkpoint", rec.checkpoint);
  rec_overlay.bind("data", rec.data);
  rec_overlay.bind("history", rec.history);
  rec_overlay.bind("k", rec.k);

  BenchmarkArgs be;
  ConfigOverlay be_overlay;
  auto* be_cmd = app.add_subcommand("benchmark",
                                    "Time sampled vs full training on identical batches");
  be_cmd->add_option("--data", be.data, "Dataset file or preprocess output directory")
      ->required();
  be_cmd->add_option("--warmup-batches", be.warmup_batches, "Untimed warmup batches")
      ->capture_default_str();
  be_cmd->add_option("--timed-batches", be.timed_batches, "Timed batches per mode")
      ->capture_default_str();
  be_cmd->add_option("--out", be.out, "Report path (default: stdout)");
  be_cmd->add_option("--config", be.config, "Config file (key=value or JSON); flags win");
  {
    static std::string bench_mode = "sampled";  // accepted for symmetry, not used
    add_train_config_flags(be_cmd, be.cfg, bench_mode, be.activation, be_overlay);
  }
  be_overlay.bind("data", be.data);
  be_overlay.bind("warmup-batches", be.warmup_batches);
  be_overlay.bind("timed-batches", be.timed_batches);
  be_overlay.bind("out", be.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre_cmd->parsed()) {
      pre_overlay.apply(*pre_cmd, pre.config);
      return run_preprocess(pre);
    }
    if (tr_cmd->parsed()) {
      tr_overlay.apply(*tr_cmd, tr.config);
      return run_train(tr);
    }
    if (ev_cmd->parsed()) {
      ev_overlay.apply(*ev_cmd, ev.config);
      return run_evaluate(ev);
    }
    if (rec_cmd->parsed()) {
      rec_overlay.apply(*rec_cmd, rec.config);
      return run_recommend(rec);
    }
    if (be_cmd->parsed()) {
      be_overlay.apply(*be_cmd, be.config);
      return run_benchmark(be);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
