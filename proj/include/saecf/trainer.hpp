#ifndef SAECF_TRAINER_HPP
#define SAECF_TRAINER_HPP

#include "saecf/checkpoint.hpp"
#include "saecf/dataio.hpp"
#include "saecf/eval.hpp"
#include "saecf/model.hpp"
#include "saecf/optim.hpp"
#include "saecf/random.hpp"
#include "saecf/sampler.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace saecf {

// kSampled reconstructs only the union of items interacted with by the
// batch's users; kFull reconstructs every item (the classic full-output
// baseline, kept for controlled comparisons).
enum class TrainMode { kSampled, kFull };

inline const char* train_mode_name(TrainMode m) {
  return m == TrainMode::kSampled ? "sampled" : "full";
}

inline TrainMode train_mode_from_name(const std::string& name) {
  if (name == "sampled") return TrainMode::kSampled;
  if (name == "full") return TrainMode::kFull;
  throw std::invalid_argument("unknown train mode: " + name);
}

struct TrainConfig {
  std::uint32_t batch_size = 500;
  std::uint32_t slice_rows = 0;  // 0 = no slicing (slices of batch_size)
  std::uint32_t epochs = 100;
  double dropout_p = 0.5;
  double weight_decay = 2e-5;
  double lr = 1e-3;
  std::uint32_t hidden_dim = 200;
  TrainMode mode = TrainMode::kSampled;
  Activation activation = Activation::kTanh;
  std::uint64_t seed = 42;
  std::uint32_t checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  bool decay_biases = false;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
      throw std::invalid_argument("TrainConfig: dropout_p must be in [0, 1)");
    }
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be > 0");
    if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
    if (hidden_dim < 1) throw std::invalid_argument("TrainConfig: hidden_dim must be >= 1");
  }
};

struct EpochStats {
  double mean_loss = 0.0;          // mean over batches of per-batch loss
  std::size_t num_batches = 0;
  double mean_input_size = 0.0;    // mean reconstructed width per batch
  double std_input_size = 0.0;     // population std of the same
  double wall_seconds = 0.0;
  double batches_per_second = 0.0;
};

// Adam state for all four parameter groups. In sampled mode the weight
// matrices and the decoder bias are row-keyed (lazy decay, per-row bias
// correction); in full mode everything is dense.
template <class Scalar>
struct OptimizerState {
  AdamState<RowMatrixX<Scalar>> enc_weight;
  AdamState<VectorX<Scalar>> enc_bias;
  AdamState<RowMatrixX<Scalar>> dec_weight;
  AdamState<VectorX<Scalar>> dec_bias;

  static OptimizerState init(const ModelParams<Scalar>& params, TrainMode mode) {
    const bool keyed = mode == TrainMode::kSampled;
    OptimizerState st;
    st.enc_weight = AdamState<RowMatrixX<Scalar>>::zeros_like(params.enc_weight, keyed);
    st.enc_bias = AdamState<VectorX<Scalar>>::zeros_like(params.enc_bias, false);
    st.dec_weight = AdamState<RowMatrixX<Scalar>>::zeros_like(params.dec_weight, keyed);
    st.dec_bias = AdamState<VectorX<Scalar>>::zeros_like(params.dec_bias, keyed);
    return st;
  }
};

namespace detail {

constexpr std::uint64_t kDropoutStream = 0x64726f70ULL;  // "drop"

template <class Scalar>
MatrixX<Scalar> dense_targets(const SparseBatch& batch, Eigen::Index num_items) {
  MatrixX<Scalar> t = MatrixX<Scalar>::Zero(static_cast<Eigen::Index>(batch.rows()), num_items);
  for (const auto& e : batch.entries) t(e.local_row, e.col) = Scalar(1);
  return t;
}

// One gradient step per slice of one mini-batch; shared by train_epoch and
// benchmark so timings measure exactly the training code.
template <class Scalar>
class TrainStepper {
 public:
  TrainStepper(ModelParams<Scalar>& params, OptimizerState<Scalar>& opt, const TrainConfig& cfg)
      : params_(params), opt_(opt), cfg_(cfg) {
    weight_cfg_.lr = cfg.lr;
    weight_cfg_.weight_decay = cfg.weight_decay;
    bias_cfg_ = weight_cfg_;
    if (!cfg.decay_biases) bias_cfg_.weight_decay = 0.0;
  }

  struct BatchResult {
    double loss = 0.0;            // mean over batch rows, summed over items
    Eigen::Index input_width = 0; // reconstructed columns for this batch
  };

  BatchResult step(const SparseBatch& batch, std::mt19937_64& dropout_rng) {
    return cfg_.mode == TrainMode::kSampled ? step_sampled(batch, dropout_rng)
                                            : step_full(batch, dropout_rng);
  }

 private:
  Eigen::Index slice_rows() const {
    return cfg_.slice_rows == 0 ? static_cast<Eigen::Index>(cfg_.batch_size)
                                : static_cast<Eigen::Index>(cfg_.slice_rows);
  }

  BatchResult step_sampled(const SparseBatch& batch, std::mt19937_64& rng) {
    const auto sb = downsample_columns<Scalar>(batch);
    const auto rows = sb.rows();
    double weighted = 0.0;
    if (slice_rows() >= rows) {
      weighted = step_sampled_slice(sb, rng) * static_cast<double>(rows);
    } else {
      for (const auto& slice : slice_batch(sb, slice_rows())) {
        weighted += step_sampled_slice(slice, rng) * static_cast<double>(slice.rows());
      }
    }
    return {weighted / static_cast<double>(rows), sb.width()};
  }

  double step_sampled_slice(const SampledBatch<Scalar>& slice, std::mt19937_64& rng) {
    ForwardCache<Scalar> cache;
    cache.cols = slice.cols;
    cache.dropped_input = apply_input_dropout(slice.dense, cfg_.dropout_p, rng);
    cache.hidden = encode(params_, cache.dropped_input, slice.columns(), cfg_.activation);
    cache.logits = decode(params_, cache.hidden, slice.columns());
    auto lg = bce_loss_and_grad(cache.logits, slice.dense);
    const auto grads = backward(params_, cache, lg.dlogits, cfg_.activation);

    adam_step_sparse_rows(params_.enc_weight, grads.enc_weight.keys, grads.enc_weight.rows,
                          opt_.enc_weight, weight_cfg_, "encoder weights");
    adam_step_dense(params_.enc_bias, grads.enc_bias, opt_.enc_bias, bias_cfg_, "encoder bias");
    adam_step_sparse_rows(params_.dec_weight, grads.dec_weight.keys, grads.dec_weight.rows,
                          opt_.dec_weight, weight_cfg_, "decoder weights");
    adam_step_sparse_entries(params_.dec_bias, grads.dec_bias.keys, grads.dec_bias.values,
                             opt_.dec_bias, bias_cfg_, "decoder bias");
    return lg.loss;
  }

  BatchResult step_full(const SparseBatch& batch, std::mt19937_64& rng) {
    const MatrixX<Scalar> targets = dense_targets<Scalar>(batch, params_.num_items());
    const auto rows = targets.rows();
    double weighted = 0.0;
    for (Eigen::Index r0 = 0; r0 < rows; r0 += slice_rows()) {
      const Eigen::Index n = std::min(slice_rows(), rows - r0);
      const MatrixX<Scalar> block = targets.middleRows(r0, n);
      weighted += step_full_slice(block, rng) * static_cast<double>(n);
    }
    return {weighted / static_cast<double>(rows), params_.num_items()};
  }

  double step_full_slice(const MatrixX<Scalar>& targets, std::mt19937_64& rng) {
    ForwardCache<Scalar> cache;
    cache.dropped_input = apply_input_dropout(targets, cfg_.dropout_p, rng);
    cache.hidden = encode_full(params_, cache.dropped_input, cfg_.activation);
    cache.logits = decode_full(params_, cache.hidden);
    auto lg = bce_loss_and_grad(cache.logits, targets);
    const auto grads = backward_full(params_, cache, lg.dlogits, cfg_.activation);

    adam_step_dense(params_.enc_weight, grads.enc_weight, opt_.enc_weight, weight_cfg_,
                    "encoder weights");
    adam_step_dense(params_.enc_bias, grads.enc_bias, opt_.enc_bias, bias_cfg_, "encoder bias");
    adam_step_dense(params_.dec_weight, grads.dec_weight, opt_.dec_weight, weight_cfg_,
                    "decoder weights");
    adam_step_dense(params_.dec_bias, grads.dec_bias, opt_.dec_bias, bias_cfg_, "decoder bias");
    return lg.loss;
  }

  ModelParams<Scalar>& params_;
  OptimizerState<Scalar>& opt_;
  const TrainConfig& cfg_;
  AdamConfig weight_cfg_;
  AdamConfig bias_cfg_;
};

inline double population_std(const std::vector<double>& xs, double mean) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

inline double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

}  // namespace detail

// Runs one pass over all users in seeded shuffled order, updating params and
// opt in place. Deterministic given (ds, initial params/opt, cfg, epoch).
template <class Scalar>
EpochStats train_epoch(const InteractionDataset& ds, ModelParams<Scalar>& params,
                       OptimizerState<Scalar>& opt, const TrainConfig& cfg,
                       std::uint64_t epoch) {
  cfg.validate();
  if (params.num_items() != static_cast<Eigen::Index>(ds.num_items)) {
    throw std::invalid_argument("train_epoch: params/dataset item count mismatch");
  }
  if (ds.num_users == 0) throw std::invalid_argument("train_epoch: empty dataset");

  const auto plan = plan_epoch(ds.num_users, cfg.batch_size, cfg.seed, epoch);
  std::mt19937_64 dropout_rng(mix_seed(mix_seed(cfg.seed, epoch), detail::kDropoutStream));
  detail::TrainStepper<Scalar> stepper(params, opt, cfg);

  std::vector<double> widths;
  widths.reserve(plan.num_batches());
  double loss_sum = 0.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < plan.num_batches(); ++k) {
    const auto batch = gather_batch(ds, plan.batch_users(k));
    const auto res = stepper.step(batch, dropout_rng);
    if (!std::isfinite(res.loss)) {
      throw std::runtime_error("training diverged: epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(k) + ", loss " + std::to_string(res.loss));
    }
    loss_sum += res.loss;
    widths.push_back(static_cast<double>(res.input_width));
  }
  const auto t1 = std::chrono::steady_clock::now();

  EpochStats stats;
  stats.num_batches = plan.num_batches();
  stats.mean_loss = loss_sum / static_cast<double>(stats.num_batches);
  stats.mean_input_size = detail::mean_of(widths);
  stats.std_input_size = detail::population_std(widths, stats.mean_input_size);
  stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  stats.batches_per_second =
      stats.wall_seconds > 0.0 ? static_cast<double>(stats.num_batches) / stats.wall_seconds : 0.0;
  return stats;
}

inline nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return {{"batch_size", cfg.batch_size},
          {"slice_rows", cfg.slice_rows},
          {"epochs", cfg.epochs},
          {"dropout", cfg.dropout_p},
          {"weight_decay", cfg.weight_decay},
          {"lr", cfg.lr},
          {"hidden_dim", cfg.hidden_dim},
          {"mode", train_mode_name(cfg.mode)},
          {"activation", activation_name(cfg.activation)},
          {"seed", cfg.seed},
          {"checkpoint_every", cfg.checkpoint_every},
          {"decay_biases", cfg.decay_biases}};
}

struct FitOptions {
  std::string checkpoint_dir;   // empty = keep everything in memory
  std::string metadata_path;    // empty = no run metadata file
  const std::vector<EvalUser>* val_users = nullptr;  // per-epoch NDCG when set
  std::size_t val_ndcg_k = 100;
  unsigned eval_threads = 0;
  bool verbose = false;
};

template <class Scalar>
struct FitResult {
  ModelParams<Scalar> params;
  std::vector<EpochStats> epochs;
  std::vector<double> val_ndcg;  // NaN when no val users were given
  double total_wall_seconds = 0.0;
};

namespace detail {

template <class Scalar>
std::string checkpoint_metadata(const ModelParams<Scalar>& params, const TrainConfig& cfg,
                                std::uint64_t epochs_trained) {
  nlohmann::json j{{"hidden_dim", params.hidden_dim()},
                   {"num_items", params.num_items()},
                   {"activation", activation_name(cfg.activation)},
                   {"epochs_trained", epochs_trained},
                   {"rng", kGeneratorName},
                   {"config", train_config_to_json(cfg)}};
  return j.dump();
}

}  // namespace detail

// Initializes parameters from the seed and trains for cfg.epochs epochs.
// When checkpoint_dir is set, writes model_epoch<N>.ck every checkpoint_every
// epochs and model.ck at the end (always, even for zero epochs).
template <class Scalar>
FitResult<Scalar> fit(const InteractionDataset& ds, const TrainConfig& cfg,
                      const FitOptions& opts = {}) {
  cfg.validate();
  if (ds.num_items == 0 || ds.num_users == 0) {
    throw std::invalid_argument("fit: empty dataset");
  }

  FitResult<Scalar> res;
  res.params = init_params<Scalar>(static_cast<Eigen::Index>(ds.num_items),
                                   static_cast<Eigen::Index>(cfg.hidden_dim), cfg.seed);
  auto opt = OptimizerState<Scalar>::init(res.params, cfg.mode);

  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint32_t e = 0; e < cfg.epochs; ++e) {
    const auto stats = train_epoch(ds, res.params, opt, cfg, e);
    res.epochs.push_back(stats);

    double ndcg = std::numeric_limits<double>::quiet_NaN();
    if (opts.val_users != nullptr && !opts.val_users->empty()) {
      MetricKs ks;
      ks.recall = {};
      ks.ndcg = {opts.val_ndcg_k};
      ndcg = evaluate_split(res.params, *opts.val_users, ks, cfg.activation, RecallNorm::kMin,
                            opts.eval_threads)
                 .ndcg_at(opts.val_ndcg_k);
    }
    res.val_ndcg.push_back(ndcg);

    if (opts.verbose) {
      std::cerr << "epoch " << (e + 1) << "/" << cfg.epochs << "  loss " << stats.mean_loss
                << "  mean width " << stats.mean_input_size << "  " << stats.batches_per_second
                << " batches/s";
      if (!std::isnan(ndcg)) std::cerr << "  val ndcg@" << opts.val_ndcg_k << " " << ndcg;
      std::cerr << "\n";
    }

    if (!opts.checkpoint_dir.empty() && cfg.checkpoint_every > 0 &&
        (e + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(res.params,
                      opts.checkpoint_dir + "/model_epoch" + std::to_string(e + 1) + ".ck",
                      detail::checkpoint_metadata(res.params, cfg, e + 1));
    }
  }
  res.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!opts.checkpoint_dir.empty()) {
    save_checkpoint(res.params, opts.checkpoint_dir + "/model.ck",
                    detail::checkpoint_metadata(res.params, cfg, cfg.epochs));
  }
  if (!opts.metadata_path.empty()) {
    nlohmann::json epochs = nlohmann::json::array();
    for (std::size_t e = 0; e < res.epochs.size(); ++e) {
      const auto& s = res.epochs[e];
      nlohmann::json je{{"mean_loss", s.mean_loss},
                        {"num_batches", s.num_batches},
                        {"mean_input_size", s.mean_input_size},
                        {"std_input_size", s.std_input_size},
                        {"wall_seconds", s.wall_seconds},
                        {"batches_per_second", s.batches_per_second}};
      if (!std::isnan(res.val_ndcg[e])) {
        je["val_ndcg@" + std::to_string(opts.val_ndcg_k)] = res.val_ndcg[e];
      }
      epochs.push_back(std::move(je));
    }
    const nlohmann::json j{{"config", train_config_to_json(cfg)},
                           {"rng", kGeneratorName},
                           {"scalar", sizeof(Scalar) == 4 ? "float32" : "float64"},
                           {"dataset",
                            {{"num_users", ds.num_users},
                             {"num_items", ds.num_items},
                             {"nnz", ds.nnz()}}},
                           {"total_wall_seconds", res.total_wall_seconds},
                           {"epochs", std::move(epochs)}};
    std::ofstream out(opts.metadata_path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot create " + opts.metadata_path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("write failed: " + opts.metadata_path);
  }
  return res;
}

struct BenchmarkReport {
  double sampled_batches_per_second = 0.0;
  double full_batches_per_second = 0.0;
  double speedup = 0.0;  // sampled rate / full rate
  double mean_input_size = 0.0;   // sampled mode, timed batches
  double std_input_size = 0.0;
  std::uint64_t full_input_size = 0;  // always num_items
  std::size_t warmup_batches = 0;
  std::size_t timed_batches = 0;
};

// Times identical batch sequences through both modes from identical
// initializations; only the training mode differs.
template <class Scalar>
BenchmarkReport benchmark(const InteractionDataset& ds, TrainConfig cfg,
                          std::size_t warmup_batches, std::size_t timed_batches) {
  cfg.validate();
  if (timed_batches < 1) throw std::invalid_argument("benchmark: timed_batches must be >= 1");
  if (ds.num_users == 0) throw std::invalid_argument("benchmark: empty dataset");

  const std::size_t total = warmup_batches + timed_batches;
  std::vector<IndexList> batches;
  batches.reserve(total);
  for (std::uint64_t epoch = 0; batches.size() < total; ++epoch) {
    const auto plan = plan_epoch(ds.num_users, cfg.batch_size, cfg.seed, epoch);
    for (std::size_t k = 0; k < plan.num_batches() && batches.size() < total; ++k) {
      const auto span = plan.batch_users(k);
      batches.emplace_back(span.begin(), span.end());
    }
  }

  BenchmarkReport report;
  report.warmup_batches = warmup_batches;
  report.timed_batches = timed_batches;
  report.full_input_size = ds.num_items;

  constexpr std::uint64_t kBenchStream = 0x62656e6368ULL;  // "bench"
  for (const auto mode : {TrainMode::kSampled, TrainMode::kFull}) {
    TrainConfig mode_cfg = cfg;
    mode_cfg.mode = mode;
    auto params = init_params<Scalar>(static_cast<Eigen::Index>(ds.num_items),
                                      static_cast<Eigen::Index>(cfg.hidden_dim), cfg.seed);
    auto opt = OptimizerState<Scalar>::init(params, mode);
    detail::TrainStepper<Scalar> stepper(params, opt, mode_cfg);
    std::mt19937_64 rng(mix_seed(cfg.seed, kBenchStream));

    std::vector<double> widths;
    std::chrono::steady_clock::time_point t0;
    for (std::size_t k = 0; k < batches.size(); ++k) {
      if (k == warmup_batches) t0 = std::chrono::steady_clock::now();
      const auto batch = gather_batch(ds, batches[k]);
      const auto res = stepper.step(batch, rng);
      if (k >= warmup_batches) widths.push_back(static_cast<double>(res.input_width));
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double rate = secs > 0.0 ? static_cast<double>(timed_batches) / secs : 0.0;
    if (mode == TrainMode::kSampled) {
      report.sampled_batches_per_second = rate;
      report.mean_input_size = detail::mean_of(widths);
      report.std_input_size = detail::population_std(widths, report.mean_input_size);
    } else {
      report.full_batches_per_second = rate;
    }
  }
  report.speedup = report.full_batches_per_second > 0.0
                       ? report.sampled_batches_per_second / report.full_batches_per_second
                       : 0.0;
  return report;
}

inline std::string benchmark_report_to_json(const BenchmarkReport& r) {
  const nlohmann::json j{{"sampled_batches_per_second", r.sampled_batches_per_second},
                         {"full_batches_per_second", r.full_batches_per_second},
                         {"speedup", r.speedup},
                         {"mean_input_size", r.mean_input_size},
                         {"std_input_size", r.std_input_size},
                         {"full_input_size", r.full_input_size},
                         {"warmup_batches", r.warmup_batches},
                         {"timed_batches", r.timed_batches}};
  return j.dump(2);
}

}  // namespace saecf

#endif
