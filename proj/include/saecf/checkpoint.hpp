#ifndef SAECF_CHECKPOINT_HPP
#define SAECF_CHECKPOINT_HPP

#include "saecf/binary_io.hpp"
#include "saecf/model.hpp"

#include <fstream>
#include <limits>
#include <string>

namespace saecf {

// Checkpoint file: magic "SAECF-CK", u32 version, u64 hidden_dim, u64
// num_items, then float32 LE tensors (encoder weights as hidden_dim x
// num_items row-major, encoder bias, decoder weights as num_items x
// hidden_dim row-major, decoder bias), then a length-prefixed UTF-8 metadata
// string (JSON). Parameters are stored as float32 regardless of the working
// scalar type.

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <class Scalar>
void save_checkpoint(const ModelParams<Scalar>& params, const std::string& path,
                     const std::string& metadata_json) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path);

  const auto d = params.hidden_dim();
  const auto n = params.num_items();
  out.write("SAECF-CK", 8);
  io::write_u32(out, kCheckpointVersion);
  io::write_u64(out, static_cast<std::uint64_t>(d));
  io::write_u64(out, static_cast<std::uint64_t>(n));

  // Stored encoder layout is d x num_items row-major; in-memory weights are
  // item-major, so the encoder block goes out transposed.
  const RowMatrixX<float> enc_t = params.enc_weight.transpose().template cast<float>();
  io::write_f32_array(out, enc_t.data(), static_cast<std::size_t>(enc_t.size()));
  const VectorX<float> enc_b = params.enc_bias.template cast<float>();
  io::write_f32_array(out, enc_b.data(), static_cast<std::size_t>(enc_b.size()));
  const RowMatrixX<float> dec = params.dec_weight.template cast<float>();
  io::write_f32_array(out, dec.data(), static_cast<std::size_t>(dec.size()));
  const VectorX<float> dec_b = params.dec_bias.template cast<float>();
  io::write_f32_array(out, dec_b.data(), static_cast<std::size_t>(dec_b.size()));

  io::write_string(out, metadata_json);
  if (!out) throw std::runtime_error("write failed: " + path);
}

template <class Scalar>
struct LoadedCheckpoint {
  ModelParams<Scalar> params;
  std::string metadata_json;
};

template <class Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  io::expect_magic(in, "SAECF-CK", "checkpoint");
  const auto version = io::read_u32(in, "checkpoint version");
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto d64 = io::read_u64(in, "hidden_dim");
  const auto n64 = io::read_u64(in, "num_items");
  constexpr std::uint64_t kMax = std::numeric_limits<Eigen::Index>::max();
  if (d64 < 1 || n64 < 1 || d64 > kMax || n64 > kMax || d64 > kMax / n64) {
    throw std::runtime_error("checkpoint dimensions invalid: " + path);
  }
  const auto d = static_cast<Eigen::Index>(d64);
  const auto n = static_cast<Eigen::Index>(n64);

  LoadedCheckpoint<Scalar> out;
  RowMatrixX<float> enc_t(d, n);
  io::read_f32_array(in, enc_t.data(), static_cast<std::size_t>(enc_t.size()), "encoder weights");
  out.params.enc_weight = enc_t.transpose().template cast<Scalar>();
  VectorX<float> enc_b(d);
  io::read_f32_array(in, enc_b.data(), static_cast<std::size_t>(enc_b.size()), "encoder bias");
  out.params.enc_bias = enc_b.template cast<Scalar>();
  RowMatrixX<float> dec(n, d);
  io::read_f32_array(in, dec.data(), static_cast<std::size_t>(dec.size()), "decoder weights");
  out.params.dec_weight = dec.template cast<Scalar>();
  VectorX<float> dec_b(n);
  io::read_f32_array(in, dec_b.data(), static_cast<std::size_t>(dec_b.size()), "decoder bias");
  out.params.dec_bias = dec_b.template cast<Scalar>();

  out.metadata_json = io::read_string(in, "metadata");
  return out;
}

}  // namespace saecf

#endif
