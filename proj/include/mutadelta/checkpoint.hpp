#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mutadelta/optim.hpp"
#include "mutadelta/params.hpp"
#include "mutadelta/rng.hpp"

namespace mutadelta::cli {

inline constexpr char kCheckpointMagic[] = "MPLM1";
inline constexpr int kCheckpointVersion = 1;

// On-disk layout: 5 magic bytes, a little-endian u64 manifest length, the
// JSON manifest (version, config snapshot, step, rng streams, optimizer
// step, tensor directory with offsets into the payload) and a payload of
// little-endian f64 values.
struct CheckpointData {
  nlohmann::json config;
  int64_t step = 0;
  nlohmann::json rng;     // stream name -> {key, counter}
  int64_t opt_step = -1;  // -1: no optimizer state stored
  std::vector<std::pair<std::string, numkit::Tensor<double>>> tensors;

  const numkit::Tensor<double>* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const nlohmann::json& config, int64_t step,
                     const nlohmann::json& rng, const numkit::ParamSet<double>& params,
                     numkit::AdamW<double>* opt = nullptr);

CheckpointData load_checkpoint(const std::string& path);

// Overwrites every registered parameter from the checkpoint; with an
// optimizer also restores its moments and step count.
void restore_checkpoint(const CheckpointData& ckpt, numkit::ParamSet<double>& params,
                        numkit::AdamW<double>* opt = nullptr);

}  // namespace mutadelta::cli
