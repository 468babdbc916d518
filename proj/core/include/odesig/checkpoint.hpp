#pragma once

#include <string>

#include "odesig/training.hpp"

namespace odesig {

// FNV-1a of a canonical string; used to stamp artifacts with the config that
// produced them.
std::string fnv1a_hex(const std::string& text);

struct CheckpointMeta {
    std::string config_hash;
    uint64_t seed = 0;
};

struct Checkpoint {
    ModelParams params;
    TrainConfig config;
    CheckpointMeta meta;
};

// JSON container with config, ablation flags, seed and every tensor. Doubles
// are serialized losslessly, so save/load round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelParams& params, const TrainConfig& cfg,
                     const CheckpointMeta& meta);
Checkpoint load_checkpoint(const std::string& path);

} // namespace odesig
