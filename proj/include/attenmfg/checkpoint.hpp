#pragma once

#include "attenmfg/policy.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace attenmfg {

struct AdamState {
    PolicyParams first;   // m
    PolicyParams second;  // v
    std::int64_t steps = 0;
};

// Checkpoint layout (all text lines end in '\n'):
//
//   attenmfg-ckpt/1
//   key=value             hyperparameters and training state, one per line
//   ...
//   end
//   <f64 LE ...>          every tensor, PolicyParams::visit order, row-major
//   <f64 LE ...>          Adam first moments, same order (optimizer=1 only)
//   <f64 LE ...>          Adam second moments, same order (optimizer=1 only)
//
// Keys: hidden, heads, layers, site_vocab, logit_clip, channels, tensors,
// parameters, optimizer, adam_steps, epoch, global_step, seed, config_hash,
// train_config.
struct Checkpoint {
    PolicyParams params;
    std::optional<AdamState> optimizer;
    int epoch = 0;
    std::int64_t global_step = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string train_config;  // generator configuration name the policy was trained on
};

inline constexpr std::string_view kCheckpointMagic = "attenmfg-ckpt/1";

std::string save_checkpoint(const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::string_view bytes);

void write_checkpoint_file(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::string& path);

}  // namespace attenmfg
