#pragma once

#include "affect/nn/graph.hpp"

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <utility>
#include <vector>

namespace affect::nn {

// Checkpoint container: magic, a JSON descriptor (kind, seed, hyperparameters,
// tensor manifest), then raw little-endian float64 weights in manifest order.
struct Checkpoint {
    std::string kind;
    std::uint64_t seed = 0;
    std::string meta_json = "{}"; // architecture descriptor / hyperparameters
    std::vector<std::pair<std::string, Tensor>> tensors;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// manifest-ordered dump of a live parameter store
Checkpoint snapshot(const std::string& kind, std::uint64_t seed, const std::string& meta_json,
                    const ParamStore& store);
// writes checkpoint tensors back into a freshly built store (shapes must match)
void restore(const Checkpoint& ckpt, ParamStore& store);

// sha256 over the raw weight bytes; identifies a trained model in cache keys
std::string weights_digest(const ParamStore& store);

} // namespace affect::nn
