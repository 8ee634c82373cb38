#pragma once

#include "hint/config.hpp"
#include "hint/hypernet.hpp"
#include "hint/transformer.hpp"

#include <string>
#include <vector>

namespace hint {

// On-disk training state: model config, the train config that produced it,
// and every named parameter (model.* and, when present, hypernet.*). The
// fingerprint covers all parameter values; load verifies it, so silent
// corruption surfaces as a DataError instead of garbage predictions.
struct CheckpointData {
    ModelConfig model_config;
    std::string train_config_json;
    bool has_generator = false;
    std::vector<std::pair<std::string, Tensor>> arrays;
    std::string fingerprint;    // hex, recomputed and checked on load
    std::string manifest_hash;  // hex hash of the producing run's manifest
    int steps_taken = 0;
};

std::string checkpoint_fingerprint(const TransformerModel& model,
                                   const Hypernetwork& hyper);

void save_checkpoint(const std::string& path, const TransformerModel& model,
                     const Hypernetwork& hyper, const std::string& train_config_json,
                     const std::string& manifest_hash, int steps_taken);

CheckpointData load_checkpoint_data(const std::string& path);

// Copies checkpoint arrays into freshly initialized model/hypernet storage.
// Missing or extra arrays raise DataError naming the offender.
void apply_checkpoint_arrays(const CheckpointData& ck, TransformerModel& model,
                             Hypernetwork& hyper);

} // namespace hint
