#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "npae/tensor.hpp"

namespace npae {

struct AdamHyper {
    double step_size = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment accumulators, keyed like the parameters they
/// track. Allocated lazily on the first step.
struct AdamState {
    std::int64_t step_count = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
};

/// One Adam update with bias correction. params and grads must carry
/// identical names and shapes; throws TrainingDiverged on a non-finite
/// gradient, InvalidArgument on a name/shape mismatch.
void adam_step(std::map<std::string, Tensor>& params, const std::map<std::string, Tensor>& grads,
               AdamState& state, const AdamHyper& hyper = {});

/// Same update on parameters owned elsewhere (the trainer's layers).
void adam_step(const std::map<std::string, Tensor*>& params,
               const std::map<std::string, Tensor>& grads, AdamState& state,
               const AdamHyper& hyper = {});

}  // namespace npae
