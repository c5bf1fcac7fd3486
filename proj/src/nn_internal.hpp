#pragma once

#include <cstdint>
#include <span>

#include "koopnet/nn.hpp"

namespace koopnet::nn::detail {

/// Mean loss over the given columns; fills grads when non-null and counts
/// argmax hits when correct is non-null (classification only).
double batch_loss(const MlpModel& model, const RealMatrix& x, const Targets& targets,
                  std::span<const Eigen::Index> columns, const Loss& loss, Gradients* grads, std::int64_t* correct);

}  // namespace koopnet::nn::detail
