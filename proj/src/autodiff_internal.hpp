#pragma once

#include <vector>

#include "gplab/autodiff.hpp"

namespace gplab::ad::detail {

// Forward value of `node` from the current values of its inputs.
Tensor compute(const Node& node, const std::vector<Node>& nodes);

}  // namespace gplab::ad::detail
