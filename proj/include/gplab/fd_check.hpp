#pragma once

#include <functional>
#include <span>
#include <vector>

#include "gplab/autodiff.hpp"

namespace gplab::ad {

// Builds a rank-0 node from the given leaves on `tape`.
using ScalarGraph = std::function<NodeRef(Tape& tape, std::span<const NodeRef> inputs)>;

struct FdReport {
  double max_error = 0.0;     // max |analytic - fd| / max(1, |analytic|)
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;  // flat coordinate (order 2: row * n + col)
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Central-difference check of a graph's gradient (order 1), or of its
// Hessian against finite differences of the analytic gradient (order 2).
// Throws if every finite difference is zero while the analytic side is not,
// which means `h` is too small to resolve the function.
FdReport check_gradient_fd(const ScalarGraph& f, std::span<const Tensor> points, double h,
                           int order);

inline double check_gradient_fd(const std::function<NodeRef(Tape&, NodeRef)>& f,
                                const Tensor& point, double h, int order) {
  const ScalarGraph g = [&](Tape& t, std::span<const NodeRef> in) { return f(t, in[0]); };
  const Tensor p[1] = {point};
  return check_gradient_fd(g, p, h, order).max_error;
}

}  // namespace gplab::ad
