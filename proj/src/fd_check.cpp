#include "gplab/fd_check.hpp"

#include <cmath>
#include <string>

namespace gplab::ad {
namespace {

double rel_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

std::string leaf_name(std::size_t i) { return "fd_input_" + std::to_string(i); }

void track(FdReport& r, double analytic, double numeric, std::size_t input, std::size_t index) {
  const double e = rel_error(analytic, numeric);
  if (e > r.max_error || r.coordinates == 0) {
    r.max_error = std::max(r.max_error, e);
    r.worst_input = input;
    r.worst_index = index;
    r.analytic = analytic;
    r.numeric = numeric;
  }
  ++r.coordinates;
}

}  // namespace

FdReport check_gradient_fd(const ScalarGraph& f, std::span<const Tensor> points, double h,
                           int order) {
  if (!(h > 0.0)) throw Error("finite-difference step must be positive");
  if (order != 1 && order != 2) throw Error("finite-difference order must be 1 or 2");

  Tape tape;
  std::vector<NodeRef> leaves;
  std::map<std::string, Tensor> bindings;
  for (std::size_t i = 0; i < points.size(); ++i) {
    leaves.push_back(tape.leaf(leaf_name(i), points[i]));
    bindings.emplace(leaf_name(i), points[i]);
  }
  const NodeRef y = f(tape, leaves);
  if (!y.shape().empty()) throw ShapeError("finite-difference check needs a scalar graph");
  const std::vector<NodeRef> grads = tape.grad(y, leaves);

  FdReport report;
  bool any_numeric = false;
  bool any_analytic = false;

  // Value of `probe` with input `i` coordinate `k` displaced by `delta`.
  auto evaluate = [&](NodeRef probe, std::size_t i, std::size_t k, double delta) {
    Tensor& p = bindings.at(leaf_name(i));
    const double saved = p[k];
    p[k] = saved + delta;
    Tensor v = tape.eval_forward(bindings, probe);
    p[k] = saved;
    return v;
  };

  if (order == 1) {
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Tensor analytic = grads[i].value();
      for (std::size_t k = 0; k < points[i].size(); ++k) {
        const double fp = evaluate(y, i, k, h).item();
        const double fm = evaluate(y, i, k, -h).item();
        const double fd = (fp - fm) / (2.0 * h);
        any_numeric |= fd != 0.0;
        any_analytic |= analytic[k] != 0.0;
        track(report, analytic[k], fd, i, k);
      }
    }
  } else {
    // Row (i, k) of the Hessian: gradient of <grad_i, e_k> for every input.
    // All analytic rows are built before any perturbed replay touches node values.
    std::vector<std::vector<Tensor>> rows;
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t k = 0; k < points[i].size(); ++k) {
        Tensor basis(points[i].shape());
        basis[k] = 1.0;
        const NodeRef component = sum(mul(grads[i], tape.constant(basis)));
        std::vector<Tensor> row;
        for (const NodeRef& r : tape.grad(component, leaves)) row.push_back(r.value());
        rows.push_back(std::move(row));
      }
    }
    // One pair of replays per perturbed coordinate gives a whole Hessian column.
    for (std::size_t j = 0; j < points.size(); ++j) {
      for (std::size_t c = 0; c < points[j].size(); ++c) {
        std::size_t row_at = 0;
        for (std::size_t i = 0; i < points.size(); ++i) {
          const Tensor gp = evaluate(grads[i], j, c, h);
          const Tensor gm = evaluate(grads[i], j, c, -h);
          for (std::size_t k = 0; k < points[i].size(); ++k, ++row_at) {
            // d grad_i[k] / d x_j[c], from differences of the analytic gradient.
            const double analytic = rows[row_at][j][c];
            const double fd = (gp[k] - gm[k]) / (2.0 * h);
            any_numeric |= fd != 0.0;
            any_analytic |= analytic != 0.0;
            track(report, analytic, fd, j, k * points[j].size() + c);
          }
        }
      }
    }
  }
  // Restore node values at the unperturbed point.
  tape.eval_forward(bindings, y);

  if (any_analytic && !any_numeric) {
    throw Error("finite-difference step " + std::to_string(h) +
                " too small to resolve the function: all differences are zero");
  }
  return report;
}

}  // namespace gplab::ad
