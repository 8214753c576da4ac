#pragma once

// Finite-difference suite over every primitive and the penalized critic loss.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gplab/fd_check.hpp"
#include "gplab/random.hpp"

namespace gplab::gradcheck {

using ad::NodeRef;

inline constexpr double kStep = 1e-5;
inline constexpr double kFirstOrderTolerance = 1e-5;
inline constexpr double kSecondOrderTolerance = 1e-4;
inline constexpr std::size_t kDefaultSeeds = 10;

struct Primitive {
  std::string name;
  std::vector<Shape> shapes;
  double lo = -2.0, hi = 2.0;
  double gap = 0.0;  // entries are kept at least this far from 0
  std::function<NodeRef(std::span<const NodeRef>)> build;
};

std::vector<Primitive> primitives();

// Random entries in [lo, hi] with |v| >= gap.
Tensor random_point(const Shape& shape, double lo, double hi, double gap, Rng& rng);

struct Result {
  std::string name;
  std::uint64_t seed = 0;
  int order = 1;  // derivatives of the graph inputs involved
  double error = 0.0;
  double tolerance = 0.0;

  bool passed() const { return error < tolerance; }
};

// Every primitive at orders 1 and 2 plus the norm of its gradient, then the
// penalized critic loss w.r.t. critic parameters for MLP and sequence
// critics, each at seeds first_seed .. first_seed + seeds - 1.
std::vector<Result> run_suite(std::uint64_t first_seed = 0, std::size_t seeds = kDefaultSeeds);

bool all_passed(const std::vector<Result>& results);
void write_results_csv(std::ostream& out, const std::vector<Result>& results);

}  // namespace gplab::gradcheck
