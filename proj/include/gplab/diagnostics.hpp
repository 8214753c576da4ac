#pragma once

// Figure instruments as data: value surfaces, per-layer gradient norms,
// weight histograms, penalty statistics and train/validation tracking.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "gplab/gan.hpp"

namespace gplab::diag {

using ad::NodeRef;
using ad::Tape;
using gan::Network;
using nn::ParamSet;

// ---- value surface -------------------------------------------------------

struct GridSpec {
  double x_lo = -3.0, x_hi = 3.0;
  double y_lo = -3.0, y_hi = 3.0;
  std::size_t nx = 64, ny = 64;

  void validate() const;
  double x(std::size_t i) const;
  double y(std::size_t j) const;
};

struct Surface {
  GridSpec grid;
  std::vector<double> values;  // row-major: index j * nx + i for (x_i, y_j)

  double at(std::size_t i, std::size_t j) const { return values[j * grid.nx + i]; }
};

Surface value_surface(const Network& critic, const GridSpec& grid);

void write_surface_csv(std::ostream& out, const Surface& s);
// Heat map with optional overlay points ([n, 2]).
void write_surface_svg(std::ostream& out, const Surface& s, const Tensor* points = nullptr);

// ---- per-layer gradient norms --------------------------------------------

// Builds a scalar loss from the per-layer outputs of a traced forward pass.
using LossBuilder = std::function<NodeRef(const std::vector<NodeRef>& trace)>;

// ||dL / d a_l|| over the whole batch for every traced activation a_l,
// input side first.
std::vector<double> layer_gradient_norms(const Network& critic, const LossBuilder& loss,
                                         const Tensor& batch);

// Unpenalized WGAN critic loss mean D(fake) - mean D(real) on a batch that
// stacks m real rows over m fake rows.
LossBuilder wgan_critic_objective(std::size_t m);

// Least-squares slope of ln(norm) against layer index.
double log_norm_slope(const std::vector<double>& norms);

// ---- weight histogram ----------------------------------------------------

struct Histogram {
  std::vector<double> edges;  // bins + 1, uniform
  std::vector<std::size_t> counts;

  std::size_t total() const;
};

// Out-of-range entries are counted in the edge bins.
Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi);
Histogram weight_histogram(const ParamSet& params, std::size_t bins, double lo, double hi);
void write_histogram_csv(std::ostream& out, const Histogram& h);

// Weight matrices and kernels only (names ending in ".weight").
std::vector<double> weight_entries(const ParamSet& params);
std::vector<double> all_entries(const ParamSet& params);

// ---- penalty statistics --------------------------------------------------

// Mean of ||grad D(x^)|| and mean (||grad D(x^)|| - 1)^2 over the rows of xhat.
gan::NormStats penalty_norm_stats(const Network& critic, const Tensor& xhat);

// ---- train / validation tracking -----------------------------------------

inline constexpr std::size_t kTrackCadence = 10;

struct TrackPoint {
  std::size_t iter = 0;
  double train_negloss = 0.0;  // mean D(x_train) - mean D(x~)
  double validation_negloss = 0.0;
  double gap() const { return train_negloss - validation_negloss; }
};

TrackPoint evaluate_split(const Network& critic, const Tensor& train, const Tensor& validation,
                          const Tensor& fake, std::size_t iter = 0);

// Records a TrackPoint every `cadence` generator iterations. The fake batch
// is G(z) for a fixed latent batch under the current generator parameters.
class TrainValTracker {
 public:
  TrainValTracker(Network critic, Network generator, Tensor train, Tensor validation,
                  Tensor latent, std::size_t cadence = kTrackCadence);

  void observe(std::size_t iter, const ParamSet& gen_params, const ParamSet& critic_params);
  gan::Hooks hooks();

  const std::vector<TrackPoint>& points() const noexcept { return points_; }

 private:
  Network critic_, generator_;
  Tensor train_, validation_, latent_;
  std::size_t cadence_;
  std::vector<TrackPoint> points_;
};

void write_track_csv(std::ostream& out, const std::vector<TrackPoint>& points);

// ---- series helpers ------------------------------------------------------

// Averages of every full window: entry k averages values[k .. k + window - 1].
std::vector<double> moving_average(const std::vector<double>& values, std::size_t window);
double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys);

// Simple rectilinear line plot of one or more series.
struct Series {
  std::string label;
  std::vector<double> x, y;
};
void write_lines_svg(std::ostream& out, const std::vector<Series>& series,
                     const std::string& title);

}  // namespace gplab::diag
