#include "gplab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace gplab::diag {
namespace {

constexpr std::size_t kChunk = 4096;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

// Short form for SVG coordinates.
std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

// ---- value surface -------------------------------------------------------

void GridSpec::validate() const {
  if (nx < 2 || ny < 2) throw ConfigError("grid resolution must be at least 2x2");
  if (!(x_hi > x_lo) || !(y_hi > y_lo)) throw ConfigError("grid ranges must be non-degenerate");
}

double GridSpec::x(std::size_t i) const {
  return x_lo + (x_hi - x_lo) * static_cast<double>(i) / static_cast<double>(nx - 1);
}

double GridSpec::y(std::size_t j) const {
  return y_lo + (y_hi - y_lo) * static_cast<double>(j) / static_cast<double>(ny - 1);
}

Surface value_surface(const Network& critic, const GridSpec& grid) {
  grid.validate();
  Tensor pts(Shape{grid.nx * grid.ny, 2});
  for (std::size_t j = 0; j < grid.ny; ++j) {
    for (std::size_t i = 0; i < grid.nx; ++i) {
      pts.at(j * grid.nx + i, 0) = grid.x(i);
      pts.at(j * grid.nx + i, 1) = grid.y(j);
    }
  }
  Surface s{grid, {}};
  for (std::size_t b = 0; b < pts.dim(0); b += kChunk) {
    const Tensor v = critic.evaluate(pts.rows(b, std::min(pts.dim(0), b + kChunk)));
    s.values.insert(s.values.end(), v.values().begin(), v.values().end());
  }
  if (s.values.size() != grid.nx * grid.ny) throw ShapeError("critic must output one score per point");
  return s;
}

void write_surface_csv(std::ostream& out, const Surface& s) {
  out << "x,y,value\n";
  for (std::size_t j = 0; j < s.grid.ny; ++j)
    for (std::size_t i = 0; i < s.grid.nx; ++i)
      out << num(s.grid.x(i)) << ',' << num(s.grid.y(j)) << ',' << num(s.at(i, j)) << '\n';
}

namespace {

// Diverging blue-white-red map for t in [0, 1].
std::string color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double u = t / 0.5;
    r = static_cast<int>(40 + 215 * u), g = static_cast<int>(70 + 185 * u), b = 255;
  } else {
    const double u = (t - 0.5) / 0.5;
    r = 255, g = static_cast<int>(255 - 185 * u), b = static_cast<int>(255 - 215 * u);
  }
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

void write_surface_svg(std::ostream& out, const Surface& s, const Tensor* points) {
  const double size = 400.0;
  const auto& g = s.grid;
  const double cw = size / static_cast<double>(g.nx), ch = size / static_cast<double>(g.ny);
  const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
  const double lo = *mn, span = *mx > *mn ? *mx - *mn : 1.0;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" shape-rendering=\"crispEdges\">\n";
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      // y grows upward in data space.
      out << "<rect x=\"" << px(static_cast<double>(i) * cw) << "\" y=\""
          << px(size - static_cast<double>(j + 1) * ch) << "\" width=\"" << px(cw + 0.5)
          << "\" height=\"" << px(ch + 0.5) << "\" fill=\"" << color((s.at(i, j) - lo) / span)
          << "\"/>\n";
    }
  }
  if (points != nullptr) {
    for (std::size_t k = 0; k < points->dim(0); ++k) {
      const double sx = (points->at(k, 0) - g.x_lo) / (g.x_hi - g.x_lo) * size;
      const double sy = size - (points->at(k, 1) - g.y_lo) / (g.y_hi - g.y_lo) * size;
      out << "<circle cx=\"" << px(sx) << "\" cy=\"" << px(sy)
          << "\" r=\"1.5\" fill=\"#ff9900\"/>\n";
    }
  }
  out << "</svg>\n";
}

// ---- per-layer gradient norms --------------------------------------------

std::vector<double> layer_gradient_norms(const Network& critic, const LossBuilder& loss,
                                         const Tensor& batch) {
  if (!critic.traced) throw Error("critic has no traced forward pass");
  Tape tape;
  const nn::BoundParams bound(tape, critic.params, "", false);
  const auto trace = critic.traced(bound, tape.constant(batch));
  const auto grads = tape.grad(loss(trace), trace);
  std::vector<double> norms;
  for (const auto& g : grads) {
    double s = 0.0;
    for (double v : g.value().values()) s += v * v;
    norms.push_back(std::sqrt(s));
  }
  return norms;
}

LossBuilder wgan_critic_objective(std::size_t m) {
  return [m](const std::vector<NodeRef>& trace) {
    const NodeRef out = trace.back();
    if (out.shape().at(0) != 2 * m) throw ShapeError("batch must stack m real over m fake rows");
    return ad::mean(ad::slice(out, 0, m, 2 * m)) - ad::mean(ad::slice(out, 0, 0, m));
  };
}

double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) throw Error("slope needs two or more points");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
  mx /= n, my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

double log_norm_slope(const std::vector<double>& norms) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < norms.size(); ++i) {
    xs.push_back(static_cast<double>(i));
    ys.push_back(std::log(std::max(norms[i], std::numeric_limits<double>::min())));
  }
  return least_squares_slope(xs, ys);
}

// ---- weight histogram ----------------------------------------------------

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Histogram histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  if (bins < 2) throw ConfigError("histogram needs at least 2 bins");
  if (!(lo < hi)) throw ConfigError("histogram range must satisfy lo < hi");
  Histogram h;
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges.push_back(b == bins ? hi
                                : lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
  }
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("non-finite histogram entry", 0);
    const double pos = std::floor((v - lo) / (hi - lo) * static_cast<double>(bins));
    const double k = std::clamp(pos, 0.0, static_cast<double>(bins - 1));
    ++h.counts[static_cast<std::size_t>(k)];
  }
  return h;
}

std::vector<double> all_entries(const ParamSet& params) {
  std::vector<double> v;
  for (const auto& [name, t] : params) v.insert(v.end(), t.values().begin(), t.values().end());
  return v;
}

std::vector<double> weight_entries(const ParamSet& params) {
  std::vector<double> v;
  for (const auto& [name, t] : params) {
    if (name.ends_with(".weight")) v.insert(v.end(), t.values().begin(), t.values().end());
  }
  return v;
}

Histogram weight_histogram(const ParamSet& params, std::size_t bins, double lo, double hi) {
  return histogram(all_entries(params), bins, lo, hi);
}

void write_histogram_csv(std::ostream& out, const Histogram& h) {
  out << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << num(h.edges[b]) << ',' << num(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
}

// ---- penalty statistics --------------------------------------------------

gan::NormStats penalty_norm_stats(const Network& critic, const Tensor& xhat) {
  if (xhat.rank() < 1 || xhat.dim(0) == 0) return {};
  const std::size_t n = xhat.dim(0);
  const std::size_t width = xhat.size() / n;
  double sum = 0.0, sq = 0.0;
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    Tape tape;
    const nn::BoundParams bound(tape, critic.params, "", false);
    const NodeRef x = tape.leaf("xhat", xhat.rows(b, e));
    const NodeRef g = tape.grad(ad::sum(critic.forward(bound, x)), x);
    const Tensor norms = ad::row_norm(ad::reshape(g, Shape{e - b, width})).value();
    for (double v : norms.values()) {
      sum += v;
      sq += (v - 1.0) * (v - 1.0);
    }
  }
  return {sum / static_cast<double>(n), sq / static_cast<double>(n), n};
}

// ---- train / validation tracking -----------------------------------------

namespace {

double mean_score(const Network& critic, const Tensor& x) {
  const Tensor d = critic.evaluate(x);
  double s = 0.0;
  for (double v : d.values()) s += v;
  return s / static_cast<double>(d.size());
}

}  // namespace

TrackPoint evaluate_split(const Network& critic, const Tensor& train, const Tensor& validation,
                          const Tensor& fake, std::size_t iter) {
  const double f = mean_score(critic, fake);
  return {iter, mean_score(critic, train) - f, mean_score(critic, validation) - f};
}

TrainValTracker::TrainValTracker(Network critic, Network generator, Tensor train,
                                 Tensor validation, Tensor latent, std::size_t cadence)
    : critic_(std::move(critic)),
      generator_(std::move(generator)),
      train_(std::move(train)),
      validation_(std::move(validation)),
      latent_(std::move(latent)),
      cadence_(cadence) {
  if (cadence_ < 1) throw ConfigError("tracking cadence must be at least 1");
}

void TrainValTracker::observe(std::size_t iter, const ParamSet& gen_params,
                              const ParamSet& critic_params) {
  if (iter % cadence_ != 0) return;
  generator_.params = gen_params;
  critic_.params = critic_params;
  points_.push_back(evaluate_split(critic_, train_, validation_, generator_.evaluate(latent_), iter));
}

gan::Hooks TrainValTracker::hooks() {
  gan::Hooks h;
  h.on_iteration = [this](std::size_t it, const ParamSet& g, const ParamSet& c) {
    observe(it, g, c);
  };
  return h;
}

void write_track_csv(std::ostream& out, const std::vector<TrackPoint>& points) {
  out << "iter,train_negloss,validation_negloss,gap\n";
  for (const auto& p : points) {
    out << p.iter << ',' << num(p.train_negloss) << ',' << num(p.validation_negloss) << ','
        << num(p.gap()) << '\n';
  }
}

// ---- series helpers ------------------------------------------------------

std::vector<double> moving_average(const std::vector<double>& values, std::size_t window) {
  if (window < 1) throw Error("window must be at least 1");
  std::vector<double> out;
  if (values.size() < window) return out;
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += values[i];
    if (i >= window) s -= values[i - window];
    if (i + 1 >= window) out.push_back(s / static_cast<double>(window));
  }
  return out;
}

void write_lines_svg(std::ostream& out, const std::vector<Series>& series,
                     const std::string& title) {
  const double w = 640, h = 400, m = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!(x1 > x0)) x1 = x0 + 1.0;
  if (!(y1 > y0)) y1 = y0 + 1.0;
  auto sx = [&](double v) { return m + (v - x0) / (x1 - x0) * (w - 2 * m); };
  auto sy = [&](double v) { return h - m - (v - y0) / (y1 - y0) * (h - 2 * m); };
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect x=\"" << m << "\" y=\"" << m << "\" width=\"" << w - 2 * m << "\" height=\""
      << h - 2 * m << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << m / 2 << "\" text-anchor=\"middle\">" << title
      << "</text>\n";
  out << "<text x=\"" << m << "\" y=\"" << h - m + 16 << "\">" << num(x0) << "</text>\n";
  out << "<text x=\"" << w - m << "\" y=\"" << h - m + 16 << "\" text-anchor=\"end\">" << num(x1)
      << "</text>\n";
  out << "<text x=\"" << m - 4 << "\" y=\"" << h - m << "\" text-anchor=\"end\">" << num(y0)
      << "</text>\n";
  out << "<text x=\"" << m - 4 << "\" y=\"" << m + 10 << "\" text-anchor=\"end\">" << num(y1)
      << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = palette[k % 5];
    out << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      out << px(sx(s.x[i])) << ',' << px(sy(s.y[i])) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << w - m - 4 << "\" y=\"" << m + 16 + 14 * static_cast<double>(k)
        << "\" text-anchor=\"end\" fill=\"" << c << "\">" << s.label << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace gplab::diag
