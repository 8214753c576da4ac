#include "gplab/gradcheck.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "gplab/langmodel.hpp"

namespace gplab::gradcheck {

using namespace gplab::ad;

namespace {

constexpr std::uint64_t kPointStream = 0x6C4E;

// Reduces an output with fixed weights so every entry reaches the scalar.
NodeRef weighted(NodeRef y) {
  Tensor w(y.shape());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.3 * static_cast<double>(i) + 0.4);
  return sum(y * y.tape().constant(w));
}

std::vector<Tensor> param_points(const nn::ParamSet& params) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : params) out.push_back(t);
  return out;
}

nn::ParamSet randomized(nn::ParamSet p, Rng& rng) {
  for (auto& [name, t] : p)
    for (auto& v : t.values()) v = 0.5 * rng.normal();
  return p;
}

Tensor uniform_eps(std::size_t m, Rng& rng) {
  Tensor e(Shape{m});
  for (auto& v : e.values()) v = rng.uniform();
  return e;
}

// An unresolvable step counts as a failure rather than aborting the suite.
double fd_error(const ScalarGraph& f, std::span<const Tensor> points, int order) {
  try {
    return check_gradient_fd(f, points, kStep, order).max_error;
  } catch (const Error&) {
    return std::numeric_limits<double>::infinity();
  }
}

void check_orders(std::vector<Result>& out, const std::string& name, std::uint64_t seed,
                  const ScalarGraph& f, std::span<const Tensor> points) {
  out.push_back({name, seed, 1, fd_error(f, points, 1),
                 kFirstOrderTolerance});
  out.push_back({name, seed, 2, fd_error(f, points, 2),
                 kSecondOrderTolerance});
}

void check_primitive(std::vector<Result>& out, const Primitive& p, std::uint64_t seed) {
  Rng rng(seed, kPointStream);
  std::vector<Tensor> points;
  for (const auto& s : p.shapes) points.push_back(random_point(s, p.lo, p.hi, p.gap, rng));
  const ScalarGraph f = [&](Tape&, std::span<const NodeRef> in) { return weighted(p.build(in)); };
  check_orders(out, p.name, seed, f, points);
  const ScalarGraph norm_of_grad = [&](Tape& t, std::span<const NodeRef> in) {
    const auto g = t.grad(f(t, in), in);
    NodeRef acc = t.scalar(0.0);
    for (const auto& gi : g) acc = acc + sum(row_norm(reshape(gi, Shape{1, shape_size(gi.shape())})));
    return acc;
  };
  out.push_back({p.name + "_grad_norm", seed, 2, fd_error(norm_of_grad, points, 1),
                 kSecondOrderTolerance});
}

void check_critic_loss(std::vector<Result>& out, const std::string& name, std::uint64_t seed,
                       const gan::Network& critic, const Tensor& real, const Tensor& fake,
                       const Tensor& eps, gan::Sidedness sided) {
  const Tensor xhat = gan::interpolate_samples(real, fake, eps);
  const std::vector<Tensor> points = param_points(critic.params);
  const ScalarGraph f = [&](Tape& t, std::span<const NodeRef> in) {
    const nn::BoundParams bp(critic.params, {in.begin(), in.end()});
    return gan::critic_loss(gan::CriticRegime::penalty(10.0, sided), critic, bp,
                            t.constant(real), t.constant(fake), t.constant(xhat))
        .loss;
  };
  check_orders(out, name, seed, f, points);
}

Tensor normal_tensor(Shape s, Rng& rng) {
  Tensor t(std::move(s));
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

Tensor random_point(const Shape& shape, double lo, double hi, double gap, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.values()) {
    do v = rng.uniform(lo, hi);
    while (std::abs(v) < gap);
  }
  return t;
}

std::vector<Primitive> primitives() {
  using S = Shape;
  return {
      {"add", {S{2, 3}, S{3}}, -2, 2, 0, [](auto in) { return in[0] + in[1]; }},
      {"subtract", {S{2, 3}, S{2, 3}}, -2, 2, 0, [](auto in) { return in[0] - in[1]; }},
      {"multiply", {S{2, 3}, S{2, 3}}, -2, 2, 0, [](auto in) { return in[0] * in[1]; }},
      {"divide", {S{2, 3}, S{2, 3}}, 0.5, 2, 0, [](auto in) { return in[0] / in[1]; }},
      {"scale", {S{4}}, -2, 2, 0, [](auto in) { return scale(in[0], -1.7); }},
      {"add_scalar", {S{4}}, -2, 2, 0, [](auto in) { return square(in[0] + 0.3); }},
      {"matmul", {S{2, 3}, S{3, 2}}, -2, 2, 0, [](auto in) { return matmul(in[0], in[1]); }},
      {"matmul_nt", {S{2, 3}, S{2, 3}}, -2, 2, 0,
       [](auto in) { return matmul(in[0], in[1], false, true); }},
      {"matmul_tn", {S{3, 2}, S{3, 2}}, -2, 2, 0,
       [](auto in) { return matmul(in[0], in[1], true, false); }},
      {"matmul_tt", {S{3, 2}, S{2, 3}}, -2, 2, 0,
       [](auto in) { return matmul(in[0], in[1], true, true); }},
      {"sum", {S{2, 3}}, -2, 2, 0, [](auto in) { return sum(square(in[0])); }},
      {"mean", {S{2, 3}}, -2, 2, 0, [](auto in) { return mean(in[0] * in[0]); }},
      {"sum_last", {S{2, 3}}, -2, 2, 0, [](auto in) { return square(sum_last(in[0])); }},
      {"mean_last", {S{2, 3}}, -2, 2, 0, [](auto in) { return square(mean_last(in[0])); }},
      {"pow", {S{5}}, 0.3, 2, 0, [](auto in) { return pow(in[0], 2.5); }},
      {"sqrt", {S{5}}, 0.3, 2, 0, [](auto in) { return sqrt(in[0]); }},
      {"exp", {S{5}}, -2, 1, 0, [](auto in) { return exp(in[0]); }},
      {"log", {S{5}}, 0.3, 3, 0, [](auto in) { return log(in[0]); }},
      {"maximum", {S{6}}, -2, 2, 0.1, [](auto in) { return maximum(in[0], 0.0) * in[0]; }},
      {"clamp", {S{6}}, -2, 2, 0.1, [](auto in) { return clamp(in[0], -1.0, 1.0) * in[0]; }},
      {"relu", {S{6}}, -2, 2, 0.1, [](auto in) { return relu(in[0]) * in[0]; }},
      {"leaky_relu", {S{6}}, -2, 2, 0.1,
       [](auto in) { return leaky_relu(in[0], 0.2) * in[0]; }},
      {"tanh", {S{6}}, -2, 2, 0, [](auto in) { return tanh(in[0]); }},
      {"softplus", {S{6}}, -3, 3, 0, [](auto in) { return softplus(in[0]); }},
      {"sigmoid", {S{6}}, -3, 3, 0, [](auto in) { return sigmoid(in[0]); }},
      {"softmax", {S{2, 4}}, -2, 2, 0, [](auto in) { return softmax(in[0]); }},
      {"softmax_rank3", {S{2, 3, 4}}, -2, 2, 0, [](auto in) { return softmax(in[0]); }},
      {"conv1d", {S{2, 2, 5}, S{3, 2, 3}}, -1, 1, 0, [](auto in) { return conv1d(in[0], in[1]); }},
      {"concat", {S{2, 2}, S{2, 3}}, -2, 2, 0,
       [](auto in) {
         const NodeRef parts[2] = {in[0], square(in[1])};
         return concat(parts, 1);
       }},
      {"slice", {S{3, 4}}, -2, 2, 0, [](auto in) { return square(slice(in[0], 1, 1, 3)); }},
      {"pad", {S{2, 3}}, -2, 2, 0, [](auto in) { return square(pad(in[0], 1, 2, 1)); }},
      {"permute", {S{2, 3, 2}}, -2, 2, 0,
       [](auto in) { return square(permute(in[0], Shape{2, 0, 1})); }},
      {"reshape", {S{2, 3}}, -2, 2, 0,
       [](auto in) { return square(reshape(in[0], Shape{3, 2})); }},
      {"broadcast_sum_to", {S{3}, S{2, 3}}, -2, 2, 0,
       [](auto in) { return sum_to(in[0] * in[1], Shape{1, 3}) * in[0]; }},
      {"broadcast_to", {S{2, 1}}, -2, 2, 0,
       [](auto in) { return square(broadcast_to(in[0], Shape{3, 2, 4})); }},
      {"row_norm", {S{3, 4}}, -2, 2, 0, [](auto in) { return tanh(row_norm(in[0])); }},
      {"layer_norm", {S{2, 4}}, -2, 2, 0, [](auto in) { return normalize_last(in[0], 1e-5); }},
  };
}

std::vector<Result> run_suite(std::uint64_t first_seed, std::size_t seeds) {
  std::vector<Result> out;
  const auto prims = primitives();
  for (std::uint64_t seed = first_seed; seed < first_seed + seeds; ++seed) {
    for (const auto& p : prims) check_primitive(out, p, seed);

    for (auto act : {nn::Activation::tanh, nn::Activation::shifted_softplus}) {
      const nn::MlpSpec spec{{2, 4, 3, 1}, {act}};
      Rng rng(seed, kPointStream + 1);
      const gan::Network critic = gan::mlp_network(spec, randomized(nn::init_params(spec, 0), rng));
      const Tensor real = normal_tensor(Shape{3, 2}, rng), fake = normal_tensor(Shape{3, 2}, rng);
      const Tensor eps = uniform_eps(3, rng);
      const std::string base = std::string("critic_loss_mlp_") + nn::activation_name(act);
      check_critic_loss(out, base, seed, critic, real, fake, eps, gan::Sidedness::two_sided);
      check_critic_loss(out, base + "_one_sided", seed, critic, real, fake, eps,
                        gan::Sidedness::one_sided);
    }

    {
      const lm::LmCriticSpec spec{3, 3, 3, 2, 8};
      Rng rng(seed, kPointStream + 2);
      const gan::Network critic = lm::critic_network(spec, randomized(lm::init_critic(spec, 0), rng));
      const lm::LmGeneratorSpec gspec{4, 2, 3, 3, 8};
      const gan::Network gen = lm::generator_network(gspec, randomized(lm::init_generator(gspec, 0), rng));
      const Tensor fake = gen.evaluate(normal_tensor(Shape{2, 4}, rng));
      Tensor real(Shape{2, 8, 3});
      for (std::size_t i = 0; i < 16; ++i) real[i * 3 + rng.below(3)] = 1.0;
      check_critic_loss(out, "critic_loss_sequence", seed, critic, real, fake, uniform_eps(2, rng),
                        gan::Sidedness::two_sided);
    }
  }
  return out;
}

bool all_passed(const std::vector<Result>& results) {
  for (const auto& r : results)
    if (!r.passed()) return false;
  return true;
}

void write_results_csv(std::ostream& out, const std::vector<Result>& results) {
  out << "check,seed,order,error,tolerance,passed\n";
  char buf[64];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%.6e,%.0e", r.error, r.tolerance);
    out << r.name << ',' << r.seed << ',' << r.order << ',' << buf << ','
        << (r.passed() ? 1 : 0) << '\n';
  }
}

}  // namespace gplab::gradcheck
