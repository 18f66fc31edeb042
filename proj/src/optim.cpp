#include "permin/optim.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

namespace permin {

AdamState AdamState::init(std::size_t n, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

std::pair<AdamState, std::vector<double>> adam_update(
    const AdamState& state, const std::vector<double>& params,
    const std::vector<double>& grad) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw Error("adam_update: shape mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i]))
      throw Error("adam_update: non-finite gradient at index " + std::to_string(i));

  AdamState next = state;
  next.step = state.step + 1;
  std::vector<double> out = params;
  const auto& c = state.config;
  double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(next.step));
  double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(next.step));
  for (std::size_t i = 0; i < grad.size(); ++i) {
    next.m[i] = c.beta1 * next.m[i] + (1.0 - c.beta1) * grad[i];
    next.v[i] = c.beta2 * next.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    double mhat = next.m[i] / bc1;
    double vhat = next.v[i] / bc2;
    out[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
  return {std::move(next), std::move(out)};
}

std::vector<std::size_t> subsample_shots(std::size_t n_total, std::size_t n_batch,
                                         RngStream& stream) {
  if (n_total == 0) throw Error("subsample_shots: n_total must be positive");
  if (n_batch == 0) throw Error("subsample_shots: n_batch must be positive");
  std::vector<std::size_t> out(n_batch);
  for (auto& i : out) i = stream.uniform_below(n_total);
  return out;
}

std::vector<double> project_box(const std::vector<double>& x,
                                const std::vector<double>& lower,
                                const std::vector<double>& upper) {
  if (x.size() != lower.size() || x.size() != upper.size())
    throw Error("project_box: shape mismatch");
  std::vector<double> out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (lower[i] > upper[i])
      throw Error("project_box: lower > upper at index " + std::to_string(i));
    out[i] = std::min(std::max(out[i], lower[i]), upper[i]);
  }
  return out;
}

void Trajectory::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error("Trajectory::write_csv: cannot open " + path);
  os << "iteration,loss,grad_norm,wall_ms\n";
  for (const auto& r : records) {
    os.precision(17);
    os << r.iteration << "," << r.loss << "," << r.grad_norm << "," << r.wall_ms << "\n";
  }
}

Trajectory run_inversion(const ad::LossFn& loss, const ad::NdArray& x0,
                         const RunConfig& config) {
  if (config.maxiter < 1) throw Error("run_inversion: maxiter must be >= 1");

  Trajectory traj;
  ad::NdArray x = x0;
  AdamState adam = AdamState::init(x.size(), config.adam);

  for (int it = 0; it < config.maxiter; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    if (config.pre_iteration) config.pre_iteration(it);

    ad::GradientResult res;
    try {
      res = ad::gradient(loss, {x});
    } catch (const Error& e) {
      traj.aborted = true;
      traj.abort_reason = e.what();
      break;
    }
    if (!res.grads[0])
      throw Error("run_inversion: loss does not depend on the optimization variable");
    const auto& g = res.grads[0]->data;

    double gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);

    if (config.driver == Driver::GradientDescent) {
      for (std::size_t i = 0; i < x.data.size(); ++i)
        x.data[i] -= config.gd_steplength * g[i];
    } else {
      auto [next, updated] = adam_update(adam, x.data, g);
      adam = std::move(next);
      x.data = std::move(updated);
    }

    auto t1 = std::chrono::steady_clock::now();
    double wall = std::chrono::duration<double, std::milli>(t1 - t0).count();
    traj.records.push_back({it, res.value, gnorm, wall});
    if (config.post_iteration) config.post_iteration(it, x.data);
  }

  traj.final_params = x.data;
  return traj;
}

}  // namespace permin
