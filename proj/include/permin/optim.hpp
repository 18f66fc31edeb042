#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "permin/adgraph.hpp"
#include "permin/fieldio.hpp"

namespace permin {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected ADAM; a pure state machine over (params, grad).
struct AdamState {
  AdamConfig config;
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  std::uint64_t step = 0;

  static AdamState init(std::size_t n, AdamConfig config = {});
};

/// One ADAM step. Returns updated state and parameters; inputs untouched.
std::pair<AdamState, std::vector<double>> adam_update(
    const AdamState& state, const std::vector<double>& params,
    const std::vector<double>& grad);

struct GdConfig {
  double steplength = 1.0;
  int maxiter = 1;
};

/// n_batch i.i.d. uniform draws from [0, n_total) with replacement.
std::vector<std::size_t> subsample_shots(std::size_t n_total, std::size_t n_batch,
                                         RngStream& stream);

/// Element-wise clamp to [lower, upper]; idempotent.
std::vector<double> project_box(const std::vector<double>& x,
                                const std::vector<double>& lower,
                                const std::vector<double>& upper);

struct IterationRecord {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct Trajectory {
  std::vector<IterationRecord> records;
  std::vector<double> final_params;
  bool aborted = false;
  std::string abort_reason;

  void write_csv(const std::string& path) const;
};

enum class Driver { GradientDescent, Adam };

struct RunConfig {
  Driver driver = Driver::GradientDescent;
  int maxiter = 1;
  double gd_steplength = 1.0;
  AdamConfig adam;
  /// Called before each gradient evaluation (e.g. to re-subsample shots).
  std::function<void(int iteration)> pre_iteration;
  /// Called after each update with the current parameters.
  std::function<void(int iteration, const std::vector<double>& params)> post_iteration;
};

/// Iterates the chosen driver on a traced loss with one optimization
/// variable. The loss is re-traced every iteration (fresh tape per
/// evaluation).
Trajectory run_inversion(const ad::LossFn& loss, const ad::NdArray& x0,
                         const RunConfig& config);

}  // namespace permin
