#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "permin/adgraph.hpp"
#include "permin/fieldio.hpp"

namespace permin {

/// Squared-slowness model (s^2/m^2) on a 2D grid, dims {nx, nz}.
struct SlownessModel {
  Field m;
  int sponge_width = 20;

  void validate() const;
};

struct AcquisitionGeometry {
  std::vector<std::array<double, 2>> sources;    // (x, z) meters
  std::vector<std::array<double, 2>> receivers;  // (x, z) meters
  double record_length = 0.0;  // seconds
  double dt_record = 0.0;      // seconds
  /// Upper bound on medium velocity; fixes the simulation step so the
  /// source shape does not change when the model is updated.
  double max_velocity = 6000.0;

  std::size_t num_record_samples() const;
  void validate(const Field& model) const;
};

/// Source signature sampled at the simulation time step.
struct Wavelet {
  std::vector<double> samples;
  double dt = 0.0;
  double peak_freq = 0.0;
};

/// Time discretization shared by forward, Born and adjoint kernels.
struct Discretization {
  double dt = 0.0;       // simulation step
  std::size_t n_sub = 1; // simulation steps per record sample
  std::size_t nt = 0;    // total simulation steps (state count)
};

Discretization make_discretization(const SlownessModel& model,
                                   const AcquisitionGeometry& geom);

/// Zero-mean Ricker at the model/geometry's simulation step.
Wavelet ricker_wavelet(const SlownessModel& model, const AcquisitionGeometry& geom,
                       double peak_freq);

struct ShotRecord {
  std::size_t source_index = 0;
  std::size_t nrec = 0;
  std::size_t nt = 0;  // record samples
  double dt = 0.0;     // record sample interval
  std::vector<double> data;  // receivers-major: data[r*nt + t]

  double& at(std::size_t r, std::size_t t) { return data[r * nt + t]; }
  double at(std::size_t r, std::size_t t) const { return data[r * nt + t]; }
};

struct TimeLapseData {
  std::vector<std::vector<ShotRecord>> vintages;
};

/// Solves m u_tt = Lap(u) + q with leapfrog time stepping, 4th-order
/// space and a Gaussian-taper sponge, and samples at the receivers.
std::vector<ShotRecord> forward_model(const SlownessModel& model,
                                      const AcquisitionGeometry& geom,
                                      const Wavelet& wavelet,
                                      const std::vector<std::size_t>& shots);

/// Linearized (Born) modeling: exact derivative of the discrete forward
/// map with respect to m, applied to dm.
std::vector<ShotRecord> born(const SlownessModel& model, const Field& dm,
                             const AcquisitionGeometry& geom, const Wavelet& wavelet,
                             const std::vector<std::size_t>& shots);

/// Exact discrete adjoint of born: back-propagates the residual records
/// and accumulates the model-space gradient, summed over shots.
Field migrate(const SlownessModel& model, const std::vector<ShotRecord>& residual,
              const AcquisitionGeometry& geom, const Wavelet& wavelet);

/// Adjoint of forward_model in its source argument: receiver records
/// back-propagated and sampled at each shot's source position. One time
/// series per shot, at the simulation step.
std::vector<std::vector<double>> source_cotangent(
    const SlownessModel& model, const std::vector<ShotRecord>& residual,
    const AcquisitionGeometry& geom);

/// Context bound into the "wave_forward" tape rule.
struct WaveRuleContext {
  std::vector<double> spacing;
  std::vector<double> origin;
  int sponge_width = 20;
  AcquisitionGeometry geometry;
  double wavelet_peak_freq = 0.0;
  std::vector<std::size_t> shots;
};

/// Registers "wave_forward": slots (m, q, context). Pullback returns
/// (migrate for m, back-propagated source record for q, no-tangent for
/// the context). Output shape {nshots, nrec, nt_record}.
void register_wave_rules();

/// Packs records into the rule's output layout and back.
ad::NdArray records_to_array(const std::vector<ShotRecord>& records);
std::vector<ShotRecord> array_to_records(const ad::NdArray& array,
                                         const std::vector<std::size_t>& shots,
                                         const AcquisitionGeometry& geom);

/// One independent simulation per vintage; no cross-vintage coupling.
TimeLapseData timelapse_forward(const std::vector<SlownessModel>& models,
                                const std::vector<AcquisitionGeometry>& geoms,
                                const std::vector<Wavelet>& wavelets);

/// SSHT v1 shot-record file.
void write_shot(const ShotRecord& record, const AcquisitionGeometry& geom,
                const std::filesystem::path& path);
ShotRecord read_shot(const std::filesystem::path& path);

}  // namespace permin
