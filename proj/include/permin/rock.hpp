#pragma once

#include "permin/adgraph.hpp"
#include "permin/fieldio.hpp"

namespace permin {

/// Moduli and fluid densities for the patchy-saturation map.
///
/// Density convention: `rhow` is the density of the fluid displacing brine
/// (CO2 side, 700 kg/m3) and `rhoo` is brine (1000 kg/m3), so that bulk
/// density decreases as CO2 displaces brine.
struct PatchyConstants {
  double bulk_min = 36.6e9;   // mineral bulk modulus, Pa
  double bulk_fl1 = 2.735e9;  // brine, Pa
  double bulk_fl2 = 0.125e9;  // CO2, Pa
  double rhow = 7e2;          // kg/m3
  double rhoo = 1e3;          // kg/m3

  void validate() const;
};

struct RockState {
  Field sw;   // CO2 saturation in [0, 1]
  Field vp;   // m/s
  Field rho;  // kg/m3
  Field phi;  // porosity in (0, 1)

  void validate() const;
};

struct PatchyResult {
  Field vp_new;
  Field rho_new;
};

/// Element-wise patchy-saturation map: saturation to (wavespeed, density).
PatchyResult patchy(const RockState& state, const PatchyConstants& consts);

/// Registers the "patchy" tape rule. Slots: sw, vp, rho (differentiable),
/// phi (array, non-differentiable), constants (opaque PatchyConstants).
/// Output is stacked [vp_new; rho_new] along a leading axis of extent 2.
void register_patchy_rule();

/// Convenience for building the rule's stacked output shape.
ad::NdArray stack_pair(const Field& a, const Field& b);

}  // namespace permin
