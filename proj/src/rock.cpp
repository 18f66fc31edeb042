#include "permin/rock.hpp"

#include <cmath>

namespace permin {

void PatchyConstants::validate() const {
  if (!(bulk_min > 0 && bulk_fl1 > 0 && bulk_fl2 > 0 && rhow > 0 && rhoo > 0))
    throw Error("PatchyConstants: all values must be strictly positive");
  if (!(bulk_fl2 < bulk_fl1 && bulk_fl1 < bulk_min))
    throw Error("PatchyConstants: require bulk_fl2 < bulk_fl1 < bulk_min");
}

void RockState::validate() const {
  if (!sw.same_shape(vp) || !sw.same_shape(rho) || !sw.same_shape(phi))
    throw Error("RockState: field shapes differ");
  for (std::size_t i = 0; i < sw.size(); ++i) {
    if (sw[i] < 0.0 || sw[i] > 1.0)
      throw Error("RockState: saturation outside [0,1] at index " + std::to_string(i));
    if (phi[i] <= 0.0 || phi[i] >= 1.0)
      throw Error("RockState: porosity outside (0,1) at index " + std::to_string(i));
  }
}

namespace {

/// First-order dual number; gives exact derivatives of the element-wise chain.
struct Dual {
  double v = 0.0;
  double d = 0.0;
};

Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual operator/(Dual a, Dual b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}
Dual operator+(double a, Dual b) { return {a + b.v, b.d}; }
Dual operator-(double a, Dual b) { return {a - b.v, -b.d}; }
Dual operator*(double a, Dual b) { return {a * b.v, a * b.d}; }
Dual operator/(double a, Dual b) { return {a / b.v, -a * b.d / (b.v * b.v)}; }
Dual sqrt(Dual a) {
  double r = std::sqrt(a.v);
  return {r, a.d / (2.0 * r)};
}

struct CellOut {
  Dual vp_new;
  Dual rho_new;
};

// Evaluated with zero or unit tangent seeds to get exact per-input
// derivatives of the element-wise chain.
CellOut patchy_dual(Dual sw, Dual vp, Dual rho, double phi,
                    const PatchyConstants& c, std::size_t cell) {
  Dual vs = vp / Dual{std::sqrt(3.0), 0.0};
  Dual bulk_sat1 = rho * (vp * vp - (4.0 / 3.0) * (vs * vs));
  Dual shear_sat1 = rho * (vs * vs);
  if (bulk_sat1.v >= c.bulk_min)
    throw Error("patchy: bulk_sat1 >= bulk_min at cell " + std::to_string(cell));
  Dual patch_temp = bulk_sat1 / (c.bulk_min - bulk_sat1)
                    - Dual{c.bulk_fl1 / (phi * (c.bulk_min - c.bulk_fl1)), 0.0}
                    + Dual{c.bulk_fl2 / (phi * (c.bulk_min - c.bulk_fl2)), 0.0};
  if (patch_temp.v <= 0.0)
    throw Error("patchy: model outside validity range (patch_temp <= 0) at cell " +
                std::to_string(cell));
  Dual bulk_sat2 = c.bulk_min / (1.0 / patch_temp + Dual{1.0, 0.0});
  Dual four_thirds_shear = (4.0 / 3.0) * shear_sat1;
  Dual bulk_new = 1.0 / ((1.0 - sw) / (bulk_sat1 + four_thirds_shear) +
                         sw / (bulk_sat2 + four_thirds_shear)) -
                  four_thirds_shear;
  Dual rho_new = rho + Dual{phi, 0.0} * sw * Dual{c.rhow - c.rhoo, 0.0};
  Dual arg = (bulk_new + four_thirds_shear) / rho_new;
  if (arg.v < 0.0)
    throw Error("patchy: negative argument under square root at cell " +
                std::to_string(cell));
  return {sqrt(arg), rho_new};
}

}  // namespace

PatchyResult patchy(const RockState& state, const PatchyConstants& consts) {
  consts.validate();
  state.validate();
  PatchyResult out{state.vp, state.rho};
  for (std::size_t i = 0; i < state.sw.size(); ++i) {
    CellOut cell = patchy_dual({state.sw[i], 0.0}, {state.vp[i], 0.0},
                               {state.rho[i], 0.0}, state.phi[i], consts, i);
    out.vp_new[i] = cell.vp_new.v;
    out.rho_new[i] = cell.rho_new.v;
  }
  return out;
}

ad::NdArray stack_pair(const Field& a, const Field& b) {
  if (!a.same_shape(b)) throw Error("stack_pair: shape mismatch");
  std::vector<std::size_t> shape{2};
  shape.insert(shape.end(), a.dims().begin(), a.dims().end());
  std::vector<double> data;
  data.reserve(2 * a.size());
  data.insert(data.end(), a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return ad::NdArray(shape, std::move(data));
}

void register_patchy_rule() {
  ad::PullbackRule rule;
  rule.name = "patchy";
  // Slots: 0 sw, 1 vp, 2 rho, 3 phi (non-differentiable), 4 constants.
  rule.forward = [](const std::vector<ad::SlotValue>& slots) {
    const auto& consts = std::any_cast<const PatchyConstants&>(slots[4].opaque());
    const auto& sw = slots[0].array();
    const auto& vp = slots[1].array();
    const auto& rho = slots[2].array();
    const auto& phi = slots[3].array();
    ad::NdArray out;
    std::vector<std::size_t> shape{2};
    shape.insert(shape.end(), sw.shape.begin(), sw.shape.end());
    out.shape = shape;
    std::size_t n = sw.size();
    out.data.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      CellOut cell = patchy_dual({sw.data[i], 0.0}, {vp.data[i], 0.0},
                                 {rho.data[i], 0.0}, phi.data[i], consts, i);
      out.data[i] = cell.vp_new.v;
      out.data[n + i] = cell.rho_new.v;
    }
    return out;
  };
  rule.pullback = [](const std::vector<ad::SlotValue>& slots,
                     const ad::NdArray& /*primal*/, const ad::NdArray& cot) {
    const auto& consts = std::any_cast<const PatchyConstants&>(slots[4].opaque());
    const auto& sw = slots[0].array();
    const auto& vp = slots[1].array();
    const auto& rho = slots[2].array();
    const auto& phi = slots[3].array();
    std::size_t n = sw.size();
    ad::NdArray dsw = ad::NdArray::zeros_like(sw);
    ad::NdArray dvp = ad::NdArray::zeros_like(vp);
    ad::NdArray drho = ad::NdArray::zeros_like(rho);
    // One dual evaluation per input per cell; exact analytic derivatives.
    for (std::size_t i = 0; i < n; ++i) {
      double cv = cot.data[i];        // cotangent of vp_new
      double cr = cot.data[n + i];    // cotangent of rho_new
      CellOut d_sw = patchy_dual({sw.data[i], 1.0}, {vp.data[i], 0.0},
                                 {rho.data[i], 0.0}, phi.data[i], consts, i);
      CellOut d_vp = patchy_dual({sw.data[i], 0.0}, {vp.data[i], 1.0},
                                 {rho.data[i], 0.0}, phi.data[i], consts, i);
      CellOut d_rho = patchy_dual({sw.data[i], 0.0}, {vp.data[i], 0.0},
                                  {rho.data[i], 1.0}, phi.data[i], consts, i);
      dsw.data[i] = cv * d_sw.vp_new.d + cr * d_sw.rho_new.d;
      dvp.data[i] = cv * d_vp.vp_new.d + cr * d_vp.rho_new.d;
      drho.data[i] = cv * d_rho.vp_new.d + cr * d_rho.rho_new.d;
    }
    ad::Cotangents parts;
    parts.push_back(std::move(dsw));
    parts.push_back(std::move(dvp));
    parts.push_back(std::move(drho));
    parts.push_back(std::nullopt);  // phi: declared non-differentiable
    parts.push_back(std::nullopt);  // constants
    return parts;
  };
  ad::register_rule(std::move(rule));
}

}  // namespace permin
