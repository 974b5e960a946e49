#include "cavsim/payoff.hpp"

#include <algorithm>
#include <cmath>

namespace cavsim {

const StyleWeights& StyleTable::of(DrivingStyle s) const {
  switch (s) {
    case DrivingStyle::Aggressive: return aggressive;
    case DrivingStyle::Conservative: return conservative;
    case DrivingStyle::Normal: break;
  }
  return normal;
}

double pair_velocity_term(double dv, double kv, const PayoffWeights& w) {
  const double eta = sgn(dv);
  if (eta > 0.0) {
    const double dv2 = std::min(dv * dv, w.dv_cap * w.dv_cap);
    return kv * (dv2 + w.epsilon);
  }
  if (eta < 0.0) {
    const double dv2 = std::max(dv * dv, w.dv_floor * w.dv_floor);
    return kv / (dv2 + w.epsilon);
  }
  return kv;  // sgn(0) = 0, so the factor is exactly 1
}

namespace {

double saturated_gap(const VehicleState& a, const VehicleState& b, const PayoffWeights& w,
                     double lv) {
  const double dist = std::hypot(a.x - b.x, a.y - b.y);
  return std::clamp(dist - lv, 0.0, w.d_far);
}

}  // namespace

double safety_longitudinal(const VehicleState& ego, const VehicleState& leader,
                           const PayoffWeights& w, double lv) {
  const double gap = saturated_gap(ego, leader, w, lv);
  return pair_velocity_term(leader.vx - ego.vx, w.kv_log, w) + w.ks_log * gap * gap;
}

double safety_lateral_pair(const VehicleState& ego, const VehicleState& opponent,
                           const PayoffWeights& w, double lv) {
  const double gap = saturated_gap(ego, opponent, w, lv);
  return pair_velocity_term(ego.vx - opponent.vx, w.kv_lat, w) + w.ks_lat * gap * gap;
}

double safety_longitudinal_absent(const PayoffWeights& w) {
  return w.kv_log + w.ks_log * w.d_far * w.d_far;
}

double safety_lateral_absent(const PayoffWeights& w) {
  return w.kv_lat + w.ks_lat * w.d_far * w.d_far;
}

double safety_lanekeep(double dy, double dphi, const PayoffWeights& w) {
  return w.ky_lk / (dy * dy + w.epsilon) + w.kphi_lk / (dphi * dphi + w.epsilon);
}

double comfort(double ax, double ay, const PayoffWeights& w) {
  return w.kax / (ax * ax + w.epsilon) + w.kay / (ay * ay + w.epsilon);
}

double efficiency(double vx, const PayoffWeights& w) {
  const double dv = vx - w.vx_max;
  return w.ke_inner / (dv * dv + w.epsilon);
}

double lateral_acceleration(double vx, double delta_f, const VehicleParameters& p) {
  return vx * vx * std::tan(sideslip_angle(delta_f, p)) / p.lr;
}

double lateral_aggregate(Stage stage, const Behavior& behavior, const SafetyTerms& terms,
                         int merger_alpha) {
  if (stage == Stage::Entering) {
    const double a = behavior.alpha;
    return 0.25 * (a + 1.0) * (a + 1.0) * terms.p_lat[0] + terms.p_lat[1] +
           0.25 * (a - 1.0) * (a - 1.0) * terms.p_lat[2];
  }
  const double b2 = static_cast<double>(behavior.beta * behavior.beta);
  const double am2 = static_cast<double>(merger_alpha * merger_alpha);
  return b2 * terms.p_lat[0] + am2 * terms.p_lat[1];
}

double safety_blend(Stage stage, const Behavior& behavior, const SafetyTerms& terms,
                    int merger_alpha) {
  const double lat = lateral_aggregate(stage, behavior, terms, merger_alpha);
  if (stage == Stage::Entering) {
    const double gate = static_cast<double>(behavior.alpha * behavior.alpha);
    return (1.0 - gate) * terms.p_log + gate * lat + (1.0 - gate) * terms.p_lk;
  }
  const double gate = static_cast<double>(behavior.beta * behavior.beta);
  return (1.0 - gate) * terms.p_log + lat + (1.0 - gate) * terms.p_lk;
}

PayoffBreakdown total_payoff_step(Stage stage, const Behavior& behavior,
                                  const SafetyTerms& terms, int merger_alpha, double ax,
                                  double ay, double vx, const StyleWeights& style,
                                  const PayoffWeights& w) {
  PayoffBreakdown b;
  b.p_s_log = terms.p_log;
  b.p_s_lat = lateral_aggregate(stage, behavior, terms, merger_alpha);
  b.p_s_lk = terms.p_lk;
  b.p_s = safety_blend(stage, behavior, terms, merger_alpha);
  b.p_c = comfort(ax, ay, w);
  b.p_e = efficiency(vx, w);
  b.total = style.ks * b.p_s + style.kc * b.p_c + style.ke * b.p_e;
  return b;
}

}  // namespace cavsim
