#pragma once

#include <array>

#include "cavsim/kinematics.hpp"
#include "cavsim/types.hpp"

// Style-weighted decision payoff: safety (leader-following, lateral pairs,
// lane keeping), ride comfort, and travel efficiency. All terms are
// regularized reciprocals or saturated quadratics, finite for finite inputs
// and non-negative for non-negative weights.

namespace cavsim {

struct StyleWeights {
  double ks = 0.3;
  double kc = 0.3;
  double ke = 0.4;
};

struct StyleTable {
  StyleWeights aggressive{0.4, 0.5, 0.1};
  StyleWeights normal{0.3, 0.3, 0.4};
  StyleWeights conservative{0.1, 0.4, 0.5};

  const StyleWeights& of(DrivingStyle s) const;
};

struct PayoffWeights {
  double kv_log = 1.0;
  double ks_log = 0.05;
  double kv_lat = 1.0;
  double ks_lat = 0.05;
  double ky_lk = 0.5;
  double kphi_lk = 0.5;
  double kax = 1.0;
  double kay = 1.0;
  double ke_inner = 10.0;
  double epsilon = 0.01;
  double vx_max = 30.0;  // efficiency reference speed, m/s
  // Saturations keeping the pairwise terms bounded: gaps saturate at d_far
  // (an absent opponent is equivalent to one at d_far with zero relative
  // speed), relative speeds saturate at dv_cap, and the closing-speed
  // reciprocal is evaluated no closer to zero than dv_floor.
  double d_far = 50.0;
  double dv_cap = 4.0;
  double dv_floor = 0.5;
};

// Relative-speed factor [(dv)^2 + eps]^eta with eta = sgn(dv), saturated as
// described on PayoffWeights. Shared by the longitudinal and lateral pairs.
double pair_velocity_term(double dv, double kv, const PayoffWeights& w);

// Leader-following safety: velocity factor with dv = leader vx - ego vx plus
// the saturated squared bumper gap.
double safety_longitudinal(const VehicleState& ego, const VehicleState& leader,
                           const PayoffWeights& w, double lv);
// Lateral-pair safety: mirror with dv = ego vx - opponent vx.
double safety_lateral_pair(const VehicleState& ego, const VehicleState& opponent,
                           const PayoffWeights& w, double lv);
// Absent-opponent values: the opponent placed at d_far with zero relative speed.
double safety_longitudinal_absent(const PayoffWeights& w);
double safety_lateral_absent(const PayoffWeights& w);

double safety_lanekeep(double dy, double dphi, const PayoffWeights& w);
double comfort(double ax, double ay, const PayoffWeights& w);
double efficiency(double vx, const PayoffWeights& w);

// Lateral acceleration implied by the kinematic model, vx^2 tan(beta) / lr.
double lateral_acceleration(double vx, double delta_f, const VehicleParameters& p);

// Safety sub-terms entering the stage blend. Lateral slots at the entering
// stage: [adjacent inbound vehicle, outer-ring vehicle, inner-ring vehicle];
// at passing/exiting: [change-target-lane occupant, merging vehicle, unused].
struct SafetyTerms {
  double p_log = 0.0;
  std::array<double, 3> p_lat{0.0, 0.0, 0.0};
  double p_lk = 0.0;
};

// Stage-dependent blend. Entering gates the longitudinal and lane-keeping
// terms with (1 - alpha^2) and weights the lateral slots
// (0.25(alpha+1)^2, 1, 0.25(alpha-1)^2); passing/exiting gates with
// (1 - beta^2) and weights the lateral slots (beta^2, merger_alpha^2, 0).
double safety_blend(Stage stage, const Behavior& behavior, const SafetyTerms& terms,
                    int merger_alpha);
// The blended lateral aggregate alone (before the stage gate).
double lateral_aggregate(Stage stage, const Behavior& behavior, const SafetyTerms& terms,
                         int merger_alpha);

struct PayoffBreakdown {
  double p_s_log = 0.0;
  double p_s_lat = 0.0;
  double p_s_lk = 0.0;
  double p_s = 0.0;
  double p_c = 0.0;
  double p_e = 0.0;
  double total = 0.0;
};

// One prediction step of the full style-weighted payoff.
PayoffBreakdown total_payoff_step(Stage stage, const Behavior& behavior,
                                  const SafetyTerms& terms, int merger_alpha, double ax,
                                  double ay, double vx, const StyleWeights& style,
                                  const PayoffWeights& w);

}  // namespace cavsim
