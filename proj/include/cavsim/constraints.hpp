#pragma once

#include <cmath>
#include <string>
#include <vector>

// Decision-making constraint set: per-step bounds on lane-tracking errors,
// accelerations, velocity, control increments, and steering.
//
// The tracking bounds (dy, dphi, station) are funneled: the allowed error is
// max(bound, |error at epoch start| + bound) against the candidate's
// reference lane, so a maneuver that approaches its target lane stays
// feasible while on-lane tracking is held at the table bound.

namespace cavsim {

struct ConstraintBounds {
  double ds_max = 0.8;                    // station-tracking error, m
  double dy_max = 0.2;                    // lateral error, m
  double dphi_max = 2.0 * M_PI / 180.0;   // heading error, rad
  double ax_max = 8.0;                    // m/s^2
  double ay_max = 5.0;                    // m/s^2
  double vx_max = 30.0;                   // m/s
  double dax_max = 0.1;                   // accel increment per step, m/s^2
  double ddelta_max = 0.3 * M_PI / 180.0; // steering increment per step, rad
  double delta_max = 30.0 * M_PI / 180.0; // steering angle, rad
  // The station bound interprets ds as deviation from a constant-speed
  // advance along the reference lane; off by default.
  bool enforce_station_bound = false;
};

// Throws std::invalid_argument when any bound is non-positive.
void validate_bounds(const ConstraintBounds& b);

struct Violation {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  int step = 0;  // 1-based prediction step; 0 for control-sequence entries
};

struct ConstraintReport {
  bool feasible = true;
  std::vector<Violation> violations;
};

// Everything check() needs about one candidate trajectory. Angles arrive
// already wrapped; stations may wrap on closed lanes.
struct TrajectoryCheckInput {
  std::vector<double> dy;
  std::vector<double> dphi;
  std::vector<double> station;
  std::vector<double> vx;
  std::vector<double> ax;
  std::vector<double> ay;
  std::vector<double> delta_f;
  std::vector<double> d_ax;       // control increments, length nc
  std::vector<double> d_delta_f;  // control increments, length nc
  double dy0 = 0.0;               // epoch-start error to the reference lane
  double dphi0 = 0.0;
  double station0 = 0.0;
  double vx0 = 0.0;
  double dt = 0.1;
  bool station_wraps = false;
  double lane_length = 0.0;
};

// Evaluates every inequality at every step and returns the complete
// violation list; infeasibility is a report, not an error.
ConstraintReport check(const TrajectoryCheckInput& in, const ConstraintBounds& b);

}  // namespace cavsim
