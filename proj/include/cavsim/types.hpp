#pragma once

#include <string>

namespace cavsim {

enum class DrivingStyle { Aggressive, Normal, Conservative };

enum class Stage { Entering, Passing, Exiting };

enum class SolverKind { Stackelberg, GrandCoalition };

// Discrete maneuver pair. At the entering stage only the merge component
// alpha is free (-1 inner-lane merge, 0 keep, +1 outer-lane merge); at the
// passing and exiting stages only the lane-change component beta is free
// (-1 left change, 0 keep, +1 right change).
struct Behavior {
  int alpha = 0;
  int beta = 0;

  bool operator==(const Behavior&) const = default;
};

std::string to_string(DrivingStyle s);
std::string to_string(Stage s);
std::string to_string(SolverKind s);
DrivingStyle style_from_string(const std::string& s);
SolverKind solver_from_string(const std::string& s);

inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace cavsim
