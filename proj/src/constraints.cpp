#include "cavsim/constraints.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cavsim {

void validate_bounds(const ConstraintBounds& b) {
  const struct {
    const char* name;
    double v;
  } entries[] = {{"ds_max", b.ds_max},       {"dy_max", b.dy_max},
                 {"dphi_max", b.dphi_max},   {"ax_max", b.ax_max},
                 {"ay_max", b.ay_max},       {"vx_max", b.vx_max},
                 {"dax_max", b.dax_max},     {"ddelta_max", b.ddelta_max},
                 {"delta_max", b.delta_max}};
  for (const auto& e : entries) {
    if (!(e.v > 0.0) || !std::isfinite(e.v)) {
      std::ostringstream msg;
      msg << "constraint bound " << e.name << " must be strictly positive, got " << e.v;
      throw std::invalid_argument(msg.str());
    }
  }
}

ConstraintReport check(const TrajectoryCheckInput& in, const ConstraintBounds& b) {
  ConstraintReport report;
  auto add = [&](const char* name, double value, double bound, int step) {
    report.violations.push_back({name, value, bound, step});
  };

  const size_t np = in.dy.size();
  const double dy_allow = std::max(b.dy_max, std::abs(in.dy0) + b.dy_max);
  const double dphi_allow = std::max(b.dphi_max, std::abs(in.dphi0) + b.dphi_max);

  for (size_t p = 0; p < np; ++p) {
    const int step = static_cast<int>(p) + 1;
    if (std::abs(in.dy[p]) > dy_allow) add("dy", std::abs(in.dy[p]), dy_allow, step);
    if (std::abs(in.dphi[p]) > dphi_allow) add("dphi", std::abs(in.dphi[p]), dphi_allow, step);
    if (b.enforce_station_bound && p < in.station.size()) {
      double advance = in.station[p] - in.station0;
      if (in.station_wraps && in.lane_length > 0.0) {
        advance = std::remainder(advance, in.lane_length);
      }
      const double nominal = in.vx0 * in.dt * step;
      const double ds = advance - nominal;
      if (std::abs(ds) > b.ds_max) add("ds", std::abs(ds), b.ds_max, step);
    }
    if (std::abs(in.ax[p]) > b.ax_max) add("ax", std::abs(in.ax[p]), b.ax_max, step);
    if (std::abs(in.ay[p]) > b.ay_max) add("ay", std::abs(in.ay[p]), b.ay_max, step);
    if (std::abs(in.vx[p]) > b.vx_max) add("vx", std::abs(in.vx[p]), b.vx_max, step);
    if (std::abs(in.delta_f[p]) > b.delta_max)
      add("delta", std::abs(in.delta_f[p]), b.delta_max, step);
  }
  for (size_t q = 0; q < in.d_ax.size(); ++q) {
    const int step = static_cast<int>(q) + 1;
    if (std::abs(in.d_ax[q]) > b.dax_max) add("dax", std::abs(in.d_ax[q]), b.dax_max, step);
  }
  for (size_t q = 0; q < in.d_delta_f.size(); ++q) {
    const int step = static_cast<int>(q) + 1;
    if (std::abs(in.d_delta_f[q]) > b.ddelta_max)
      add("ddelta", std::abs(in.d_delta_f[q]), b.ddelta_max, step);
  }

  report.feasible = report.violations.empty();
  return report;
}

}  // namespace cavsim
