#include "cavsim/geometry.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cavsim/kinematics.hpp"

namespace cavsim {

namespace {

Vec2 rot90(const Vec2& v) { return Vec2(-v.y(), v.x()); }

double wrap_positive(double a) {
  double w = std::fmod(a, 2.0 * M_PI);
  if (w < 0.0) w += 2.0 * M_PI;
  return w;
}

}  // namespace

LaneRef::LaneRef(std::string id, LineSegment seg, double capture_range)
    : id_(std::move(id)),
      is_arc_(false),
      line_(seg),
      length_(seg.length),
      closed_(false),
      capture_range_(capture_range) {}

LaneRef::LaneRef(std::string id, ArcSegment seg, double capture_range)
    : id_(std::move(id)),
      is_arc_(true),
      arc_(seg),
      length_(std::abs(seg.sweep) * seg.radius),
      closed_(std::abs(seg.sweep) >= 2.0 * M_PI - 1e-12),
      capture_range_(capture_range) {}

Vec2 LaneRef::point_at(double s) const {
  if (!is_arc_) {
    return line_.base + s * line_.dir;
  }
  const double dir = arc_.ccw ? 1.0 : -1.0;
  const double theta = arc_.theta0 + dir * s / arc_.radius;
  return arc_.center + arc_.radius * Vec2(std::cos(theta), std::sin(theta));
}

double LaneRef::tangent_angle_at(double s) const {
  if (!is_arc_) {
    return std::atan2(line_.dir.y(), line_.dir.x());
  }
  const double dir = arc_.ccw ? 1.0 : -1.0;
  const double theta = arc_.theta0 + dir * s / arc_.radius;
  return wrap_angle(theta + dir * M_PI / 2.0);
}

double LaneRef::curvature_at(double) const {
  if (!is_arc_) return 0.0;
  return (arc_.ccw ? 1.0 : -1.0) / arc_.radius;
}

std::optional<LanePose> LaneRef::try_project(double x, double y, double phi) const {
  const Vec2 p(x, y);
  LanePose pose;
  if (!is_arc_) {
    const Vec2 rel = p - line_.base;
    pose.s = rel.dot(line_.dir);
    pose.dy = rel.dot(rot90(line_.dir));
  } else {
    const Vec2 rel = p - arc_.center;
    const double dist = rel.norm();
    if (dist < 1e-9) return std::nullopt;  // projection undefined at the center
    const double theta = std::atan2(rel.y(), rel.x());
    const double dir = arc_.ccw ? 1.0 : -1.0;
    const double u = wrap_positive(dir * (theta - arc_.theta0));
    if (!closed_ && u > std::abs(arc_.sweep)) return std::nullopt;
    pose.s = u * arc_.radius;
    pose.dy = arc_.ccw ? arc_.radius - dist : dist - arc_.radius;
  }
  if (std::abs(pose.dy) > capture_range_) return std::nullopt;
  pose.dphi = wrap_angle(phi - tangent_angle_at(pose.s));
  return pose;
}

LanePose LaneRef::project_raw(double x, double y, double phi) const {
  const Vec2 p(x, y);
  LanePose pose;
  if (!is_arc_) {
    const Vec2 rel = p - line_.base;
    pose.s = rel.dot(line_.dir);
    pose.dy = rel.dot(rot90(line_.dir));
  } else {
    const Vec2 rel = p - arc_.center;
    const double dist = std::max(rel.norm(), 1e-9);
    const double theta = std::atan2(rel.y(), rel.x());
    const double dir = arc_.ccw ? 1.0 : -1.0;
    pose.s = wrap_positive(dir * (theta - arc_.theta0)) * arc_.radius;
    pose.dy = arc_.ccw ? arc_.radius - dist : dist - arc_.radius;
  }
  pose.dphi = wrap_angle(phi - tangent_angle_at(pose.s));
  return pose;
}

LanePose LaneRef::project(double x, double y, double phi) const {
  auto pose = try_project(x, y, phi);
  if (!pose) {
    std::ostringstream msg;
    msg << "point (" << x << ", " << y << ") outside capture range of lane " << id_;
    throw std::runtime_error(msg.str());
  }
  return *pose;
}

double LaneRef::lateral_distance(double x, double y) const {
  const Vec2 p(x, y);
  if (!is_arc_) {
    return std::abs((p - line_.base).dot(rot90(line_.dir)));
  }
  return std::abs((p - arc_.center).norm() - arc_.radius);
}

double LaneRef::forward_gap(double s_from, double s_to) const {
  if (!closed_) return s_to - s_from;
  double d = std::fmod(s_to - s_from, length_);
  if (d < -length_ / 2.0) d += length_;
  if (d >= length_ / 2.0) d -= length_;
  return d;
}

std::string RoundaboutGeometry::ring_lane_id(bool inner) {
  return inner ? "ring_inner" : "ring_outer";
}

std::string RoundaboutGeometry::inbound_lane_id(char port, bool inner) {
  return std::string(1, port) + (inner ? "_in_inner" : "_in_outer");
}

std::string RoundaboutGeometry::outbound_lane_id(char port, bool inner) {
  return std::string(1, port) + (inner ? "_out_inner" : "_out_outer");
}

bool RoundaboutGeometry::is_ring_lane(const std::string& id) const {
  return id.rfind("ring_", 0) == 0;
}

bool RoundaboutGeometry::is_inbound_lane(const std::string& id) const {
  return id.find("_in_") != std::string::npos;
}

bool RoundaboutGeometry::is_outbound_lane(const std::string& id) const {
  return id.find("_out_") != std::string::npos;
}

RoundaboutGeometry::RoundaboutGeometry(const RoundaboutParams& params) : params_(params) {
  if (!(0.0 < params_.inner_radius && params_.inner_radius < params_.outer_radius)) {
    throw std::invalid_argument("geometry: need 0 < inner_radius < outer_radius");
  }
  if (!(params_.lane_width > 0.0)) {
    throw std::invalid_argument("geometry: lane_width must be positive");
  }
  const double capture = 2.0 * params_.lane_width;

  lanes_.emplace(ring_lane_id(true),
                 LaneRef(ring_lane_id(true),
                         ArcSegment{Vec2(0, 0), params_.inner_radius, 0.0, 2.0 * M_PI, true},
                         capture));
  lanes_.emplace(ring_lane_id(false),
                 LaneRef(ring_lane_id(false),
                         ArcSegment{Vec2(0, 0), params_.outer_radius, 0.0, 2.0 * M_PI, true},
                         capture));

  const struct {
    char name;
    double angle;
  } port_defs[4] = {{'A', M_PI}, {'B', -M_PI / 2.0}, {'C', 0.0}, {'D', M_PI / 2.0}};

  for (const auto& def : port_defs) {
    Port port;
    port.name = def.name;
    port.angle = def.angle;
    port.dir_in = -Vec2(std::cos(def.angle), std::sin(def.angle));
    const double anchor_half = std::asin(params_.offset_inner / params_.outer_radius);
    port.entry_anchor = wrap_angle(def.angle + anchor_half);
    port.exit_anchor = wrap_angle(def.angle - anchor_half);
    ports_[def.name] = port;

    const Vec2 left = rot90(port.dir_in);
    for (bool inner : {true, false}) {
      const double off = inner ? params_.offset_inner : params_.offset_outer;
      const double axial = std::sqrt(params_.outer_radius * params_.outer_radius - off * off);

      // Inbound lane: right of the corridor axis, ending at the outer ring.
      const Vec2 cross_in = -axial * port.dir_in - off * left;
      const LineSegment in_seg{cross_in - params_.main_road_length * port.dir_in, port.dir_in,
                               params_.main_road_length};
      const std::string in_id = inbound_lane_id(def.name, inner);
      LaneRef in_lane(in_id, in_seg, capture);
      in_lane.set_successors(inner ? std::vector<std::string>{ring_lane_id(false),
                                                              ring_lane_id(true)}
                                   : std::vector<std::string>{ring_lane_id(false)});
      lanes_.emplace(in_id, std::move(in_lane));

      // Outbound lane: starts at the outer ring and runs outward.
      const Vec2 cross_out = -axial * port.dir_in + off * left;
      const LineSegment out_seg{cross_out, -port.dir_in, params_.main_road_length};
      const std::string out_id = outbound_lane_id(def.name, inner);
      lanes_.emplace(out_id, LaneRef(out_id, out_seg, capture));
    }
  }

  std::vector<std::string> ring_exits;
  for (const auto& def : port_defs) {
    ring_exits.push_back(outbound_lane_id(def.name, true));
  }
  lanes_.at(ring_lane_id(false)).set_successors(ring_exits);
  lanes_.at(ring_lane_id(true)).set_successors({ring_lane_id(false)});
}

const LaneRef& RoundaboutGeometry::lane(const std::string& id) const {
  auto it = lanes_.find(id);
  if (it == lanes_.end()) {
    throw std::invalid_argument("geometry: unknown lane id '" + id + "'");
  }
  return it->second;
}

const Port& RoundaboutGeometry::port(char name) const {
  auto it = ports_.find(name);
  if (it == ports_.end()) {
    throw std::invalid_argument(std::string("geometry: unknown port '") + name + "'");
  }
  return it->second;
}

Vec2 RoundaboutGeometry::inbound_stop_point(const std::string& inbound_lane) const {
  const LaneRef& l = lane(inbound_lane);
  if (!is_inbound_lane(inbound_lane)) {
    throw std::invalid_argument("geometry: " + inbound_lane + " is not an inbound lane");
  }
  return l.point_at(l.length());
}

}  // namespace cavsim
