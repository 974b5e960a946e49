#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

// Roundabout road network: two concentric counter-clockwise ring lanes plus
// four two-lane bidirectional corridors (ports A west, B south, C east,
// D north). Lane centerlines are arc-length-parameterized piecewise
// line/arc curves with unit-speed tangents.

namespace cavsim {

using Vec2 = Eigen::Vector2d;

// Signed lane-frame pose of a point: dy is the perpendicular offset
// (left-of-travel positive), dphi the heading error wrapped to (-pi, pi],
// s the arc length of the foot point.
struct LanePose {
  double dy = 0.0;
  double dphi = 0.0;
  double s = 0.0;
};

struct LineSegment {
  Vec2 base;
  Vec2 dir;  // unit
  double length = 0.0;
};

struct ArcSegment {
  Vec2 center;
  double radius = 0.0;
  double theta0 = 0.0;   // angle of the s=0 point
  double sweep = 0.0;    // radians; 2*pi means a closed circle
  bool ccw = true;
};

class LaneRef {
 public:
  LaneRef() = default;
  LaneRef(std::string id, LineSegment seg, double capture_range);
  LaneRef(std::string id, ArcSegment seg, double capture_range);

  const std::string& id() const { return id_; }
  double length() const { return length_; }
  bool closed() const { return closed_; }
  double capture_range() const { return capture_range_; }
  const std::vector<std::string>& successors() const { return successors_; }
  void set_successors(std::vector<std::string> s) { successors_ = std::move(s); }

  Vec2 point_at(double s) const;
  double tangent_angle_at(double s) const;
  double curvature_at(double s) const;

  // Perpendicular foot-point projection. Returns nothing when the lateral
  // distance exceeds the capture range.
  std::optional<LanePose> try_project(double x, double y, double phi) const;
  // Same, but throws std::runtime_error when out of capture range.
  LanePose project(double x, double y, double phi) const;
  // Projection without the capture-range limit (constraint evaluation).
  LanePose project_raw(double x, double y, double phi) const;

  // Absolute lateral distance to the centerline, unlimited by capture range.
  double lateral_distance(double x, double y) const;

  // Forward arc-length from s_from to s_to; wraps on closed lanes,
  // plain difference otherwise (negative when s_to is behind).
  double forward_gap(double s_from, double s_to) const;

 private:
  std::string id_;
  bool is_arc_ = false;
  LineSegment line_;
  ArcSegment arc_;
  double length_ = 0.0;
  bool closed_ = false;
  double capture_range_ = 1e9;
  std::vector<std::string> successors_;
};

struct RoundaboutParams {
  double inner_radius = 15.0;
  double outer_radius = 19.0;
  double lane_width = 3.63;
  double offset_inner = 2.45;  // corridor centerline offsets
  double offset_outer = 6.08;
  double main_road_length = 120.0;
  double exit_threshold_deg = 90.0;  // arc window that starts the exiting stage
  double exit_commit_deg = 30.0;     // arc window that commits the exit transition
};

struct Port {
  char name = 'A';
  double angle = 0.0;        // corridor axis angle around the ring
  Vec2 dir_in;               // unit vector pointing at the ring center
  double entry_anchor = 0.0; // ring angle where the inner inbound lane crosses
  double exit_anchor = 0.0;  // ring angle where the inner outbound lane crosses
};

class RoundaboutGeometry {
 public:
  explicit RoundaboutGeometry(const RoundaboutParams& params = {});

  const RoundaboutParams& params() const { return params_; }
  const LaneRef& lane(const std::string& id) const;
  bool has_lane(const std::string& id) const { return lanes_.count(id) > 0; }
  const std::map<std::string, LaneRef>& lanes() const { return lanes_; }
  const Port& port(char name) const;

  static std::string ring_lane_id(bool inner);
  static std::string inbound_lane_id(char port, bool inner);
  static std::string outbound_lane_id(char port, bool inner);

  bool is_ring_lane(const std::string& id) const;
  bool is_inbound_lane(const std::string& id) const;
  bool is_outbound_lane(const std::string& id) const;

  // End-of-lane point of an inbound lane (its crossing with the outer ring
  // circle); the yield point for merge decisions.
  Vec2 inbound_stop_point(const std::string& inbound_lane_id) const;

 private:
  RoundaboutParams params_;
  std::map<std::string, LaneRef> lanes_;
  std::map<char, Port> ports_;
};

}  // namespace cavsim
