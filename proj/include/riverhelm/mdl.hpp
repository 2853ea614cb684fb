#pragma once

// Map Definition Language: river map model, strict XML dialect, validation and
// geometric queries.
//
// Canonical document shape:
//
//   <Map id=".." name="..">
//     <ScaleRegion id=".." minLat=".." minLon=".." maxLat=".." maxLon=".." scale=".."/>
//     <Landmark id=".." kind=".." lat=".." lon=".." depth=".." label=".."/>
//     <Flow id=".." from=".." to=".." vFromEast=".." vFromNorth=".." vToEast=".." vToNorth="..">
//       <Waypoint ref=".."/> ...
//     </Flow>
//     <Annotation robot=".." flow="..">
//       <Coordinates_landmarks_passed ref=".."/> ...
//       <Coordinates_lookahead_landmark ref=".."/>
//     </Annotation>
//   </Map>
//
// The document is a graph of ids and references; only waypoint order and
// passed-landmark order carry meaning. Every value here is immutable once
// built and safe to share between threads.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "riverhelm/geo.hpp"

namespace riverhelm::mdl {

enum class LandmarkKind {
  marker,
  flow_obstacle,
  static_obstacle,
  parking_area,
  fuel_rendezvous_terminal,
};

std::string_view to_string(LandmarkKind kind);
/// Accepts canonical names plus the tag aliases (`Flow_obstacles`, ...).
std::optional<LandmarkKind> landmark_kind_from_string(std::string_view s);

struct Landmark {
  std::string id;
  LandmarkKind kind = LandmarkKind::marker;
  GeoCoordinate position;
  std::string label;

  friend bool operator==(const Landmark&, const Landmark&) = default;
};

struct FlowSegment {
  std::string id;
  std::string from_id;
  std::string to_id;
  std::vector<std::string> waypoint_ids;  // inclusive of both endpoints
  Vec2 v_from;                            // m/s at from_id
  Vec2 v_to;                              // m/s at to_id

  friend bool operator==(const FlowSegment&, const FlowSegment&) = default;
};

struct LatLonBox {
  double min_lat = 0.0;
  double min_lon = 0.0;
  double max_lat = 0.0;
  double max_lon = 0.0;

  bool contains(const GeoCoordinate& p) const {
    return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
  }
  double area_deg2() const { return (max_lat - min_lat) * (max_lon - min_lon); }

  friend bool operator==(const LatLonBox&, const LatLonBox&) = default;
};

struct ScaleRegion {
  std::string id;
  LatLonBox bounds;
  std::uint64_t scale_denominator = 1;  // map scale 1:N

  friend bool operator==(const ScaleRegion&, const ScaleRegion&) = default;
};

struct MapDocument {
  std::string id;
  std::string name;
  std::vector<Landmark> landmarks;  // sorted by id once parsed
  std::vector<FlowSegment> flows;
  std::vector<ScaleRegion> scale_regions;

  const Landmark* find_landmark(std::string_view landmark_id) const;
  const FlowSegment* find_flow(std::string_view flow_id) const;

  friend bool operator==(const MapDocument&, const MapDocument&) = default;
};

/// Per-robot dynamic markup: where the robot is along its active flow.
struct MdlAnnotation {
  std::string robot_id;
  std::vector<std::string> landmarks_passed;
  std::optional<std::string> lookahead_landmark;
  std::optional<std::string> active_flow;

  friend bool operator==(const MdlAnnotation&, const MdlAnnotation&) = default;
};

struct MdlFile {
  MapDocument document;
  std::vector<MdlAnnotation> annotations;

  friend bool operator==(const MdlFile&, const MdlFile&) = default;
};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

namespace rule {
inline constexpr std::string_view kFlowUnderpopulated = "FLOW_UNDERPOPULATED";
inline constexpr std::string_view kDanglingRef = "DANGLING_REF";
inline constexpr std::string_view kDuplicateId = "DUPLICATE_ID";
inline constexpr std::string_view kNoFuelTerminal = "NO_FUEL_TERMINAL";
inline constexpr std::string_view kBadCoordinate = "BAD_COORDINATE";
inline constexpr std::string_view kBadId = "BAD_ID";
inline constexpr std::string_view kFlowSelfLoop = "FLOW_SELF_LOOP";
inline constexpr std::string_view kFlowEndpointMismatch = "FLOW_ENDPOINT_MISMATCH";
inline constexpr std::string_view kBadScaleRegion = "BAD_SCALE_REGION";
inline constexpr std::string_view kAnnotationInconsistent = "ANNOTATION_INCONSISTENT";
inline constexpr std::string_view kSchemaViolation = "SCHEMA_VIOLATION";
}  // namespace rule

/// Malformed XML. Line and column are 1-based.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int col, const std::string& message);
  int line() const { return line_; }
  int col() const { return col_; }
  const std::string& message() const { return message_; }

 private:
  int line_;
  int col_;
  std::string message_;
};

struct Diagnostic {
  std::string rule_id;
  std::string offending_id;
  std::string message;
  int line = 0;  // 0 when the value did not come from source text
  int col = 0;
};

/// Well-formed input that breaks a document invariant.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(Diagnostic d);
  const std::string& rule_id() const { return diag_.rule_id; }
  const std::string& offending_id() const { return diag_.offending_id; }
  const Diagnostic& diagnostic() const { return diag_; }

 private:
  Diagnostic diag_;
};

class AnnotationRefError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by query_scale when no region contains the point.
class NoScaleRegion : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownFlow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownLandmark : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfRange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OffRoute : public std::runtime_error {
 public:
  explicit OffRoute(double distance_m);
  double distance_m() const { return distance_m_; }

 private:
  double distance_m_;
};

class NoRoute : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Parsing, validation, serialization
// ---------------------------------------------------------------------------

/// Parses and validates. Throws ParseError or ValidationError (first diagnostic).
MdlFile parse_mdl(std::string_view text);

/// Parses and returns every diagnostic found instead of throwing on the first.
/// ParseError still propagates: nothing can be checked in malformed XML.
std::vector<Diagnostic> check_mdl(std::string_view text);

/// Invariant checks on an in-memory document (no source positions).
std::vector<Diagnostic> validate(const MapDocument& doc);
std::vector<Diagnostic> validate(const MapDocument& doc, const std::vector<MdlAnnotation>& annotations);

std::string serialize_mdl(const MapDocument& doc, const std::vector<MdlAnnotation>& annotations = {});

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

/// Scale of the smallest-area region containing p (ties: smaller scale, then id).
std::uint64_t query_scale(const MapDocument& doc, const GeoCoordinate& p);

/// Linear interpolation of the endpoint flow vectors, t in [0, 1].
Vec2 flow_at(const MapDocument& doc, std::string_view flow_id, double t);

struct Projection {
  double t = 0.0;           // arc-length fraction of the closest point
  double distance_m = 0.0;  // perpendicular distance
};

Projection project_onto_flow(const MapDocument& doc, std::string_view flow_id, const GeoCoordinate& p);

inline constexpr double kDefaultCorridorM = 100.0;

MdlAnnotation annotate_for_robot(const MapDocument& doc, std::string_view flow_id, const GeoCoordinate& p,
                                 double corridor_m = kDefaultCorridorM, std::string robot_id = {});

/// Polyline waypoint positions of a flow, in waypoint order.
std::vector<GeoCoordinate> flow_polyline(const MapDocument& doc, const FlowSegment& flow);

/// Arc length of the flow polyline in meters (edge weight for routing).
double flow_length_m(const MapDocument& doc, const FlowSegment& flow);

/// One hop of a route: the flow traversed between consecutive route nodes.
struct RouteLeg {
  std::string flow_id;
  std::string from_id;
  std::string to_id;
  double length_m = 0.0;
};

struct Route {
  std::vector<std::string> nodes;  // landmark ids, from .. to
  std::vector<RouteLeg> legs;      // nodes.size() - 1 entries
  double cost_m = 0.0;             // legs summed from the start
};

/// Shortest route over the directed flow graph. Throws UnknownLandmark, NoRoute.
Route plan_route(const MapDocument& doc, std::string_view from_landmark, std::string_view to_landmark);

std::vector<std::string> route_to(const MapDocument& doc, std::string_view from_landmark,
                                  std::string_view to_landmark);

}  // namespace riverhelm::mdl
