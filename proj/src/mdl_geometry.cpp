#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "riverhelm/mdl.hpp"

namespace riverhelm::mdl {
namespace {

const FlowSegment& require_flow(const MapDocument& doc, std::string_view flow_id) {
  const auto* f = doc.find_flow(flow_id);
  if (f == nullptr) throw UnknownFlow("unknown flow '" + std::string(flow_id) + "'");
  return *f;
}

// Polyline in the local frame with cumulative arc lengths.
struct PlanarPolyline {
  std::vector<Vec2> points;
  std::vector<double> cumulative;  // cumulative[i] = arc length at points[i]

  double total() const { return cumulative.empty() ? 0.0 : cumulative.back(); }
};

struct ClosestPoint {
  double arc_m = 0.0;
  double distance_m = 0.0;
};

PlanarPolyline planar_polyline(const std::vector<GeoCoordinate>& geo, const LocalFrame& frame) {
  PlanarPolyline out;
  out.points.reserve(geo.size());
  for (const auto& g : geo) out.points.push_back(frame.to_local(g));
  out.cumulative.assign(out.points.size(), 0.0);
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    out.cumulative[i] = out.cumulative[i - 1] + norm(out.points[i] - out.points[i - 1]);
  }
  return out;
}

ClosestPoint closest_point(const PlanarPolyline& line, Vec2 p) {
  ClosestPoint best{0.0, norm(p - line.points.front())};
  for (std::size_t i = 0; i + 1 < line.points.size(); ++i) {
    const Vec2 a = line.points[i];
    const Vec2 ab = line.points[i + 1] - a;
    const double len2 = dot(ab, ab);
    if (len2 == 0.0) continue;
    const double s = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    const double d = norm(p - (a + s * ab));
    // Strict comparison keeps the earliest (smallest t) of equidistant points.
    if (d < best.distance_m) best = {line.cumulative[i] + s * std::sqrt(len2), d};
  }
  return best;
}

struct FlowGeometry {
  PlanarPolyline line;
  ClosestPoint closest;
};

FlowGeometry locate(const MapDocument& doc, const FlowSegment& flow, const GeoCoordinate& p) {
  const auto geo = flow_polyline(doc, flow);
  const auto frame = LocalFrame::centroid_of(geo);
  auto line = planar_polyline(geo, frame);
  const auto closest = closest_point(line, frame.to_local(p));
  return {std::move(line), closest};
}

// Waypoints within this arc distance of the robot count as reached.
constexpr double kReachSlackM = 1e-6;

}  // namespace

std::uint64_t query_scale(const MapDocument& doc, const GeoCoordinate& p) {
  const ScaleRegion* best = nullptr;
  for (const auto& r : doc.scale_regions) {
    if (!r.bounds.contains(p)) continue;
    if (best == nullptr ||
        std::forward_as_tuple(r.bounds.area_deg2(), r.scale_denominator, r.id) <
            std::forward_as_tuple(best->bounds.area_deg2(), best->scale_denominator, best->id)) {
      best = &r;
    }
  }
  if (best == nullptr) {
    throw NoScaleRegion("no scale region contains (" + std::to_string(p.lat) + ", " + std::to_string(p.lon) + ")");
  }
  return best->scale_denominator;
}

Vec2 flow_at(const MapDocument& doc, std::string_view flow_id, double t) {
  const auto& f = require_flow(doc, flow_id);
  if (!(t >= 0.0 && t <= 1.0)) throw OutOfRange("flow fraction must lie in [0, 1]");
  return (1.0 - t) * f.v_from + t * f.v_to;
}

std::vector<GeoCoordinate> flow_polyline(const MapDocument& doc, const FlowSegment& flow) {
  std::vector<GeoCoordinate> out;
  out.reserve(flow.waypoint_ids.size());
  for (const auto& id : flow.waypoint_ids) {
    const auto* l = doc.find_landmark(id);
    if (l == nullptr) throw UnknownLandmark("flow " + flow.id + " references unknown landmark '" + id + "'");
    out.push_back(l->position);
  }
  if (out.empty()) throw UnknownFlow("flow " + flow.id + " has no waypoints");
  return out;
}

double flow_length_m(const MapDocument& doc, const FlowSegment& flow) {
  const auto geo = flow_polyline(doc, flow);
  return planar_polyline(geo, LocalFrame::centroid_of(geo)).total();
}

Projection project_onto_flow(const MapDocument& doc, std::string_view flow_id, const GeoCoordinate& p) {
  const auto g = locate(doc, require_flow(doc, flow_id), p);
  const double total = g.line.total();
  const double t = total > 0.0 ? std::clamp(g.closest.arc_m / total, 0.0, 1.0) : 0.0;
  return {t, g.closest.distance_m};
}

MdlAnnotation annotate_for_robot(const MapDocument& doc, std::string_view flow_id, const GeoCoordinate& p,
                                 double corridor_m, std::string robot_id) {
  const auto& flow = require_flow(doc, flow_id);
  if (!(corridor_m > 0.0)) throw OutOfRange("corridor must be positive");
  const auto g = locate(doc, flow, p);
  if (g.closest.distance_m > corridor_m) throw OffRoute(g.closest.distance_m);

  MdlAnnotation a;
  a.robot_id = std::move(robot_id);
  a.active_flow = flow.id;
  for (std::size_t i = 0; i < flow.waypoint_ids.size(); ++i) {
    if (g.line.cumulative[i] <= g.closest.arc_m + kReachSlackM) {
      a.landmarks_passed.push_back(flow.waypoint_ids[i]);
    } else {
      a.lookahead_landmark = flow.waypoint_ids[i];
      break;
    }
  }
  return a;
}

Route plan_route(const MapDocument& doc, std::string_view from_landmark, std::string_view to_landmark) {
  for (const auto id : {from_landmark, to_landmark}) {
    if (doc.find_landmark(id) == nullptr) throw UnknownLandmark("unknown landmark '" + std::string(id) + "'");
  }
  Route route;
  route.nodes.emplace_back(from_landmark);
  if (from_landmark == to_landmark) return route;

  // Cheapest flow per ordered landmark pair (ties: smaller flow id).
  struct Edge {
    std::string to;
    std::string flow_id;
    double length_m;
  };
  std::map<std::string, std::map<std::string, Edge>> adjacency;
  for (const auto& f : doc.flows) {
    const double len = flow_length_m(doc, f);
    auto& slot = adjacency[f.from_id];
    auto it = slot.find(f.to_id);
    if (it == slot.end() || std::tie(len, f.id) < std::tie(it->second.length_m, it->second.flow_id)) {
      slot[f.to_id] = Edge{f.to_id, f.id, len};
    }
  }

  // Dijkstra over (cost, node path) labels: equal costs resolve to the
  // lexicographically smallest node sequence.
  struct Label {
    double cost = 0.0;
    std::vector<std::string> path;
    std::vector<const Edge*> edges;
    bool operator<(const Label& o) const { return std::tie(cost, path) < std::tie(o.cost, o.path); }
  };
  std::map<std::string, Label> best;
  std::set<std::string> settled;
  best[std::string(from_landmark)] = Label{0.0, {std::string(from_landmark)}, {}};
  for (;;) {
    const Label* current = nullptr;
    std::string node;
    for (const auto& [id, label] : best) {
      if (settled.count(id) != 0) continue;
      if (current == nullptr || label < *current) {
        current = &label;
        node = id;
      }
    }
    if (current == nullptr) break;
    settled.insert(node);
    if (node == to_landmark) break;
    const auto adj = adjacency.find(node);
    if (adj == adjacency.end()) continue;
    const Label base = *current;
    for (const auto& [next, edge] : adj->second) {
      if (settled.count(next) != 0) continue;
      Label candidate = base;
      candidate.cost = base.cost + edge.length_m;
      candidate.path.push_back(next);
      candidate.edges.push_back(&edge);
      auto it = best.find(next);
      if (it == best.end() || candidate < it->second) best[next] = std::move(candidate);
    }
  }

  const auto found = best.find(std::string(to_landmark));
  if (found == best.end()) {
    throw NoRoute("no route from '" + std::string(from_landmark) + "' to '" + std::string(to_landmark) + "'");
  }
  const Label& label = found->second;
  route.nodes = label.path;
  route.cost_m = label.cost;
  for (std::size_t i = 0; i < label.edges.size(); ++i) {
    route.legs.push_back({label.edges[i]->flow_id, label.path[i], label.path[i + 1], label.edges[i]->length_m});
  }
  return route;
}

std::vector<std::string> route_to(const MapDocument& doc, std::string_view from_landmark,
                                  std::string_view to_landmark) {
  return plan_route(doc, from_landmark, to_landmark).nodes;
}

}  // namespace riverhelm::mdl
