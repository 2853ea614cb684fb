#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <set>
#include <system_error>

#include "riverhelm/mdl.hpp"
#include "xml_reader.hpp"

namespace riverhelm::mdl {

// ---------------------------------------------------------------------------
// Kinds and errors
// ---------------------------------------------------------------------------

std::string_view to_string(LandmarkKind kind) {
  switch (kind) {
    case LandmarkKind::marker: return "marker";
    case LandmarkKind::flow_obstacle: return "flow_obstacle";
    case LandmarkKind::static_obstacle: return "static_obstacle";
    case LandmarkKind::parking_area: return "parking_area";
    case LandmarkKind::fuel_rendezvous_terminal: return "fuel_rendezvous_terminal";
  }
  return "marker";
}

std::optional<LandmarkKind> landmark_kind_from_string(std::string_view s) {
  if (s == "marker" || s == "Coordinates_markers") return LandmarkKind::marker;
  if (s == "flow_obstacle" || s == "Flow_obstacles" || s == "Coordinates_flow_obstacles") {
    return LandmarkKind::flow_obstacle;
  }
  if (s == "static_obstacle") return LandmarkKind::static_obstacle;
  if (s == "parking_area") return LandmarkKind::parking_area;
  if (s == "fuel_rendezvous_terminal") return LandmarkKind::fuel_rendezvous_terminal;
  return std::nullopt;
}

ParseError::ParseError(int line, int col, const std::string& message)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + message),
      line_(line),
      col_(col),
      message_(message) {}

ValidationError::ValidationError(Diagnostic d)
    : std::runtime_error(d.rule_id + " (" + d.offending_id + "): " + d.message), diag_(std::move(d)) {}

OffRoute::OffRoute(double distance_m)
    : std::runtime_error("robot is " + std::to_string(distance_m) + " m from the flow polyline"),
      distance_m_(distance_m) {}

const Landmark* MapDocument::find_landmark(std::string_view landmark_id) const {
  for (const auto& l : landmarks) {
    if (l.id == landmark_id) return &l;
  }
  return nullptr;
}

const FlowSegment* MapDocument::find_flow(std::string_view flow_id) const {
  for (const auto& f : flows) {
    if (f.id == flow_id) return &f;
  }
  return nullptr;
}

namespace {

bool is_token(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Category { map, region, landmark, flow, annotation };

struct SourcePos {
  int line = 0;
  int col = 0;
};

using Locator = std::function<SourcePos(Category, std::size_t)>;

class Validator {
 public:
  Validator(const MapDocument& doc, const std::vector<MdlAnnotation>& annotations, Locator where)
      : doc_(doc), annotations_(annotations), where_(std::move(where)) {}

  std::vector<Diagnostic> run() {
    if (!is_token(doc_.id)) add(Category::map, 0, rule::kBadId, doc_.id, "map id must match [A-Za-z0-9_-]+");
    regions();
    landmarks();
    flows();
    const bool has_terminal = std::any_of(doc_.landmarks.begin(), doc_.landmarks.end(), [](const Landmark& l) {
      return l.kind == LandmarkKind::fuel_rendezvous_terminal;
    });
    if (!has_terminal) {
      add(Category::map, 0, rule::kNoFuelTerminal, doc_.id, "map defines no fuel_rendezvous_terminal landmark");
    }
    annotations();
    return std::move(out_);
  }

 private:
  void add(Category cat, std::size_t index, std::string_view rule_id, std::string offending, std::string message) {
    const auto pos = where_ ? where_(cat, index) : SourcePos{};
    out_.push_back({std::string(rule_id), std::move(offending), std::move(message), pos.line, pos.col});
  }

  // True when the id is usable; records BAD_ID / DUPLICATE_ID otherwise.
  bool check_id(Category cat, std::size_t index, const std::string& id, std::set<std::string>& seen,
                std::string_view what) {
    if (!is_token(id)) {
      add(cat, index, rule::kBadId, id, std::string(what) + " id must match [A-Za-z0-9_-]+");
      return false;
    }
    if (!seen.insert(id).second) {
      add(cat, index, rule::kDuplicateId, id, "duplicate " + std::string(what) + " id");
      return false;
    }
    return true;
  }

  void regions() {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc_.scale_regions.size(); ++i) {
      const auto& r = doc_.scale_regions[i];
      if (!check_id(Category::region, i, r.id, seen, "scale region")) continue;
      const GeoCoordinate lo{r.bounds.min_lat, r.bounds.min_lon, 0.0};
      const GeoCoordinate hi{r.bounds.max_lat, r.bounds.max_lon, 0.0};
      if (!is_valid(lo) || !is_valid(hi)) {
        add(Category::region, i, rule::kBadCoordinate, r.id, "scale region bounds outside lat/lon range");
      } else if (!(r.bounds.min_lat < r.bounds.max_lat) || !(r.bounds.min_lon < r.bounds.max_lon)) {
        add(Category::region, i, rule::kBadScaleRegion, r.id, "scale region bounds have no area");
      } else if (r.scale_denominator == 0) {
        add(Category::region, i, rule::kBadScaleRegion, r.id, "scale denominator must be positive");
      }
    }
  }

  void landmarks() {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc_.landmarks.size(); ++i) {
      const auto& l = doc_.landmarks[i];
      if (!check_id(Category::landmark, i, l.id, seen, "landmark")) continue;
      if (!is_valid(l.position)) {
        add(Category::landmark, i, rule::kBadCoordinate, l.id,
            "coordinate outside lat [-90,90], lon [-180,180], depth >= 0");
      }
    }
  }

  void flows() {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < doc_.flows.size(); ++i) {
      const auto& f = doc_.flows[i];
      if (!check_id(Category::flow, i, f.id, seen, "flow")) continue;
      if (f.waypoint_ids.size() < 2) {
        add(Category::flow, i, rule::kFlowUnderpopulated, f.id,
            "flow lists " + std::to_string(f.waypoint_ids.size()) + " waypoint(s); at least 2 required");
        continue;
      }
      if (f.from_id == f.to_id) {
        add(Category::flow, i, rule::kFlowSelfLoop, f.id, "flow starts and ends at the same landmark");
        continue;
      }
      if (f.waypoint_ids.front() != f.from_id || f.waypoint_ids.back() != f.to_id) {
        add(Category::flow, i, rule::kFlowEndpointMismatch, f.id,
            "waypoints must start with 'from' and end with 'to'");
        continue;
      }
      if (!std::isfinite(f.v_from.east) || !std::isfinite(f.v_from.north) || !std::isfinite(f.v_to.east) ||
          !std::isfinite(f.v_to.north)) {
        add(Category::flow, i, rule::kSchemaViolation, f.id, "flow vectors must be finite");
        continue;
      }
      std::set<std::string> refs;
      for (const auto& w : f.waypoint_ids) {
        if (doc_.find_landmark(w) == nullptr) {
          add(Category::flow, i, rule::kDanglingRef, w, "flow " + f.id + " references unknown landmark");
          break;
        }
        if (!refs.insert(w).second) {
          add(Category::flow, i, rule::kDuplicateId, w, "flow " + f.id + " visits the landmark twice");
          break;
        }
      }
    }
  }

  void annotations() {
    std::set<std::string> robots;
    for (std::size_t i = 0; i < annotations_.size(); ++i) {
      const auto& a = annotations_[i];
      if (!check_id(Category::annotation, i, a.robot_id, robots, "annotation robot")) continue;
      if (a.active_flow && doc_.find_flow(*a.active_flow) == nullptr) {
        add(Category::annotation, i, rule::kDanglingRef, *a.active_flow, "annotation references unknown flow");
        continue;
      }
      std::set<std::string> passed;
      bool ok = true;
      for (const auto& p : a.landmarks_passed) {
        if (doc_.find_landmark(p) == nullptr) {
          add(Category::annotation, i, rule::kDanglingRef, p, "annotation references unknown landmark");
          ok = false;
          break;
        }
        if (!passed.insert(p).second) {
          add(Category::annotation, i, rule::kAnnotationInconsistent, p, "landmark listed as passed twice");
          ok = false;
          break;
        }
      }
      if (!ok || !a.lookahead_landmark) continue;
      if (doc_.find_landmark(*a.lookahead_landmark) == nullptr) {
        add(Category::annotation, i, rule::kDanglingRef, *a.lookahead_landmark,
            "annotation references unknown landmark");
      } else if (passed.count(*a.lookahead_landmark) != 0) {
        add(Category::annotation, i, rule::kAnnotationInconsistent, *a.lookahead_landmark,
            "lookahead landmark is already passed");
      }
    }
  }

  const MapDocument& doc_;
  const std::vector<MdlAnnotation>& annotations_;
  Locator where_;
  std::vector<Diagnostic> out_;
};

// ---------------------------------------------------------------------------
// Tree -> model
// ---------------------------------------------------------------------------

class SchemaError : public std::runtime_error {
 public:
  SchemaError(Diagnostic d) : std::runtime_error(d.message), diag(std::move(d)) {}
  Diagnostic diag;
};

[[noreturn]] void schema_fail(int line, int col, std::string offending, std::string message) {
  throw SchemaError(Diagnostic{std::string(rule::kSchemaViolation), std::move(offending), std::move(message),
                               line, col});
}

class ElementReader {
 public:
  ElementReader(const xml::Element& el, std::initializer_list<std::string_view> allowed) : el_(el) {
    for (const auto& a : el.attributes) {
      if (std::find(allowed.begin(), allowed.end(), a.name) == allowed.end()) {
        schema_fail(a.line, a.col, a.name, "attribute '" + a.name + "' is not allowed on <" + el.name + ">");
      }
    }
  }

  std::string required(std::string_view name) const {
    const auto* a = el_.attribute(name);
    if (a == nullptr) {
      schema_fail(el_.line, el_.col, std::string(name),
                  "<" + el_.name + "> is missing attribute '" + std::string(name) + "'");
    }
    return a->value;
  }

  std::optional<std::string> optional(std::string_view name) const {
    const auto* a = el_.attribute(name);
    if (a == nullptr) return std::nullopt;
    return a->value;
  }

  double number(std::string_view name, std::optional<double> fallback = std::nullopt) const {
    const auto* a = el_.attribute(name);
    if (a == nullptr) {
      if (fallback) return *fallback;
      required(name);
    }
    double v = 0.0;
    const auto& s = a->value;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
      schema_fail(a->line, a->col, std::string(name), "attribute '" + std::string(name) + "' is not a number");
    }
    return v;
  }

  std::uint64_t integer(std::string_view name) const {
    const auto s = required(name);
    const auto* a = el_.attribute(name);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      schema_fail(a->line, a->col, std::string(name),
                  "attribute '" + std::string(name) + "' is not a non-negative integer");
    }
    return v;
  }

  void no_children() const {
    if (!el_.children.empty()) {
      const auto& c = el_.children.front();
      schema_fail(c.line, c.col, c.name, "<" + el_.name + "> takes no child elements");
    }
  }

 private:
  const xml::Element& el_;
};

struct Parsed {
  MdlFile file;
  std::vector<SourcePos> region_pos, landmark_pos, flow_pos, annotation_pos;
  SourcePos map_pos;
};

Parsed build_model(const xml::Element& root) {
  if (root.name != "Map") schema_fail(root.line, root.col, root.name, "root element must be <Map>");
  Parsed out;
  out.map_pos = {root.line, root.col};
  auto& doc = out.file.document;
  {
    ElementReader r(root, {"id", "name"});
    doc.id = r.required("id");
    doc.name = r.optional("name").value_or("");
  }
  for (const auto& el : root.children) {
    const SourcePos pos{el.line, el.col};
    if (el.name == "ScaleRegion") {
      ElementReader r(el, {"id", "minLat", "minLon", "maxLat", "maxLon", "scale"});
      r.no_children();
      ScaleRegion s;
      s.id = r.required("id");
      s.bounds = {r.number("minLat"), r.number("minLon"), r.number("maxLat"), r.number("maxLon")};
      s.scale_denominator = r.integer("scale");
      doc.scale_regions.push_back(std::move(s));
      out.region_pos.push_back(pos);
    } else if (el.name == "Landmark") {
      ElementReader r(el, {"id", "kind", "lat", "lon", "depth", "label"});
      r.no_children();
      Landmark l;
      l.id = r.required("id");
      const auto kind = r.required("kind");
      const auto k = landmark_kind_from_string(kind);
      if (!k) {
        const auto* a = el.attribute("kind");
        schema_fail(a->line, a->col, kind, "unknown landmark kind '" + kind + "'");
      }
      l.kind = *k;
      l.position = {r.number("lat"), r.number("lon"), r.number("depth", 0.0)};
      l.label = r.optional("label").value_or("");
      doc.landmarks.push_back(std::move(l));
      out.landmark_pos.push_back(pos);
    } else if (el.name == "Flow") {
      ElementReader r(el, {"id", "from", "to", "vFromEast", "vFromNorth", "vToEast", "vToNorth"});
      FlowSegment f;
      f.id = r.required("id");
      f.from_id = r.required("from");
      f.to_id = r.required("to");
      f.v_from = {r.number("vFromEast", 0.0), r.number("vFromNorth", 0.0)};
      f.v_to = {r.number("vToEast", 0.0), r.number("vToNorth", 0.0)};
      for (const auto& c : el.children) {
        if (c.name != "Waypoint") schema_fail(c.line, c.col, c.name, "<Flow> only contains <Waypoint> elements");
        ElementReader w(c, {"ref"});
        w.no_children();
        f.waypoint_ids.push_back(w.required("ref"));
      }
      doc.flows.push_back(std::move(f));
      out.flow_pos.push_back(pos);
    } else if (el.name == "Annotation") {
      ElementReader r(el, {"robot", "flow"});
      MdlAnnotation a;
      a.robot_id = r.required("robot");
      a.active_flow = r.optional("flow");
      for (const auto& c : el.children) {
        ElementReader cr(c, {"ref"});
        cr.no_children();
        if (c.name == "Coordinates_landmarks_passed") {
          if (a.lookahead_landmark) {
            schema_fail(c.line, c.col, c.name, "passed landmarks must precede the lookahead landmark");
          }
          a.landmarks_passed.push_back(cr.required("ref"));
        } else if (c.name == "Coordinates_lookahead_landmark") {
          if (a.lookahead_landmark) schema_fail(c.line, c.col, c.name, "at most one lookahead landmark");
          a.lookahead_landmark = cr.required("ref");
        } else {
          schema_fail(c.line, c.col, c.name, "unknown element <" + c.name + "> in <Annotation>");
        }
      }
      out.file.annotations.push_back(std::move(a));
      out.annotation_pos.push_back(pos);
    } else {
      schema_fail(el.line, el.col, el.name, "unknown element <" + el.name + ">");
    }
  }
  return out;
}

std::vector<Diagnostic> check_parsed(const Parsed& p) {
  const auto where = [&p](Category cat, std::size_t i) -> SourcePos {
    switch (cat) {
      case Category::map: return p.map_pos;
      case Category::region: return p.region_pos.at(i);
      case Category::landmark: return p.landmark_pos.at(i);
      case Category::flow: return p.flow_pos.at(i);
      case Category::annotation: return p.annotation_pos.at(i);
    }
    return {};
  };
  return Validator(p.file.document, p.file.annotations, where).run();
}

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

std::string format_degrees(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 7);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

std::string format_shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

}  // namespace

std::vector<Diagnostic> validate(const MapDocument& doc) { return validate(doc, {}); }

std::vector<Diagnostic> validate(const MapDocument& doc, const std::vector<MdlAnnotation>& annotations) {
  return Validator(doc, annotations, nullptr).run();
}

std::vector<Diagnostic> check_mdl(std::string_view text) {
  const auto root = xml::parse_document(text);
  try {
    return check_parsed(build_model(root));
  } catch (const SchemaError& e) {
    return {e.diag};
  }
}

MdlFile parse_mdl(std::string_view text) {
  const auto root = xml::parse_document(text);
  Parsed parsed;
  try {
    parsed = build_model(root);
  } catch (const SchemaError& e) {
    throw ValidationError(e.diag);
  }
  auto diags = check_parsed(parsed);
  if (!diags.empty()) throw ValidationError(std::move(diags.front()));
  auto& lms = parsed.file.document.landmarks;
  std::stable_sort(lms.begin(), lms.end(), [](const Landmark& a, const Landmark& b) { return a.id < b.id; });
  return std::move(parsed.file);
}

std::string serialize_mdl(const MapDocument& doc, const std::vector<MdlAnnotation>& annotations) {
  if (auto diags = validate(doc); !diags.empty()) throw ValidationError(std::move(diags.front()));
  if (auto diags = validate(doc, annotations); !diags.empty()) {
    throw AnnotationRefError("annotation invalid: " + diags.front().rule_id + " (" + diags.front().offending_id +
                             ")");
  }
  using xml::escape_attribute;
  std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<Map id=\"" + escape_attribute(doc.id) + "\" name=\"" + escape_attribute(doc.name) + "\">\n";
  for (const auto& r : doc.scale_regions) {
    out += "  <ScaleRegion id=\"" + escape_attribute(r.id) + "\" minLat=\"" + format_degrees(r.bounds.min_lat) +
           "\" minLon=\"" + format_degrees(r.bounds.min_lon) + "\" maxLat=\"" + format_degrees(r.bounds.max_lat) +
           "\" maxLon=\"" + format_degrees(r.bounds.max_lon) + "\" scale=\"" +
           std::to_string(r.scale_denominator) + "\"/>\n";
  }
  std::vector<const Landmark*> sorted;
  for (const auto& l : doc.landmarks) sorted.push_back(&l);
  std::stable_sort(sorted.begin(), sorted.end(), [](const Landmark* a, const Landmark* b) { return a->id < b->id; });
  for (const auto* l : sorted) {
    out += "  <Landmark id=\"" + escape_attribute(l->id) + "\" kind=\"" + std::string(to_string(l->kind)) +
           "\" lat=\"" + format_degrees(l->position.lat) + "\" lon=\"" + format_degrees(l->position.lon) +
           "\" depth=\"" + format_shortest(l->position.depth) + "\" label=\"" + escape_attribute(l->label) +
           "\"/>\n";
  }
  for (const auto& f : doc.flows) {
    out += "  <Flow id=\"" + escape_attribute(f.id) + "\" from=\"" + escape_attribute(f.from_id) + "\" to=\"" +
           escape_attribute(f.to_id) + "\" vFromEast=\"" + format_shortest(f.v_from.east) + "\" vFromNorth=\"" +
           format_shortest(f.v_from.north) + "\" vToEast=\"" + format_shortest(f.v_to.east) + "\" vToNorth=\"" +
           format_shortest(f.v_to.north) + "\">\n";
    for (const auto& w : f.waypoint_ids) out += "    <Waypoint ref=\"" + escape_attribute(w) + "\"/>\n";
    out += "  </Flow>\n";
  }
  for (const auto& a : annotations) {
    out += "  <Annotation robot=\"" + escape_attribute(a.robot_id) + "\"";
    if (a.active_flow) out += " flow=\"" + escape_attribute(*a.active_flow) + "\"";
    if (a.landmarks_passed.empty() && !a.lookahead_landmark) {
      out += "/>\n";
      continue;
    }
    out += ">\n";
    for (const auto& p : a.landmarks_passed) {
      out += "    <Coordinates_landmarks_passed ref=\"" + escape_attribute(p) + "\"/>\n";
    }
    if (a.lookahead_landmark) {
      out += "    <Coordinates_lookahead_landmark ref=\"" + escape_attribute(*a.lookahead_landmark) + "\"/>\n";
    }
    out += "  </Annotation>\n";
  }
  out += "</Map>\n";
  return out;
}

}  // namespace riverhelm::mdl
