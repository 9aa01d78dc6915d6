#include "hkends/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "bundled.hpp"
#include "hkends/error.hpp"
#include "hkends/estimates.hpp"

namespace hkends {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorKind::ParseError, what); }

// Accepts plain numbers and strings such as "pi/2", "2*pi/3", "-0.25pi".
double parse_angle(const json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (!j.is_string()) bad(field + ": expected a number or a multiple of pi");
  std::string s;
  for (char c : j.get<std::string>()) {
    if (c != ' ') s += c;
  }
  const auto at = s.find("pi");
  try {
    if (at == std::string::npos) return std::stod(s);
    std::string pre = s.substr(0, at), post = s.substr(at + 2);
    if (!pre.empty() && pre.back() == '*') pre.pop_back();
    double coef = 1.0;
    if (pre == "-") {
      coef = -1.0;
    } else if (!pre.empty() && pre != "+") {
      std::size_t used = 0;
      coef = std::stod(pre, &used);
      if (used != pre.size()) bad(field + ": cannot read angle '" + j.get<std::string>() + "'");
    }
    double div = 1.0;
    if (!post.empty()) {
      if (post.front() != '/') bad(field + ": cannot read angle '" + j.get<std::string>() + "'");
      std::size_t used = 0;
      div = std::stod(post.substr(1), &used);
      if (used != post.size() - 1 || div == 0.0) bad(field + ": cannot read angle '" + j.get<std::string>() + "'");
    }
    return coef * std::numbers::pi / div;
  } catch (const std::logic_error&) {
    bad(field + ": cannot read angle '" + j.get<std::string>() + "'");
  }
}

BoundaryCondition parse_bc_string(const json& j, const std::string& field) {
  if (!j.is_string() || j.get<std::string>().size() != 1) bad(field + ": expected \"D\" or \"N\"");
  const char c = j.get<std::string>()[0];
  if (c != 'D' && c != 'N') bad(field + ": expected \"D\" or \"N\"");
  return c == 'D' ? BoundaryCondition::Dirichlet : BoundaryCondition::Neumann;
}

std::pair<BoundaryCondition, BoundaryCondition> parse_bc_pair(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2) bad(field + ": expected two of \"D\"/\"N\"");
  return {parse_bc_string(j[0], field), parse_bc_string(j[1], field)};
}

std::string bc(BoundaryCondition b) { return std::string(1, to_char(b)); }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    bad(std::string(key) + ": " + e.what());
  }
}

double get_number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) bad(std::string("missing numeric field '") + key + "'");
  return j.at(key).get<double>();
}

EndDescriptor parse_end(const json& j) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) bad("end: missing 'type'");
  const auto type = j["type"].get<std::string>();
  if (type == "cone") {
    ConeEnd c;
    c.aperture = parse_angle(j.value("aperture", json()), "cone.aperture");
    c.edge_angle = parse_angle(j.value("edge_angle", json(0.0)), "cone.edge_angle");
    std::tie(c.edge1, c.edge2) = parse_bc_pair(j.value("edges", json()), "cone.edges");
    return {c};
  }
  if (type == "strip") {
    StripEnd s;
    s.width = get_number(j, "width");
    s.direction = parse_angle(j.value("direction", json(0.0)), "strip.direction");
    std::tie(s.side1, s.side2) = parse_bc_pair(j.value("sides", json()), "strip.sides");
    return {s};
  }
  if (type == "parabola") {
    ParabolaExteriorEnd p;
    p.bc = parse_bc_string(j.value("bc", json("D")), "parabola.bc");
    p.vertex_distance = get_or(j, "vertex_distance", p.vertex_distance);
    return {p};
  }
  if (type == "plane") return {PlaneEnd{}};
  if (type == "mask") {
    UserGridEnd u;
    u.x0 = get_number(j, "x0");
    u.y0 = get_number(j, "y0");
    u.spacing = get_number(j, "spacing");
    u.nx = get_or(j, "nx", 0);
    u.ny = get_or(j, "ny", 0);
    u.mask = get_or(j, "mask", std::vector<std::uint8_t>{});
    if (u.nx <= 0 || u.ny <= 0 || u.mask.size() != static_cast<std::size_t>(u.nx) * static_cast<std::size_t>(u.ny)) {
      bad("mask: needs nx * ny entries");
    }
    return {u};
  }
  bad("end: unknown type '" + type + "'");
}

json end_to_json(const EndDescriptor& e) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConeEnd>) {
          return {{"type", "cone"}, {"aperture", s.aperture}, {"edge_angle", s.edge_angle},
                  {"edges", {bc(s.edge1), bc(s.edge2)}}};
        } else if constexpr (std::is_same_v<T, StripEnd>) {
          return {{"type", "strip"}, {"width", s.width}, {"direction", s.direction},
                  {"sides", {bc(s.side1), bc(s.side2)}}};
        } else if constexpr (std::is_same_v<T, ParabolaExteriorEnd>) {
          return {{"type", "parabola"}, {"bc", bc(s.bc)}, {"vertex_distance", s.vertex_distance}};
        } else if constexpr (std::is_same_v<T, PlaneEnd>) {
          return {{"type", "plane"}};
        } else {
          return {{"type", "mask"}, {"x0", s.x0}, {"y0", s.y0}, {"spacing", s.spacing},
                  {"nx", s.nx}, {"ny", s.ny}, {"mask", s.mask}};
        }
      },
      e.shape);
}

ProbeSpec parse_probe(const json& j, const std::string& field) {
  ProbeSpec p;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "o") {
      p.kind = ProbeSpec::Kind::Core;
    } else if (s.size() > 1 && s[0] == 'o') {
      p.kind = ProbeSpec::Kind::Reference;
      try {
        std::size_t used = 0;
        p.end = std::stoi(s.substr(1), &used);
        if (used != s.size() - 1 || p.end < 1) bad(field + ": bad probe '" + s + "'");
      } catch (const std::logic_error&) {
        bad(field + ": bad probe '" + s + "'");
      }
    } else {
      bad(field + ": bad probe '" + s + "'");
    }
    p.label = s;
    return p;
  }
  if (!j.is_object()) bad(field + ": probe must be \"o\", \"o<i>\" or an object");
  p.kind = ProbeSpec::Kind::Point;
  p.point.sheet = get_or(j, "sheet", 0);
  if (j.contains("r")) {
    const double r = get_number(j, "r");
    const double th = parse_angle(j.value("theta", json(0.0)), field + ".theta");
    p.point.x = r * std::cos(th);
    p.point.y = r * std::sin(th);
  } else {
    p.point.x = get_number(j, "x");
    p.point.y = get_number(j, "y");
  }
  const auto scale = get_or<std::string>(j, "scale", "none");
  if (scale != "none" && scale != "sqrt_t") bad(field + ": scale must be \"none\" or \"sqrt_t\"");
  p.scale_sqrt_t = scale == "sqrt_t";
  p.label = get_or<std::string>(j, "label", "");
  if (p.label.empty()) {
    std::ostringstream os;
    os << "(" << p.point.x << "," << p.point.y << ")";
    if (p.point.sheet != 0) os << "@" << p.point.sheet;
    if (p.scale_sqrt_t) os << "*sqrt(t)";
    p.label = os.str();
  }
  return p;
}

json probe_to_json(const ProbeSpec& p) {
  switch (p.kind) {
    case ProbeSpec::Kind::Core:
      return "o";
    case ProbeSpec::Kind::Reference:
      return "o" + std::to_string(p.end);
    case ProbeSpec::Kind::Point:
      break;
  }
  json j = {{"sheet", p.point.sheet}, {"x", p.point.x}, {"y", p.point.y}, {"label", p.label}};
  if (p.scale_sqrt_t) j["scale"] = "sqrt_t";
  return j;
}

DecayModel parse_model(const std::string& s) {
  if (s == "power") return DecayModel::Power;
  if (s == "power-log") return DecayModel::PowerLog;
  if (s == "log-class") return DecayModel::LogClass;
  if (s == "auto") return DecayModel::Auto;
  bad("unknown fit model '" + s + "'");
}

SeriesSpec parse_series(const json& j) {
  if (!j.is_object()) bad("series entries must be objects");
  SeriesSpec s;
  s.name = get_or<std::string>(j, "name", "");
  if (s.name.empty()) bad("series: missing name");
  s.x = parse_probe(j.value("x", json("o")), s.name + ".x");
  s.y = parse_probe(j.value("y", json("o")), s.name + ".y");
  s.t_min = get_or(j, "t_min", s.t_min);
  s.t_max = get_or(j, "t_max", s.t_max);
  s.samples = get_or(j, "samples", s.samples);
  if (!(s.t_min > 0.0) || !(s.t_max > s.t_min) || s.samples < 2) bad(s.name + ": need 0 < t_min < t_max and samples >= 2");
  s.model = parse_model(get_or<std::string>(j, "model", "power"));
  s.normalize_h = get_or(j, "normalize_h", false);
  s.truncation_check = get_or(j, "truncation_check", false);
  if (j.contains("expect")) {
    const auto& e = j["expect"];
    if (!e.is_object()) bad(s.name + ".expect must be an object");
    if (e.contains("a")) {
      if (e["a"].is_string() && e["a"].get<std::string>() == "predicted") {
        s.expect_a_predicted = true;
      } else if (e["a"].is_number()) {
        s.expect_a = e["a"].get<double>();
      } else {
        bad(s.name + ".expect.a must be a number or \"predicted\"");
      }
    }
    s.a_tol = get_or(e, "a_tol", s.a_tol);
    s.expect_log_class = get_or(e, "log_class", false);
    s.b_target = get_or(e, "b", s.b_target);
    s.b_tol = get_or(e, "b_tol", s.b_tol);
  }
  return s;
}

json series_to_json(const SeriesSpec& s) {
  json j = {{"name", s.name},       {"x", probe_to_json(s.x)}, {"y", probe_to_json(s.y)},
            {"t_min", s.t_min},     {"t_max", s.t_max},        {"samples", s.samples},
            {"model", to_string(s.model)}, {"normalize_h", s.normalize_h}, {"truncation_check", s.truncation_check}};
  json e = json::object();
  if (s.expect_a_predicted) e["a"] = "predicted";
  if (s.expect_a) e["a"] = *s.expect_a;
  if (s.expect_a_predicted || s.expect_a) e["a_tol"] = s.a_tol;
  if (s.expect_log_class) {
    e["log_class"] = true;
    e["b"] = s.b_target;
    e["b_tol"] = s.b_tol;
  }
  if (!e.empty()) j["expect"] = e;
  return j;
}

json scenario_document(const Scenario& s) {
  json ends = json::array();
  for (const auto& e : s.ends) ends.push_back(end_to_json(e));
  json series = json::array();
  for (const auto& x : s.series) series.push_back(series_to_json(x));
  json points = json::array();
  for (const auto& p : s.envelope.points) points.push_back(probe_to_json(p));
  json j = {
      {"name", s.name},
      {"description", s.description},
      {"manifold", {{"core_radius", s.core_radius}, {"core_bc", bc(s.core_bc)}, {"ends", ends}}},
      {"grid",
       {{"dx", s.dx}, {"rmax", s.r_max}, {"grading", s.grading == Grading::Geometric ? "geometric" : "uniform"}}},
      {"run", {{"implicit", s.implicit}, {"epsilon", s.epsilon}, {"seed", s.seed}}},
      {"series", series},
      {"envelope",
       {{"times", s.envelope.times}, {"points", points}, {"coverage", s.envelope.coverage},
        {"max_ratio", s.envelope.max_ratio}}},
      {"thresholds",
       {{"symmetry", s.thresholds.symmetry}, {"semigroup", s.thresholds.semigroup},
        {"truncation_drift", s.thresholds.truncation_drift}, {"band_ratio", s.thresholds.band_ratio}}},
  };
  if (s.monte_carlo.enabled) {
    j["monte_carlo"] = {{"x", probe_to_json(s.monte_carlo.x)}, {"y", probe_to_json(s.monte_carlo.y)},
                        {"t", s.monte_carlo.t}, {"walkers", s.monte_carlo.walkers},
                        {"sigmas", s.monte_carlo.sigmas}};
  }
  return j;
}

Scenario from_document(const json& j) {
  if (!j.is_object()) bad("scenario must be a JSON object");
  Scenario s;
  s.name = get_or<std::string>(j, "name", "");
  if (s.name.empty()) bad("scenario: missing name");
  s.description = get_or<std::string>(j, "description", "");

  if (!j.contains("manifold") || !j["manifold"].is_object()) bad("scenario: missing manifold");
  const auto& m = j["manifold"];
  s.core_radius = get_or(m, "core_radius", s.core_radius);
  s.core_bc = parse_bc_string(m.value("core_bc", json("N")), "manifold.core_bc");
  if (!m.contains("ends") || !m["ends"].is_array()) bad("manifold: missing ends");
  for (const auto& e : m["ends"]) s.ends.push_back(parse_end(e));

  if (j.contains("grid")) {
    const auto& g = j["grid"];
    s.dx = get_or(g, "dx", s.dx);
    s.r_max = get_or(g, "rmax", s.r_max);
    const auto grading = get_or<std::string>(g, "grading", "geometric");
    if (grading != "geometric" && grading != "uniform") bad("grid.grading must be geometric or uniform");
    s.grading = grading == "geometric" ? Grading::Geometric : Grading::Uniform;
  }
  if (!(s.dx > 0.0) || !(s.r_max > s.core_radius)) bad("grid: need dx > 0 and rmax > core_radius");
  if (j.contains("run")) {
    const auto& r = j["run"];
    s.implicit = get_or(r, "implicit", s.implicit);
    s.epsilon = get_or(r, "epsilon", s.epsilon);
    s.seed = get_or<std::uint64_t>(r, "seed", s.seed);
  }
  if (j.contains("series")) {
    if (!j["series"].is_array()) bad("series must be an array");
    for (const auto& x : j["series"]) s.series.push_back(parse_series(x));
  }
  if (j.contains("envelope")) {
    const auto& e = j["envelope"];
    s.envelope.times = get_or(e, "times", std::vector<double>{});
    for (double t : s.envelope.times) {
      if (!(t > 0.0)) bad("envelope.times must be positive");
    }
    if (e.contains("points")) {
      for (const auto& p : e["points"]) s.envelope.points.push_back(parse_probe(p, "envelope.points"));
    }
    s.envelope.coverage = get_or(e, "coverage", s.envelope.coverage);
    s.envelope.max_ratio = get_or(e, "max_ratio", s.envelope.max_ratio);
  }
  if (j.contains("monte_carlo")) {
    const auto& mc = j["monte_carlo"];
    s.monte_carlo.enabled = true;
    s.monte_carlo.x = parse_probe(mc.value("x", json("o")), "monte_carlo.x");
    s.monte_carlo.y = parse_probe(mc.value("y", json("o")), "monte_carlo.y");
    s.monte_carlo.t = get_or(mc, "t", s.monte_carlo.t);
    s.monte_carlo.walkers = get_or<std::size_t>(mc, "walkers", s.monte_carlo.walkers);
    s.monte_carlo.sigmas = get_or(mc, "sigmas", s.monte_carlo.sigmas);
    if (!(s.monte_carlo.t > 0.0) || s.monte_carlo.walkers == 0) bad("monte_carlo: need t > 0 and walkers > 0");
  }
  if (j.contains("thresholds")) {
    const auto& t = j["thresholds"];
    s.thresholds.symmetry = get_or(t, "symmetry", s.thresholds.symmetry);
    s.thresholds.semigroup = get_or(t, "semigroup", s.thresholds.semigroup);
    s.thresholds.truncation_drift = get_or(t, "truncation_drift", s.thresholds.truncation_drift);
    s.thresholds.band_ratio = get_or(t, "band_ratio", s.thresholds.band_ratio);
  }
  if (j.contains("variants")) {
    if (!j["variants"].is_array()) bad("variants must be an array of merge patches");
    for (const auto& v : j["variants"]) {
      if (!v.is_object()) bad("variants must be an array of merge patches");
      s.variant_patches.push_back(v.dump());
    }
  }
  return s;
}

}  // namespace

PlanePoint ProbeSpec::at(double t) const {
  if (!scale_sqrt_t) return point;
  const double k = std::sqrt(t);
  return {point.sheet, point.x * k, point.y * k};
}

ManifoldWithEnds Scenario::manifold() const { return assemble(ends, core_radius, {}, core_bc); }

HeatOptions Scenario::heat_options() const {
  HeatOptions o;
  o.implicit = implicit;
  o.epsilon = epsilon;
  return o;
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  return from_document(j);
}

std::string to_json(const Scenario& s) {
  json j = scenario_document(s);
  if (!s.variant_patches.empty()) {
    json v = json::array();
    for (const auto& p : s.variant_patches) v.push_back(json::parse(p));
    j["variants"] = v;
  }
  return j.dump(2);
}

std::vector<Scenario> expand_variants(const Scenario& s) {
  std::vector<Scenario> out{s};
  out.front().variant_patches.clear();
  for (const auto& p : s.variant_patches) {
    json doc = scenario_document(s);
    doc.merge_patch(json::parse(p));
    if (doc.contains("name") && doc["name"] == s.name) bad("variant of " + s.name + " needs its own name");
    out.push_back(from_document(doc));
  }
  return out;
}

std::vector<std::string> list_scenarios() {
  std::vector<std::string> names;
  for (const auto& b : detail::bundled_scenarios()) names.push_back(b.name);
  return names;
}

const std::string& bundled_scenario_text(const std::string& name) {
  for (const auto& b : detail::bundled_scenarios()) {
    if (b.name == name) return b.text;
  }
  throw Error(ErrorKind::NotFound, "no bundled scenario named '" + name + "'");
}

Scenario load_scenario(const std::string& name_or_path) {
  for (const auto& b : detail::bundled_scenarios()) {
    if (b.name == name_or_path) return parse_scenario(b.text);
  }
  std::ifstream in(name_or_path);
  if (!in) throw Error(ErrorKind::NotFound, "no bundled scenario or readable file '" + name_or_path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scenario(os.str());
}

namespace {

std::string angle_text(double a) {
  std::ostringstream os;
  os.precision(4);
  os << a << " rad (" << a / std::numbers::pi << " pi)";
  return os.str();
}

std::string end_text(const EndDescriptor& e) {
  std::ostringstream os;
  os.precision(4);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, ConeEnd>) {
          os << "cone, aperture " << angle_text(s.aperture) << ", first edge at " << angle_text(s.edge_angle)
             << ", edges " << to_char(s.edge1) << to_char(s.edge2);
        } else if constexpr (std::is_same_v<T, StripEnd>) {
          os << "strip (zero-aperture cone), width " << s.width << ", axis at " << angle_text(s.direction)
             << ", sides " << to_char(s.side1) << to_char(s.side2);
        } else if constexpr (std::is_same_v<T, ParabolaExteriorEnd>) {
          os << "exterior of a parabola, vertex " << s.vertex_distance << " above the sheet centre, boundary "
             << to_char(s.bc);
        } else if constexpr (std::is_same_v<T, PlaneEnd>) {
          os << "plane sheet";
        } else {
          os << "mask " << s.nx << "x" << s.ny << " at spacing " << s.spacing;
        }
      },
      e.shape);
  return os.str();
}

}  // namespace

std::string describe(const Scenario& s) {
  std::ostringstream os;
  os << s.name << "\n";
  if (!s.description.empty()) os << "  " << s.description << "\n";
  os << "  core: radius " << s.core_radius << ", boundary " << to_char(s.core_bc) << "\n";
  for (std::size_t i = 0; i < s.ends.size(); ++i) os << "  end " << i + 1 << ": " << end_text(s.ends[i]) << "\n";
  os << "  grid: dx " << s.dx << ", rmax " << s.r_max << ", "
     << (s.grading == Grading::Geometric ? "geometric" : "uniform") << " grading, "
     << (s.implicit ? "implicit" : "explicit") << " stepping, seed " << s.seed << "\n";
  try {
    os << "  predicted p(t,o,o): " << decay_exponent_prediction(s.manifold()).describe() << "\n";
  } catch (const Error& e) {
    os << "  predicted p(t,o,o): unavailable (" << e.what() << ")\n";
  }
  for (const auto& x : s.series) {
    os << "  series " << x.name << ": p(t, " << x.x.label << ", " << x.y.label << ")"
       << (x.normalize_h ? " / h(x)h(y)" : "") << ", t in [" << x.t_min << ", " << x.t_max << "], "
       << to_string(x.model) << " fit\n";
  }
  if (!s.variant_patches.empty()) os << "  variants: " << s.variant_patches.size() << "\n";
  return os.str();
}

std::string describe(const std::string& name) { return describe(parse_scenario(bundled_scenario_text(name))); }

CellId resolve_probe(const Grid& grid, const ProbeSpec& probe, double t) {
  switch (probe.kind) {
    case ProbeSpec::Kind::Core:
      if (grid.core_center() == kNoCell) throw Error(ErrorKind::OutsideDomain, "grid has no core");
      return grid.core_center();
    case ProbeSpec::Kind::Reference:
      if (probe.end < 1 || probe.end > grid.num_ends()) {
        throw Error(ErrorKind::OutsideDomain, "probe " + probe.label + " names a missing end");
      }
      return grid.reference_cell(probe.end);
    case ProbeSpec::Kind::Point:
      break;
  }
  const PlanePoint p = probe.at(t);
  if (const auto* m = grid.manifold()) {
    if (m->locate_end(p) < 0) throw Error(ErrorKind::OutsideDomain, "probe " + probe.label + " lies outside the domain");
  }
  if (std::hypot(p.x, p.y) >= grid.truncation_radius()) {
    throw Error(ErrorKind::OutsideDomain, "probe " + probe.label + " lies beyond the truncation radius");
  }
  return grid.locate_domain(p);
}

void validate_probes(const Scenario& s) {
  const auto m = s.manifold();
  auto check = [&](const ProbeSpec& p, double t) {
    if (p.kind == ProbeSpec::Kind::Reference && (p.end < 1 || p.end > static_cast<int>(m.num_ends()))) {
      throw Error(ErrorKind::OutsideDomain, "probe " + p.label + " names a missing end");
    }
    if (p.kind != ProbeSpec::Kind::Point) return;
    const PlanePoint q = p.at(t);
    if (m.locate_end(q) < 0 || std::hypot(q.x, q.y) >= s.r_max) {
      throw Error(ErrorKind::OutsideDomain, "probe " + p.label + " lies outside the domain at t = " + std::to_string(t));
    }
  };
  for (const auto& x : s.series) {
    for (double t : {x.t_min, x.t_max}) {
      check(x.x, t);
      check(x.y, t);
    }
  }
  for (const auto& p : s.envelope.points) {
    for (double t : s.envelope.times) check(p, t);
  }
  if (s.monte_carlo.enabled) {
    check(s.monte_carlo.x, s.monte_carlo.t);
    check(s.monte_carlo.y, s.monte_carlo.t);
  }
}

}  // namespace hkends
