#include "asphere/io.hpp"

#include "asphere/grid.hpp"
#include "asphere/invariants.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace asphere {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> split_doubles(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      size_t used = 0;
      const double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used])))
        ++used;
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw precondition_error("io", "malformed number '" + item + "' in " + what);
    }
  }
  if (!text.empty() && text.back() == ',')
    throw precondition_error("io", "trailing comma in " + what);
  return out;
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<int>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) out[static_cast<int>(i)] = v[i];
  return out;
}

// Sample points for CSV dumps: interior nodes for grid fields, a lattice over
// the domain interior for analytic fields.
std::vector<Vec> csv_points(const PotentialField& field, int samples_per_axis) {
  if (field.is_grid()) {
    const GridSpec& g = field.grid_spec();
    std::vector<Vec> pts;
    pts.reserve(g.interior_count());
    for (int flat : g.interior()) pts.push_back(g.node_point(flat));
    return pts;
  }
  if (samples_per_axis < 2)
    throw precondition_error("io", "samples_per_axis must be at least 2");
  const ConvexDomain& dom = field.domain();
  const int n = field.dim();
  const auto [lo, hi] = dom.bounding_box();
  const double margin = 1e-9 * dom.scale();
  std::vector<Vec> pts;
  if (n == 1) {
    for (int i = 0; i < samples_per_axis; ++i) {
      Vec t = vec1(lo[0] + (hi[0] - lo[0]) * i / (samples_per_axis - 1));
      if (dom.contains(t, margin)) pts.push_back(t);
    }
    return pts;
  }
  for (int j = 0; j < samples_per_axis; ++j)
    for (int i = 0; i < samples_per_axis; ++i) {
      Vec t = vec2(lo[0] + (hi[0] - lo[0]) * i / (samples_per_axis - 1),
                   lo[1] + (hi[1] - lo[1]) * j / (samples_per_axis - 1));
      if (dom.contains(t, margin)) pts.push_back(t);
    }
  return pts;
}

const char* value_column(PotentialRole role) {
  switch (role) {
    case PotentialRole::PotentialU: return "u";
    case PotentialRole::GraphF: return "f";
    default: return "value";
  }
}

const char* coord_prefix(PotentialRole role) {
  return role == PotentialRole::GraphF ? "x" : "t";
}

void append_row(std::string& out, const std::vector<double>& cells) {
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += format_full(cells[i]);
  }
  out += '\n';
}

// Graph-side equation defect log det(f_ij) - (n+2) log(-v); zero exactly on
// complete hyperbolic affine spheres presented as graphs.
double graph_residual(const PotentialField& f, const Vec& x) {
  const int n = f.dim();
  const Mat h = f.hessian_at(x);
  const double det = n == 1 ? h(0, 0) : h.determinant();
  const double v = x.dot(f.gradient_at(x)) - f.value_at(x);
  if (!(det > 0.0) || !(v < 0.0)) return kNaN;
  return std::log(det) - (n + 2) * std::log(-v);
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json parse_config_object(const std::string& config_json) {
  json cfg;
  try {
    cfg = json::parse(config_json);
  } catch (const json::parse_error& e) {
    throw precondition_error("io", std::string("malformed config JSON: ") + e.what());
  }
  if (!cfg.is_object())
    throw precondition_error("io", "config JSON must be an object");
  return cfg;
}

json study_json(const StudyReport& rep) {
  json j;
  j["kind"] = rep.kind;
  j["seed"] = rep.seed;
  j["passed"] = rep.passed();
  j["sweep"] = rep.sweep;
  j["measured"] = rep.measured;
  j["fitted"] = json(rep.fitted);
  json crits = json::array();
  for (const StudyCriterion& c : rep.criteria)
    crits.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value}});
  j["criteria"] = crits;
  j["notes"] = rep.notes;
  return j;
}

}  // namespace

ConvexDomain parse_domain(const std::string& spec) {
  const size_t colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::vector<double> p =
      colon == std::string::npos
          ? std::vector<double>{}
          : split_doubles(spec.substr(colon + 1), "domain '" + spec + "'");

  if (name == "interval") {
    if (p.empty()) return ConvexDomain::interval(-1.0, 1.0);
    if (p.size() == 2) return ConvexDomain::interval(p[0], p[1]);
    throw precondition_error("io", "interval takes 0 or 2 parameters");
  }
  if (name == "disk") {
    if (p.empty()) return ConvexDomain::unit_ball(2);
    if (p.size() == 3) return ConvexDomain::disk(vec2(p[0], p[1]), p[2]);
    throw precondition_error("io", "disk takes 0 or 3 parameters (cx,cy,r)");
  }
  if (name == "ellipse") {
    if (p.size() == 5)
      return ConvexDomain::ellipse(vec2(p[0], p[1]), p[2], p[3], p[4]);
    throw precondition_error("io", "ellipse takes 5 parameters (cx,cy,a,b,angle)");
  }
  if (name == "square") {
    if (p.empty()) return ConvexDomain::square(1.0);
    if (p.size() == 1) return ConvexDomain::square(p[0]);
    throw precondition_error("io", "square takes 0 or 1 parameters (half_width)");
  }
  if (name == "polygon") {
    if (p.size() < 6 || p.size() % 2 != 0)
      throw precondition_error("io", "polygon needs an even list of >= 6 numbers");
    std::vector<Vec> verts;
    for (size_t i = 0; i + 1 < p.size(); i += 2) verts.push_back(vec2(p[i], p[i + 1]));
    return ConvexDomain::polygon(std::move(verts));
  }
  throw precondition_error("io", "unknown domain '" + name + "'");
}

ProjectiveMap parse_map(const std::string& entries) {
  const std::vector<double> p = split_doubles(entries, "map entries");
  int side = 0;
  if (p.size() == 4) side = 2;
  else if (p.size() == 9) side = 3;
  else
    throw precondition_error(
        "io", "map needs 4 (1-D) or 9 (2-D) row-major entries, got " +
                  std::to_string(p.size()));
  Mat m(side, side);
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) m(i, j) = p[static_cast<size_t>(i) * side + j];
  return ProjectiveMap::normalized(m);
}

Vec parse_point(const std::string& spec) {
  const std::vector<double> p = split_doubles(spec, "point '" + spec + "'");
  if (p.size() != 1 && p.size() != 2)
    throw precondition_error("io", "point needs 1 or 2 coordinates");
  return to_vec(p);
}

PotentialField parse_potential_spec(const std::string& json_text) {
  json spec;
  try {
    spec = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw precondition_error("io", std::string("malformed potential spec: ") + e.what());
  }
  if (!spec.is_object())
    throw precondition_error("io", "potential spec must be a JSON object");
  for (const auto& [key, dummy] : spec.items()) {
    (void)dummy;
    if (key != "builtin" && key != "n" && key != "coefficients" && key != "domain")
      throw precondition_error("io", "unknown potential spec key '" + key + "'");
  }
  if (!spec.contains("builtin") || !spec["builtin"].is_string())
    throw precondition_error("io", "potential spec needs a \"builtin\" name");
  const std::string name = spec["builtin"].get<std::string>();

  int n = 2;
  if (spec.contains("n")) {
    if (!spec["n"].is_number_integer())
      throw precondition_error("io", "potential spec \"n\" must be an integer");
    n = spec["n"].get<int>();
  }
  if (n != 1 && n != 2)
    throw precondition_error("io", "potential spec \"n\" must be 1 or 2");

  std::vector<double> coeffs;
  if (spec.contains("coefficients")) {
    if (!spec["coefficients"].is_array())
      throw precondition_error("io", "potential spec \"coefficients\" must be an array");
    for (const auto& c : spec["coefficients"]) {
      if (!c.is_number())
        throw precondition_error("io", "potential coefficients must be numbers");
      coeffs.push_back(c.get<double>());
    }
  }

  std::optional<ConvexDomain> dom;
  if (spec.contains("domain")) {
    if (!spec["domain"].is_string())
      throw precondition_error("io", "potential spec \"domain\" must be a string");
    dom = parse_domain(spec["domain"].get<std::string>());
  }
  return make_builtin(name, n, coeffs, std::move(dom));
}

PotentialField load_potential_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw precondition_error("io", "cannot read potential file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_potential_spec(buf.str());
}

std::string potential_csv(const PotentialField& field, int samples_per_axis) {
  const int n = field.dim();
  const std::vector<Vec> pts = csv_points(field, samples_per_axis);
  std::string out;
  const char* cp = coord_prefix(field.role());
  for (int a = 0; a < n; ++a) {
    out += cp;
    out += std::to_string(a + 1);
    out += ',';
  }
  out += value_column(field.role());
  out += '\n';
  for (const Vec& t : pts) {
    std::vector<double> cells;
    for (int a = 0; a < n; ++a) cells.push_back(t[a]);
    cells.push_back(field.value_at(t));
    append_row(out, cells);
  }
  return out;
}

std::string invariants_csv(const PotentialField& field, int samples_per_axis) {
  const PotentialRole role = field.role();
  if (role == PotentialRole::Scalar)
    throw precondition_error("io", "invariants need a potential-u or graph-f field");
  const int n = field.dim();
  const std::vector<Vec> pts = csv_points(field, samples_per_axis);

  std::string out;
  const char* cp = coord_prefix(role);
  for (int a = 0; a < n; ++a) out += std::string(cp) + std::to_string(a + 1) + ",";
  out += value_column(role);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j)
      out += ",g" + std::to_string(i + 1) + std::to_string(j + 1);
  out += ",residual";
  if (role == PotentialRole::PotentialU) out += ",defect";
  for (int a = 0; a <= n; ++a) out += ",nu" + std::to_string(a + 1);
  for (int a = 0; a <= n; ++a) out += ",mu" + std::to_string(a + 1);
  if (role == PotentialRole::GraphF) out += ",cubic_norm,shape_norm";
  out += '\n';

  const MetricKind kind = role == PotentialRole::PotentialU ? MetricKind::Centroaffine
                                                            : MetricKind::AffineGraph;
  for (const Vec& t : pts) {
    std::vector<double> cells;
    for (int a = 0; a < n; ++a) cells.push_back(t[a]);
    cells.push_back(field.value_at(t));

    Mat g = Mat::Constant(n, n, kNaN);
    try {
      g = metric_at(kind, field, t);
    } catch (const std::runtime_error&) {
    }
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) cells.push_back(g(i, j));

    if (role == PotentialRole::PotentialU) {
      double res = kNaN, defect = kNaN;
      try {
        res = affine_sphere_residual(field, t);
        defect = coincidence_defect(field, t);
      } catch (const std::runtime_error&) {
      }
      cells.push_back(res);
      cells.push_back(defect);
      Vec nu = Vec::Constant(n + 1, kNaN), mu = Vec::Constant(n + 1, kNaN);
      try {
        const ConormalSample cs = radial_conormals_at(field, t);
        nu = cs.nu;
        mu = cs.mu;
      } catch (const std::runtime_error&) {
      }
      for (int a = 0; a <= n; ++a) cells.push_back(nu[a]);
      for (int a = 0; a <= n; ++a) cells.push_back(mu[a]);
    } else {
      cells.push_back(graph_residual(field, t));
      Vec nu = Vec::Constant(n + 1, kNaN), mu = Vec::Constant(n + 1, kNaN);
      try {
        const ConormalSample cs = conormals_at(field, t);
        nu = cs.nu;
        mu = cs.mu;
      } catch (const std::runtime_error&) {
      }
      for (int a = 0; a <= n; ++a) cells.push_back(nu[a]);
      for (int a = 0; a <= n; ++a) cells.push_back(mu[a]);
      double cubic = kNaN, shape = kNaN;
      try {
        const InvariantsSample inv = fubini_pick_at(field, t);
        double ss = 0.0;
        for (const Mat& ak : inv.A) ss += ak.squaredNorm();
        cubic = std::sqrt(ss);
        shape = inv.B.norm();
      } catch (const std::runtime_error&) {
      }
      cells.push_back(cubic);
      cells.push_back(shape);
    }
    append_row(out, cells);
  }
  return out;
}

std::string sweep_csv(const StudyReport& report) {
  std::string header = "sweep,measured";
  if (report.kind == "gradient-estimate") header = "h,sup_q";
  else if (report.kind == "divergence") header = "k,length";
  else if (report.kind == "convergence") header = "nodes,max_error";
  else if (report.kind == "equivariance") header = "map_index,max_deviation";
  else if (report.kind == "legendre") header = "field_index,max_deviation";
  std::string out = header + "\n";
  const size_t rows = std::min(report.sweep.size(), report.measured.size());
  for (size_t i = 0; i < rows; ++i)
    append_row(out, {report.sweep[i], report.measured[i]});
  return out;
}

std::string solver_report_json(const SolverReport& report,
                               const std::string& config_json) {
  json j;
  j["version"] = kVersion;
  j["config"] = parse_config_object(config_json);
  json s;
  s["iterations"] = report.iterations;
  s["final_residual"] = report.final_residual;
  s["residual_history"] = report.residual_history;
  s["damping_events"] = report.damping_events;
  s["smoothing_stages"] = report.smoothing_stages;
  s["continuation_stages"] = report.continuation_stages;
  s["negativity_certified"] = report.negativity_certified;
  s["convexity_certified"] = report.convexity_certified;
  s["reference_error"] = report.reference_error;  // NaN serializes as null
  j["solver"] = s;
  return j.dump(2) + "\n";
}

std::string study_reports_json(const std::vector<StudyReport>& reports,
                               const std::string& config_json) {
  json j;
  j["version"] = kVersion;
  j["config"] = parse_config_object(config_json);
  json studies = json::array();
  bool all = true;
  for (const StudyReport& rep : reports) {
    studies.push_back(study_json(rep));
    all = all && rep.passed();
  }
  j["studies"] = studies;
  j["passed"] = all;
  return j.dump(2) + "\n";
}

std::string point_invariants_json(const PotentialField& field, const Vec& point,
                                  const std::string& config_json) {
  const PotentialRole role = field.role();
  if (role == PotentialRole::Scalar)
    throw precondition_error("io", "invariants need a potential-u or graph-f field");
  const int n = field.dim();
  if (point.size() != n) throw precondition_error("io", "point dimension mismatch");

  json j;
  j["version"] = kVersion;
  j["config"] = parse_config_object(config_json);
  json inv;
  inv["point"] = vec_json(point);
  inv["value"] = field.value_at(point);
  if (role == PotentialRole::PotentialU) {
    inv["metric"] = mat_json(metric_at(MetricKind::Centroaffine, field, point));
    inv["residual"] = affine_sphere_residual(field, point);
    inv["defect"] = coincidence_defect(field, point);
    const ConormalSample cs = radial_conormals_at(field, point);
    inv["nu"] = vec_json(cs.nu);
    inv["mu"] = vec_json(cs.mu);
  } else {
    inv["metric"] = mat_json(metric_at(MetricKind::AffineGraph, field, point));
    inv["residual"] = graph_residual(field, point);
    const ConormalSample cs = conormals_at(field, point);
    inv["nu"] = vec_json(cs.nu);
    inv["mu"] = vec_json(cs.mu);
    const InvariantsSample fp = fubini_pick_at(field, point);
    double ss = 0.0;
    for (const Mat& ak : fp.A) ss += ak.squaredNorm();
    inv["cubic_norm"] = std::sqrt(ss);
    inv["shape_norm"] = fp.B.norm();
  }
  j["invariants"] = inv;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("io", "cannot write '" + path + "'");
  out << text;
  if (!out) throw error("io", "write failed for '" + path + "'");
}

}  // namespace asphere
