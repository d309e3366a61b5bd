#pragma once

#include "asphere/domain.hpp"
#include "asphere/harness.hpp"
#include "asphere/potential.hpp"
#include "asphere/projective.hpp"
#include "asphere/solver.hpp"
#include "asphere/types.hpp"

#include <string>
#include <vector>

namespace asphere {

// --- Parsing -----------------------------------------------------------------

// Textual domain specs, a name with optional ':'-separated numeric parameters:
//   "interval"                  [-1, 1]
//   "interval:lo,hi"
//   "disk"                      unit disk
//   "disk:cx,cy,r"
//   "ellipse:cx,cy,a,b,angle"   semi-axes a (along angle) and b (across)
//   "square"                    half-width 1 about the origin
//   "square:half_width"
//   "polygon:x1,y1,x2,y2,..."   strictly convex vertex list (>= 3 vertices)
ConvexDomain parse_domain(const std::string& spec);

// Projective map from 4 (1-D) or 9 (2-D) comma-separated row-major entries of
// the homogeneous matrix, normalized to |det| = 1.
ProjectiveMap parse_map(const std::string& entries);

// Comma-separated point "x" or "x,y".
Vec parse_point(const std::string& spec);

// JSON potential spec:
//   {"builtin": "ball|quadratic|hyperboloid|polynomial",
//    "n": 1|2,                        // default 2
//    "coefficients": [c0, c1, ...],   // polynomial terms; hyperboloid [radius]
//    "domain": "spec"}                // optional domain override (see above)
PotentialField parse_potential_spec(const std::string& json_text);
PotentialField load_potential_file(const std::string& path);

// --- CSV artifacts (header row, LF line ends, 17 significant digits) ----------

// Field values: columns t1[,t2] (x1[,x2] for graph fields) plus u/f/value by
// role. Grid fields dump their interior nodes; analytic fields a
// samples_per_axis lattice over the domain interior.
std::string potential_csv(const PotentialField& field, int samples_per_axis = 65);

// Pointwise invariants over the same lattice. Cells that are undefined at a
// sample (tangent position vector, indefinite Hessian) are written as nan.
//   PotentialU: t,u,centroaffine metric,residual,defect,nu,mu
//   GraphF:     x,f,affine metric,residual,nu,mu,cubic_norm,shape_norm
std::string invariants_csv(const PotentialField& field, int samples_per_axis = 33);

// Study curve; column names follow the study kind.
std::string sweep_csv(const StudyReport& report);

// --- JSON reports --------------------------------------------------------------
// Full artifacts carrying {"version", "config", ...}; config_json must be a
// JSON object (the resolved run configuration) and is echoed verbatim.

std::string solver_report_json(const SolverReport& report,
                               const std::string& config_json = "{}");
std::string study_reports_json(const std::vector<StudyReport>& reports,
                               const std::string& config_json = "{}");
// Single-point invariants record (metric, residual/defect, conormals).
std::string point_invariants_json(const PotentialField& field, const Vec& point,
                                  const std::string& config_json = "{}");

void write_text_file(const std::string& path, const std::string& text);

}  // namespace asphere
