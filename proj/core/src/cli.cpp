#include "asphere/cli.hpp"

#include "asphere/domain.hpp"
#include "asphere/grid.hpp"
#include "asphere/harness.hpp"
#include "asphere/invariants.hpp"
#include "asphere/io.hpp"
#include "asphere/legendre.hpp"
#include "asphere/potential.hpp"
#include "asphere/projective.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <sstream>
#include <utility>

namespace asphere {

namespace {

using nlohmann::json;

// Guards an output path against concurrent runs: <path>.lock is created
// exclusively for the duration of the write.
class LockFile {
 public:
  explicit LockFile(const std::string& path) : lock_path_(path + ".lock") {
    const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      if (errno == EEXIST)
        throw error("cli", "output path '" + path + "' is locked by a concurrent run ('" +
                               lock_path_ + "' exists)");
      throw error("cli", "cannot create lock file '" + lock_path_ + "': " +
                             std::strerror(errno));
    }
    ::close(fd);
  }
  ~LockFile() { ::unlink(lock_path_.c_str()); }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  std::string lock_path_;
};

void emit_file(const std::string& path, const std::string& text) {
  LockFile lock(path);
  write_text_file(path, text);
}

// Overlay config-file values (keys mirror the long flags) onto the defaults.
void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw precondition_error("cli", "cannot read config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw precondition_error("cli", "malformed config file '" + path + "': " + e.what());
  }
  if (!j.is_object())
    throw precondition_error("cli", "config file must hold a JSON object");

  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "domain") cfg.domain_spec = value.get<std::string>();
      else if (key == "grid") cfg.grid = value.get<int>();
      else if (key == "builtin") cfg.builtin = value.get<std::string>();
      else if (key == "potential-file") cfg.potential_file = value.get<std::string>();
      else if (key == "coefficients") cfg.coefficients = value.get<std::vector<double>>();
      else if (key == "n") cfg.dim = value.get<int>();
      else if (key == "h") cfg.heights = value.get<std::vector<double>>();
      else if (key == "suite") cfg.suite = value.get<std::string>();
      else if (key == "map") cfg.map_spec = value.get<std::string>();
      else if (key == "at") cfg.at_spec = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "quick") cfg.quick = value.get<bool>();
      else if (key == "out") cfg.out_path = value.get<std::string>();
      else if (key == "report") cfg.report_path = value.get<std::string>();
      else if (key == "tolerance") cfg.solver.tolerance = value.get<double>();
      else if (key == "max-newton") cfg.solver.max_newton = value.get<int>();
      else
        throw precondition_error("cli",
                                 "unknown key '" + key + "' in config file '" + path + "'");
    }
  } catch (const json::exception& e) {
    throw precondition_error("cli", "malformed config file '" + path + "': " + e.what());
  }
}

std::string resolved_config_json(const RunConfig& cfg) {
  json j;
  j["subcommand"] = cfg.subcommand;
  j["builtin"] = cfg.builtin;
  j["potential-file"] = cfg.potential_file;
  j["coefficients"] = cfg.coefficients;
  j["n"] = cfg.dim;
  j["domain"] = cfg.domain_spec;
  j["grid"] = cfg.grid;
  j["h"] = cfg.heights;
  j["suite"] = cfg.suite;
  j["map"] = cfg.map_spec;
  j["at"] = cfg.at_spec;
  j["seed"] = cfg.seed;
  j["quick"] = cfg.quick;
  j["out"] = cfg.out_path;
  j["report"] = cfg.report_path;
  j["solver"] = {{"tolerance", cfg.solver.tolerance},
                 {"max-newton", cfg.solver.max_newton},
                 {"max-halvings", cfg.solver.max_halvings},
                 {"linear-rel", cfg.solver.linear_rel}};
  return j.dump();
}

// Builtin / file potential when one is selected.
std::optional<PotentialField> selected_field(const RunConfig& cfg) {
  if (!cfg.potential_file.empty()) return load_potential_file(cfg.potential_file);
  if (!cfg.builtin.empty()) {
    std::optional<ConvexDomain> dom;
    if (!cfg.domain_spec.empty()) dom = parse_domain(cfg.domain_spec);
    return make_builtin(cfg.builtin, cfg.dim, cfg.coefficients, std::move(dom));
  }
  return std::nullopt;
}

std::pair<PotentialField, SolverReport> solve_domain(const RunConfig& cfg,
                                                     const std::string& fallback) {
  const ConvexDomain dom =
      parse_domain(cfg.domain_spec.empty() ? fallback : cfg.domain_spec);
  const GridSpec grid(dom, cfg.grid);
  return solve_affine_sphere(dom, grid, cfg.solver);
}

const char* mark(bool ok) { return ok ? "[PASS]" : "[FAIL]"; }

void print_study(std::ostream& out, const StudyReport& rep) {
  out << mark(rep.passed()) << " " << rep.kind;
  if (!rep.notes.empty()) out << " (" << rep.notes.front() << ")";
  out << "\n";
  for (const StudyCriterion& c : rep.criteria)
    out << "    " << mark(c.passed) << " " << c.name << " (value "
        << format_full(c.value) << ")\n";
  for (size_t i = 1; i < rep.notes.size(); ++i)
    out << "    note: " << rep.notes[i] << "\n";
}

StudyReport labeled(StudyReport rep, const std::string& label) {
  rep.notes.insert(rep.notes.begin(), label);
  return rep;
}

int run_solve(const RunConfig& cfg, std::ostream& out) {
  auto [u, rep] = solve_domain(cfg, "disk");
  const bool ok = rep.final_residual <= cfg.solver.tolerance &&
                  rep.negativity_certified && rep.convexity_certified;

  out << "solve: domain=" << u.domain().kind_name() << " n=" << u.dim()
      << " grid=" << cfg.grid << " iterations=" << rep.iterations
      << " residual=" << format_full(rep.final_residual)
      << " negativity=" << (rep.negativity_certified ? "yes" : "no")
      << " convexity=" << (rep.convexity_certified ? "yes" : "no");
  if (std::isfinite(rep.reference_error))
    out << " reference_error=" << format_full(rep.reference_error);
  out << "\n"
      << mark(ok) << " residual within tolerance and convexity/negativity certified\n";

  if (!cfg.out_path.empty()) emit_file(cfg.out_path, potential_csv(u));
  if (!cfg.report_path.empty())
    emit_file(cfg.report_path, solver_report_json(rep, resolved_config_json(cfg)));
  return ok ? 0 : 1;
}

int run_invariants(const RunConfig& cfg, std::ostream& out) {
  std::optional<PotentialField> field = selected_field(cfg);
  if (!field) field = solve_domain(cfg, "disk").first;

  if (!cfg.at_spec.empty()) {
    const std::string text =
        point_invariants_json(*field, parse_point(cfg.at_spec), resolved_config_json(cfg));
    out << text;
    if (!cfg.report_path.empty()) emit_file(cfg.report_path, text);
    return 0;
  }
  if (!cfg.report_path.empty())
    throw precondition_error(
        "cli", "invariants --report needs --at (use --out for the lattice CSV)");
  const std::string csv = invariants_csv(*field, std::min(cfg.grid, 65));
  if (!cfg.out_path.empty()) emit_file(cfg.out_path, csv);
  else out << csv;
  return 0;
}

int run_legendre(const RunConfig& cfg, std::ostream& out) {
  const std::optional<PotentialField> field = selected_field(cfg);
  if (!field)
    throw precondition_error("cli", "legendre needs --builtin or --potential-file");

  const StudyReport rep =
      legendre_suite({*field}, cfg.seed, cfg.quick ? 1000 : 10000);
  print_study(out, rep);

  if (!cfg.out_path.empty()) {
    const LegendrePair pair = legendre_transform(*field);
    emit_file(cfg.out_path, potential_csv(pair.dual()));
  }
  if (!cfg.report_path.empty())
    emit_file(cfg.report_path, study_reports_json({rep}, resolved_config_json(cfg)));
  return rep.passed() ? 0 : 1;
}

int run_transform(const RunConfig& cfg, std::ostream& out) {
  if (cfg.map_spec.empty()) throw precondition_error("cli", "transform needs --map");
  const ProjectiveMap map = parse_map(cfg.map_spec);
  const std::optional<PotentialField> field = selected_field(cfg);
  if (!field)
    throw precondition_error("cli", "transform needs --builtin or --potential-file");

  const PotentialField image = transform_potential(*field, map);
  int status = 0;
  std::vector<StudyReport> reports;

  if (!field->is_grid()) {
    const StudyReport rep = labeled(equivariance_suite(*field, {map}, cfg.seed),
                                    "chart map applied to the analytic potential");
    print_study(out, rep);
    reports.push_back(rep);
    status = rep.passed() ? 0 : 1;
  } else {
    // Grid fields carry O(spacing^2) interpolation error; deviations are
    // reported, not asserted.
    StudyReport rep;
    rep.kind = "transform";
    rep.seed = cfg.seed;
    rep.notes.push_back("grid field: deviations informational, no assertion");
    const ConvexDomain& dom = field->domain();
    const auto [blo, bhi] = dom.bounding_box();
    const double margin = 0.1 * dom.scale();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double dev = 0.0;
    int taken = 0;
    while (taken < 20) {
      Vec t(dom.dim());
      for (int a = 0; a < dom.dim(); ++a)
        t[a] = blo[a] + (bhi[a] - blo[a]) * unif(rng);
      if (!dom.contains(t, margin)) continue;
      const Vec s = map.apply(t);
      if (!image.domain().contains(s, 1e-9 * image.domain().scale())) continue;
      ++taken;
      dev = std::max(dev, std::abs(affine_sphere_residual(image, s) -
                                   affine_sphere_residual(*field, t)));
    }
    rep.fitted["max_residual_deviation"] = dev;
    print_study(out, rep);
    reports.push_back(rep);
  }

  if (!cfg.out_path.empty())
    emit_file(cfg.out_path, potential_csv(image, std::min(cfg.grid, 65)));
  if (!cfg.report_path.empty())
    emit_file(cfg.report_path, study_reports_json(reports, resolved_config_json(cfg)));
  return status;
}

int run_verify(const RunConfig& cfg, std::ostream& out) {
  const bool quick = cfg.quick;
  auto want = [&](const char* name) { return cfg.suite == "all" || cfg.suite == name; };
  std::vector<StudyReport> studies;

  if (want("gradient-estimate")) {
    double hmax = 0.0;
    for (double h : cfg.heights) hmax = std::max(hmax, h);
    const double radius = std::max(10.0, 1.5 * hmax);
    for (int n : {1, 2})
      for (double h : cfg.heights)
        studies.push_back(labeled(
            gradient_estimate_scan(builtin_hyperboloid(n, radius), h, quick ? 65 : 129),
            "hyperboloid n=" + std::to_string(n) + ", h=" + format_full(h)));
  }

  if (want("divergence")) {
    studies.push_back(labeled(
        divergence_study(builtin_hyperboloid(1, quick ? 2e3 : 2e5), vec1(1.0),
                         quick ? 3 : 5),
        "hyperboloid n=1, closed-form chart"));
    studies.push_back(labeled(
        divergence_study(builtin_hyperboloid(2, 2e3), vec2(1.0, 1.0), 3),
        "hyperboloid n=2, oblique ray"));
    {
      RunConfig sub = cfg;
      sub.grid = quick ? 129 : 257;
      sub.domain_spec = "interval";
      auto [u, rep] = solve_domain(sub, "interval");
      (void)rep;
      studies.push_back(
          labeled(divergence_study(u, vec1(1.0), 5), "solved interval potential"));
    }
    {
      RunConfig sub = cfg;
      sub.grid = quick ? 33 : 65;
      sub.domain_spec = "disk";
      auto [u, rep] = solve_domain(sub, "disk");
      (void)rep;
      studies.push_back(labeled(divergence_study(u, vec2(0.6, -0.8), quick ? 4 : 5),
                                "solved disk potential, oblique ray"));
    }
  }

  if (want("convergence")) {
    studies.push_back(labeled(
        convergence_order("interval", quick ? std::vector<int>{33, 65, 129}
                                            : std::vector<int>{65, 129, 257}),
        "interval Dirichlet problem"));
    studies.push_back(labeled(
        convergence_order("disk", quick ? std::vector<int>{17, 33, 65}
                                        : std::vector<int>{33, 65, 129}),
        "disk Dirichlet problem"));
    if (!quick)
      studies.push_back(labeled(convergence_order("ellipse", {17, 33, 65}),
                                "ellipse Dirichlet problem"));
  }

  if (want("equivariance")) {
    for (int n : {1, 2})
      studies.push_back(labeled(
          equivariance_suite(builtin_ball(n),
                             random_affine_maps(n, quick ? 5 : 10, cfg.seed + n),
                             cfg.seed),
          "analytic ball potential, n=" + std::to_string(n)));
  }

  if (want("legendre")) {
    studies.push_back(labeled(
        legendre_suite(legendre_test_fields(), cfg.seed, quick ? 400 : 2000),
        "five analytic convex graph fields"));
  }

  if (studies.empty())
    throw precondition_error("cli", "unknown verify suite '" + cfg.suite + "'");

  bool all = true;
  for (const StudyReport& rep : studies) {
    print_study(out, rep);
    all = all && rep.passed();
  }
  out << mark(all) << " verify: " << studies.size() << " studies\n";

  if (!cfg.out_path.empty())
    throw precondition_error("cli", "verify emits JSON reports; use --report");
  if (!cfg.report_path.empty())
    emit_file(cfg.report_path, study_reports_json(studies, resolved_config_json(cfg)));
  return all ? 0 : 1;
}

int run_perturb(const RunConfig& cfg, std::ostream& out) {
  auto [ubar, rep] = solve_domain(cfg, "disk");
  const ConvexDomain dom = ubar.domain();

  // Reference potential u = -1 + |t|^2/4, negative on the chart out to |t| = 2.
  const PotentialField u_quadratic = PotentialField::analytic(
      PotentialRole::PotentialU, dom, [](const Vec& t) { return -1.0 + 0.25 * t.squaredNorm(); },
      [](const Vec& t) { return Vec(0.5 * t); },
      [](const Vec& t) { return Mat(0.5 * Mat::Identity(t.size(), t.size())); });

  const PotentialField phi = perturbation_factor(u_quadratic, ubar);

  // Product field phi * u by the product rule; its equation residual must
  // come back at the level the solver certified for ubar.
  auto value = [phi, u_quadratic](const Vec& t) {
    return phi.value_at(t) * u_quadratic.value_at(t);
  };
  auto gradient = [phi, u_quadratic](const Vec& t) {
    return Vec(phi.value_at(t) * u_quadratic.gradient_at(t) +
               u_quadratic.value_at(t) * phi.gradient_at(t));
  };
  auto hessian = [phi, u_quadratic](const Vec& t) {
    const Vec gp = phi.gradient_at(t), gu = u_quadratic.gradient_at(t);
    return Mat(phi.value_at(t) * u_quadratic.hessian_at(t) +
               u_quadratic.value_at(t) * phi.hessian_at(t) +
               gp * gu.transpose() + gu * gp.transpose());
  };
  const PotentialField product = PotentialField::analytic(
      PotentialRole::PotentialU, dom, value, gradient, hessian);

  const GridSpec& grid = ubar.grid_spec();
  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = 0.0;
  double resid_max = 0.0;
  for (int flat : grid.interior()) {
    const Vec t = grid.node_point(flat);
    const double p = phi.value_at(t);
    phi_min = std::min(phi_min, p);
    phi_max = std::max(phi_max, p);
    resid_max = std::max(resid_max, std::abs(affine_sphere_residual(product, t)));
  }

  StudyReport study;
  study.kind = "perturbation";
  study.seed = cfg.seed;
  study.notes.push_back("factor u_bar / u against the quadratic reference");
  study.fitted["phi_min"] = phi_min;
  study.fitted["phi_max"] = phi_max;
  study.fitted["product_residual_max"] = resid_max;
  study.fitted["solver_residual"] = rep.final_residual;
  study.criteria.push_back({"factor positive at every node", phi_min > 0.0, phi_min});
  study.criteria.push_back(
      {"factor bounded", std::isfinite(phi_max) && phi_max > 0.0, phi_max});
  study.criteria.push_back({"product residual within solver residual + 1e-6",
                            resid_max <= rep.final_residual + 1e-6, resid_max});
  print_study(out, study);

  if (!cfg.out_path.empty())
    emit_file(cfg.out_path, potential_csv(phi, std::min(cfg.grid, 65)));
  if (!cfg.report_path.empty())
    emit_file(cfg.report_path, study_reports_json({study}, resolved_config_json(cfg)));
  return study.passed() ? 0 : 1;
}

}  // namespace

RunConfig parse_config(const std::vector<std::string>& args) {
  RunConfig cfg;

  // The config file provides defaults; explicit flags override below.
  std::string config_path;
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size())
        throw precondition_error("cli", "--config needs a file path");
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (!config_path.empty()) apply_config_file(cfg, config_path);

  CLI::App app{"hyperbolic affine-sphere potentials: solve, inspect, verify"};
  app.name("asphere");
  // --h is a real flag (sublevel heights); keep help on --help only.
  app.set_help_flag("--help", "display usage and exit");

  std::string config_dummy;
  app.add_option("subcommand", cfg.subcommand, "one of solve|invariants|legendre|transform|verify|perturb")
      ->required()
      ->check(CLI::IsMember(
          {"solve", "invariants", "legendre", "transform", "verify", "perturb"}));
  app.add_option("--config", config_dummy, "JSON config file mirroring the long flags");
  app.add_option("--domain", cfg.domain_spec,
                 "domain spec: interval[:lo,hi] disk[:cx,cy,r] ellipse:cx,cy,a,b,angle "
                 "square[:half] polygon:x1,y1,...");
  app.add_option("--grid", cfg.grid, "nodes per axis")->check(CLI::Range(5, 20000));
  app.add_option("--builtin", cfg.builtin,
                 "builtin potential: ball|quadratic|hyperboloid|polynomial");
  app.add_option("--potential-file", cfg.potential_file, "JSON potential spec path");
  app.add_option("--coeffs", cfg.coefficients, "builtin parameters (comma separated)")
      ->delimiter(',');
  app.add_option("--n", cfg.dim, "ambient dimension for builtins")
      ->check(CLI::IsMember({1, 2}));
  app.add_option("--map", cfg.map_spec, "4 or 9 comma-separated row-major entries");
  app.add_option("--at", cfg.at_spec, "evaluation point x[,y]");
  app.add_option("--h", cfg.heights, "sublevel heights (comma separated)")
      ->delimiter(',');
  app.add_option("--suite", cfg.suite, "verify suite")
      ->check(CLI::IsMember({"all", "gradient-estimate", "divergence", "convergence",
                             "equivariance", "legendre"}));
  app.add_option("--seed", cfg.seed, "random seed for sampled studies");
  app.add_flag("--quick", cfg.quick, "reduced resolutions for verify");
  app.add_option("--out", cfg.out_path, "CSV artifact path");
  app.add_option("--report", cfg.report_path, "JSON report path");
  app.add_option("--tol", cfg.solver.tolerance, "solver residual tolerance");
  app.add_option("--max-newton", cfg.solver.max_newton, "solver iteration cap");

  std::vector<const char*> argv;
  argv.push_back("asphere");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    cfg.help_text = app.help();
    return cfg;
  } catch (const CLI::ParseError& e) {
    throw precondition_error("cli", e.what());
  }

  const bool flag_builtin = app.count("--builtin") > 0;
  const bool flag_file = app.count("--potential-file") > 0;
  if (flag_builtin && flag_file)
    throw precondition_error("cli", "--builtin and --potential-file are mutually exclusive");
  if (flag_builtin) cfg.potential_file.clear();
  if (flag_file) cfg.builtin.clear();
  if (!cfg.builtin.empty() && !cfg.potential_file.empty())
    throw precondition_error(
        "cli", "config file selects both a builtin and a potential file");

  for (double h : cfg.heights)
    if (!(h > 0.0) || !std::isfinite(h))
      throw precondition_error("cli", "heights must be positive and finite");
  if (!(cfg.solver.tolerance > 0.0))
    throw precondition_error("cli", "solver tolerance must be positive");
  return cfg;
}

int run(const RunConfig& cfg, std::ostream& out) {
  if (!cfg.help_text.empty()) {
    out << cfg.help_text;
    return 0;
  }
  if (cfg.subcommand == "solve") return run_solve(cfg, out);
  if (cfg.subcommand == "invariants") return run_invariants(cfg, out);
  if (cfg.subcommand == "legendre") return run_legendre(cfg, out);
  if (cfg.subcommand == "transform") return run_transform(cfg, out);
  if (cfg.subcommand == "verify") return run_verify(cfg, out);
  if (cfg.subcommand == "perturb") return run_perturb(cfg, out);
  throw precondition_error("cli", "unknown subcommand '" + cfg.subcommand + "'");
}

int cli_main(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);

  RunConfig cfg;
  try {
    cfg = parse_config(args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }
  try {
    return run(cfg, std::cout);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace asphere
