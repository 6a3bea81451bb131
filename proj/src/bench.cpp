#include <kdb/bases.hpp>
#include <kdb/bench.hpp>
#include <kdb/error.hpp>
#include <kdb/lagrange.hpp>
#include <kdb/linalg.hpp>
#include <kdb/precond.hpp>
#include <kdb/samplets.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace kdb::bench {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  }
}

Index parse_index(const std::string& key, const std::string& value) {
  const double v = parse_double(key, value);
  if (v != std::floor(v)) throw ConfigError("config: '" + key + "' expects an integer, got '" + value + "'");
  return static_cast<Index>(v);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError("config: '" + key + "' expects a boolean, got '" + value + "'");
}

}  // namespace

void apply_setting(ExperimentConfig& cfg, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  if (key == "method") {
    if (value != "footprint" && value != "samplet") throw ConfigError("config: method must be footprint or samplet");
    cfg.method = value;
  } else if (key == "n") {
    cfg.n = parse_index(key, value);
  } else if (key == "dim" || key == "d") {
    cfg.dim = parse_index(key, value);
  } else if (key == "seed") {
    cfg.seed = static_cast<std::uint64_t>(parse_index(key, value));
  } else if (key == "kernel") {
    cfg.kernel = KernelSpec::parse(value);
  } else if (key == "lambda") {
    cfg.lambda = parse_double(key, value);
  } else if (key == "lambda_factor") {
    cfg.lambda_factor = parse_double(key, value);
  } else if (key == "sweep" || key == "kappa" || key == "threshold") {
    cfg.sweep.clear();
    for (const auto& item : split_list(value)) cfg.sweep.push_back(parse_double(key, item));
  } else if (key == "tol") {
    cfg.tol = parse_double(key, value);
  } else if (key == "max_iter") {
    cfg.max_iter = parse_index(key, value);
  } else if (key == "power_iters") {
    cfg.power_iters = parse_index(key, value);
  } else if (key == "moments") {
    cfg.moments = parse_index(key, value);
  } else if (key == "leaf_capacity") {
    cfg.leaf_capacity = parse_index(key, value);
  } else if (key == "ordering") {
    if (value != "nested-dissection" && value != "amd" && value != "natural") {
      throw ConfigError("config: ordering must be nested-dissection, amd or natural");
    }
    cfg.ordering = value;
  } else if (key == "probe_resolution") {
    cfg.probe_resolution = parse_index(key, value);
  } else if (key == "precond") {
    cfg.precond = split_list(value);
    for (const auto& p : cfg.precond) {
      if (p != "none" && p != "sqrt" && p != "cholesky" && p != "lagrange-gmres") {
        throw ConfigError("config: unknown preconditioner '" + p + "'");
      }
    }
  } else if (key == "points") {
    cfg.points = value;
  } else if (key == "header") {
    cfg.header = parse_bool(key, value);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "dat") {
    cfg.dat = value;
  } else if (key == "export_mtx" || key == "export_dir") {
    cfg.export_dir = value;
  } else if (key == "shape") {
    if (value != "circle" && value != "star") throw ConfigError("config: shape must be circle or star");
    cfg.shape = value;
  } else if (key == "boundary_samples") {
    cfg.boundary_samples = parse_index(key, value);
  } else if (key == "offsurface_samples") {
    cfg.offsurface_samples = parse_index(key, value);
  } else if (key == "grid") {
    cfg.grid = parse_index(key, value);
  } else if (key == "box_half_width") {
    cfg.box_half_width = parse_double(key, value);
  } else {
    throw ConfigError("config: unknown key '" + raw_key + "'");
  }
  if (cfg.n < 1 || cfg.dim < 1 || cfg.power_iters < 1 || cfg.moments < 1 || cfg.max_iter < 1 || !(cfg.tol > 0.0)) {
    throw ConfigError("config: '" + raw_key + "' must be positive");
  }
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

DataSiteSet make_sites(const ExperimentConfig& cfg) {
  if (!cfg.points) return generate_uniform(cfg.n, cfg.dim, cfg.seed);
  const auto ext = cfg.points->extension();
  Matrix pts = (ext == ".bin" || ext == ".kdb") ? read_points_binary(*cfg.points) : read_points_csv(*cfg.points, cfg.header);
  Box box = Box::unit(pts.rows());
  bool inside = true;
  for (Index i = 0; i < pts.cols(); ++i) inside = inside && box.contains(pts.col(i));
  if (!inside) box = Box::bounding(pts);
  return DataSiteSet(std::move(pts), std::move(box));
}

namespace {

GeometrySummary summarize(const DataSiteSet& sites, const ExperimentConfig& cfg) {
  const Index res = cfg.probe_resolution > 0 ? cfg.probe_resolution : default_probe_resolution(sites.size(), sites.dim());
  return geometry_summary(sites, res);
}

double spectral_error(const Matrix& a, const LinearOperator& apply_b, const LinearOperator& apply_bt, Index iters) {
  const LinearOperator e = [&](const Vector& x) -> Vector { return a * apply_b(x) - x; };
  const LinearOperator et = [&](const Vector& y) -> Vector { return apply_bt(a * y) - y; };
  return power_iteration_spectral_error(e, et, a.rows(), iters);
}

void maybe_export(const ExperimentConfig& cfg, const std::string& stem, const SparseMatrix& s) {
  if (!cfg.export_dir) return;
  std::filesystem::create_directories(*cfg.export_dir);
  write_matrix_market(*cfg.export_dir / (stem + ".mtx"), s);
}

FillOrdering fill_ordering(const std::string& name) {
  if (name == "amd") return FillOrdering::amd;
  if (name == "natural") return FillOrdering::natural;
  return FillOrdering::nested_dissection;
}

std::string param_tag(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

std::vector<ExperimentRecord> run_compression_study(const ExperimentConfig& cfg) {
  const DataSiteSet sites = make_sites(cfg);
  const Index n = sites.size();
  const double lambda = cfg.ridge(n);
  if (n > 20000) throw InvalidArgument("compression study is desk scale (dense assembly); N must be <= 20000");
  auto t0 = Clock::now();
  const KernelMatrix a = assemble(cfg.kernel, sites, lambda);
  const double assemble_ms = ms_since(t0);
  std::vector<ExperimentRecord> records;

  auto base_record = [&](double param) {
    ExperimentRecord r;
    r.method = cfg.method;
    r.n = n;
    r.nu = cfg.kernel.nu;
    r.param = param;
    return r;
  };

  if (cfg.method == "footprint") {
    const GeometrySummary summary = summarize(sites, cfg);
    std::vector<double> kappas = cfg.sweep;
    if (kappas.empty()) kappas = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0};
    const FootprintMatrices local(a);
    for (double kappa : kappas) {
      ExperimentRecord r = base_record(kappa);
      try {
        t0 = Clock::now();
        const auto fps = footprints(sites, summary, kappa);
        LocalizedBasis b = localized_lagrange(local, fps);
        r.assembly_ms = assemble_ms + ms_since(t0);
        r.mean_footprint = mean_footprint_size(fps);
        r.compression_rate = compression_rate(b.coefficients);
        t0 = Clock::now();
        const SparseMatrix& bm = b.coefficients;
        r.spectral_error = spectral_error(
            a.entries, [&](const Vector& x) -> Vector { return bm * x; },
            [&](const Vector& y) -> Vector { return bm.transpose() * y; }, cfg.power_iters);
        r.solve_ms = ms_since(t0);
        maybe_export(cfg, "B_kappa" + param_tag(kappa), bm);
      } catch (const Error& e) {
        r.failed = true;
        r.note = e.what();
        r.spectral_error = std::numeric_limits<double>::quiet_NaN();
      }
      records.push_back(std::move(r));
    }
  } else {
    const Index q = cfg.moments - 1;
    const Index mq = moment_count(q, sites.dim());
    const Index leaf = cfg.leaf_capacity > 0 ? cfg.leaf_capacity : 2 * mq;
    t0 = Clock::now();
    const SampletTransform t = build_transform(build_cluster_tree(sites, leaf), sites, q);
    Matrix a_sigma = samplet_matrix(t, a.entries);
    a_sigma = (0.5 * (a_sigma + a_sigma.transpose())).eval();
    const double transform_ms = ms_since(t0);
    if (cfg.export_dir) {
      std::filesystem::create_directories(*cfg.export_dir);
      t.write_level_map(*cfg.export_dir / "level_map.csv");
    }
    std::vector<double> thresholds = cfg.sweep;
    if (thresholds.empty()) thresholds = {1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5};
    for (double threshold : thresholds) {
      ExperimentRecord r = base_record(threshold);
      try {
        t0 = Clock::now();
        const CompressedKernelMatrix c = threshold_samplet_matrix(a_sigma, lambda, threshold);
        const SampletSolver solver(t, c, fill_ordering(cfg.ordering));
        r.assembly_ms = assemble_ms + transform_ms + ms_since(t0);
        r.compression_rate = solver.factor_compression_rate();
        r.note = "matrix_rate=" + std::to_string(c.compression_rate());
        t0 = Clock::now();
        const LinearOperator b = [&](const Vector& x) -> Vector { return solver.solve(x); };
        r.spectral_error = spectral_error(a.entries, b, b, cfg.power_iters);
        r.solve_ms = ms_since(t0);
        maybe_export(cfg, "S_threshold" + param_tag(threshold), c.s);
      } catch (const Error& e) {
        r.failed = true;
        r.note = e.what();
        r.spectral_error = std::numeric_limits<double>::quiet_NaN();
      }
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<ExperimentRecord> run_preconditioner_study(const ExperimentConfig& cfg) {
  const DataSiteSet sites = make_sites(cfg);
  const Index n = sites.size();
  const double lambda = cfg.ridge(n);
  const GeometrySummary summary = summarize(sites, cfg);
  auto t0 = Clock::now();
  const KernelMatrix a = assemble(cfg.kernel, sites, lambda);
  const double assemble_ms = ms_since(t0);
  const LinearOperator apply_a = [&](const Vector& x) -> Vector {
    return a.entries.selfadjointView<Eigen::Lower>() * x;
  };
  const Vector rhs = Vector::Ones(n);
  const FootprintMatrices local(a);

  std::vector<ExperimentRecord> records;
  auto record = [&](const std::string& method, double kappa, const SolveReport& rep) {
    ExperimentRecord r;
    r.method = method;
    r.n = n;
    r.nu = cfg.kernel.nu;
    r.param = kappa;
    r.iterations = rep.iterations;
    // No spectral error is estimated here; the column carries the final
    // relative residual of the solve.
    r.spectral_error = rep.final_relative_residual;
    r.solve_ms = std::chrono::duration<double, std::milli>(rep.wall_time).count();
    if (!rep.converged) {
      r.failed = true;
      r.note = "not converged";
    }
    return r;
  };

  const bool want = [&] {
    return std::find(cfg.precond.begin(), cfg.precond.end(), "none") != cfg.precond.end();
  }();
  if (want) {
    auto r = record("pcg-none", 0.0, pcg(apply_a, rhs, nullptr, cfg.tol, cfg.max_iter).report);
    r.assembly_ms = assemble_ms;
    r.compression_rate = 0.0;
    records.push_back(std::move(r));
  }

  std::vector<double> kappas = cfg.sweep;
  if (kappas.empty()) kappas = {0.5, 1.0, 1.5, 2.0};
  for (double kappa : kappas) {
    const auto fps = footprints(sites, summary, kappa);
    const double mean = mean_footprint_size(fps);
    for (const auto& variant : cfg.precond) {
      if (variant == "none") continue;
      t0 = Clock::now();
      try {
        if (variant == "lagrange-gmres") {
          const LocalizedBasis b = localized_lagrange(local, fps);
          const double build_ms = ms_since(t0);
          const SparseMatrix& bm = b.coefficients;
          const auto res = gmres(apply_a, rhs, [&](const Vector& x) -> Vector { return bm * x; }, cfg.tol,
                                 std::min<Index>(cfg.max_iter, 1000));
          auto r = record("gmres-lagrange", kappa, res.report);
          r.assembly_ms = assemble_ms + build_ms;
          r.compression_rate = compression_rate(bm);
          r.mean_footprint = mean;
          records.push_back(std::move(r));
          continue;
        }
        const SymmetricPreconditioner p = variant == "sqrt" ? build_sqrt_preconditioner(local, fps)
                                                            : build_cholesky_preconditioner(local, fps);
        const double build_ms = ms_since(t0);
        const auto res = pcg(apply_a, rhs, p.as_operator(), cfg.tol, cfg.max_iter);
        auto r = record("pcg-" + variant, kappa, res.report);
        r.assembly_ms = assemble_ms + build_ms;
        r.compression_rate = compression_rate(p.factor);
        r.mean_footprint = mean;
        maybe_export(cfg, "C_" + variant + "_kappa" + param_tag(kappa), p.factor);
        records.push_back(std::move(r));
      } catch (const Error& e) {
        ExperimentRecord r;
        r.method = variant == "lagrange-gmres" ? "gmres-lagrange" : "pcg-" + variant;
        r.n = n;
        r.nu = cfg.kernel.nu;
        r.param = kappa;
        r.failed = true;
        r.note = e.what();
        r.spectral_error = std::numeric_limits<double>::quiet_NaN();
        r.mean_footprint = mean;
        records.push_back(std::move(r));
      }
    }
  }
  return records;
}

Check check_compression_monotone(const std::vector<ExperimentRecord>& records) {
  Check check{"error decreases along the sweep", true, ""};
  std::map<std::string, std::vector<const ExperimentRecord*>> by_method;
  for (const auto& r : records) {
    if (!r.failed) by_method[r.method].push_back(&r);
  }
  for (auto& [method, rs] : by_method) {
    // Order by the sweep parameter from coarse to fine: kappa ascending for
    // footprints, threshold descending for samplets. The fill of the samplet
    // factor is not monotone in the threshold, so the rate is not used here.
    const bool descending = method == "samplet";
    std::sort(rs.begin(), rs.end(), [descending](auto* a, auto* b) {
      return descending ? a->param > b->param : a->param < b->param;
    });
    for (std::size_t k = 1; k < rs.size(); ++k) {
      if (!(rs[k]->spectral_error < rs[k - 1]->spectral_error)) {
        check.passed = false;
        check.detail += method + ": param " + param_tag(rs[k]->param) + " error " +
                        std::to_string(rs[k]->spectral_error) + " >= " + std::to_string(rs[k - 1]->spectral_error) + "; ";
      }
    }
  }
  return check;
}

std::vector<Check> check_preconditioner_trends(const std::vector<ExperimentRecord>& records) {
  std::vector<Check> checks;
  std::map<std::string, std::vector<const ExperimentRecord*>> by_method;
  for (const auto& r : records) {
    if (r.method != "pcg-none") by_method[r.method].push_back(&r);
  }
  for (auto& [method, rs] : by_method) {
    Check c{method + ": iterations strictly decrease in kappa", true, ""};
    std::sort(rs.begin(), rs.end(), [](auto* a, auto* b) { return a->param < b->param; });
    for (std::size_t k = 0; k < rs.size(); ++k) {
      if (rs[k]->failed) {
        c.passed = false;
        c.detail += "kappa " + std::to_string(rs[k]->param) + " failed; ";
      } else if (k > 0 && !(rs[k]->iterations < rs[k - 1]->iterations)) {
        c.passed = false;
        c.detail += "kappa " + std::to_string(rs[k]->param) + ": " + std::to_string(rs[k]->iterations) +
                    " >= " + std::to_string(rs[k - 1]->iterations) + "; ";
      }
    }
    checks.push_back(std::move(c));
  }
  if (by_method.count("pcg-sqrt") && by_method.count("pcg-cholesky")) {
    Check c{"sqrt iterations <= cholesky iterations at equal kappa", true, ""};
    for (const auto* s : by_method["pcg-sqrt"]) {
      for (const auto* ch : by_method["pcg-cholesky"]) {
        if (s->param == ch->param && !(s->iterations <= ch->iterations)) {
          c.passed = false;
          c.detail += "kappa " + std::to_string(s->param) + ": " + std::to_string(s->iterations) + " > " +
                      std::to_string(ch->iterations) + "; ";
        }
      }
    }
    checks.push_back(std::move(c));
  }
  return checks;
}

// --- reconstruction ---------------------------------------------------------

namespace {

constexpr double kStarAmplitude = 0.25;
constexpr int kStarArms = 5;

double star_radius(double theta) { return 1.0 + kStarAmplitude * std::cos(kStarArms * theta); }

std::array<double, 2> curve_point(const std::string& shape, double theta) {
  const double r = shape == "circle" ? 1.0 : star_radius(theta);
  return {r * std::cos(theta), r * std::sin(theta)};
}

const std::vector<std::array<double, 2>>& star_polyline() {
  static const std::vector<std::array<double, 2>> poly = [] {
    constexpr int m = 20000;
    std::vector<std::array<double, 2>> p(m);
    for (int k = 0; k < m; ++k) p[static_cast<std::size_t>(k)] = curve_point("star", 2.0 * std::numbers::pi * k / m);
    return p;
  }();
  return poly;
}

double segment_distance(double px, double py, const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (a[0] + t * dx), py - (a[1] + t * dy));
}

}  // namespace

double shape_signed_distance(const std::string& shape, double x, double y) {
  if (shape == "circle") return std::hypot(x, y) - 1.0;
  if (shape != "star") throw ConfigError("unknown shape '" + shape + "'");
  const auto& poly = star_polyline();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < poly.size(); ++k) {
    best = std::min(best, segment_distance(x, y, poly[k], poly[(k + 1) % poly.size()]));
  }
  const bool inside = std::hypot(x, y) < star_radius(std::atan2(y, x));
  return inside ? -best : best;
}

std::vector<Segment> marching_squares(const Matrix& values, const Vector& xs, const Vector& ys, double level) {
  std::vector<Segment> out;
  auto lerp = [&](double xa, double ya, double va, double xb, double yb, double vb) -> std::array<double, 2> {
    const double t = (level - va) / (vb - va);
    return {xa + t * (xb - xa), ya + t * (yb - ya)};
  };
  for (Index i = 0; i + 1 < values.rows(); ++i) {
    for (Index j = 0; j + 1 < values.cols(); ++j) {
      // Corners counter-clockwise from (i, j).
      const double v0 = values(i, j), v1 = values(i + 1, j), v2 = values(i + 1, j + 1), v3 = values(i, j + 1);
      const double x0 = xs(i), x1 = xs(i + 1), y0 = ys(j), y1 = ys(j + 1);
      const int mask = (v0 > level ? 1 : 0) | (v1 > level ? 2 : 0) | (v2 > level ? 4 : 0) | (v3 > level ? 8 : 0);
      if (mask == 0 || mask == 15) continue;
      // Edge crossings: e0 bottom (0-1), e1 right (1-2), e2 top (2-3), e3 left (3-0).
      auto edge = [&](int e) {
        switch (e) {
          case 0: return lerp(x0, y0, v0, x1, y0, v1);
          case 1: return lerp(x1, y0, v1, x1, y1, v2);
          case 2: return lerp(x1, y1, v2, x0, y1, v3);
          default: return lerp(x0, y1, v3, x0, y0, v0);
        }
      };
      auto crosses = [&](int e) {
        const int a = e, b = (e + 1) % 4;
        return ((mask >> a) & 1) != ((mask >> b) & 1);
      };
      std::vector<int> edges;
      for (int e = 0; e < 4; ++e) {
        if (crosses(e)) edges.push_back(e);
      }
      if (edges.size() == 2) {
        out.push_back({edge(edges[0]), edge(edges[1])});
      } else {
        // Saddle: decide the connection from the cell-center average.
        const bool center_above = 0.25 * (v0 + v1 + v2 + v3) > level;
        const bool corner0_above = (mask & 1) != 0;
        if (center_above == corner0_above) {
          out.push_back({edge(0), edge(1)});
          out.push_back({edge(2), edge(3)});
        } else {
          out.push_back({edge(3), edge(0)});
          out.push_back({edge(1), edge(2)});
        }
      }
    }
  }
  return out;
}

ReconstructionResult reconstruct_implicit_curve(const ExperimentConfig& cfg) {
  if (cfg.offsurface_samples < 1) {
    throw ConfigError("reconstruction needs off-surface samples: a signed distance fit needs both signs");
  }
  if (cfg.boundary_samples < 3) throw ConfigError("reconstruction needs at least three boundary samples");
  if (cfg.grid < 2) throw ConfigError("grid must have at least two points per axis");
  const double w = cfg.box_half_width;
  const double scale = 2.0 * w;  // shape coordinates -> unit box
  const Index nb = cfg.boundary_samples;
  const Index n = nb + cfg.offsurface_samples;

  Matrix pts(2, n);
  Vector values(n);
  for (Index k = 0; k < nb; ++k) {
    const auto p = curve_point(cfg.shape, 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(nb));
    pts(0, k) = p[0];
    pts(1, k) = p[1];
    values(k) = 0.0;
  }
  std::mt19937_64 gen(cfg.seed);
  for (Index k = nb; k < n; ++k) {
    pts(0, k) = -w + scale * static_cast<double>(gen() >> 11) * 0x1.0p-53;
    pts(1, k) = -w + scale * static_cast<double>(gen() >> 11) * 0x1.0p-53;
    values(k) = shape_signed_distance(cfg.shape, pts(0, k), pts(1, k)) / scale;
  }
  if (!(values.minCoeff() < 0.0 && values.maxCoeff() > 0.0)) {
    throw ConfigError("signed distance samples must contain both signs");
  }
  Matrix unit = (pts.array() + w) / scale;
  const DataSiteSet sites(std::move(unit), Box::unit(2));

  ExperimentConfig local_cfg = cfg;
  const GeometrySummary summary = summarize(sites, local_cfg);
  const double lambda = cfg.ridge(n);
  const KernelMatrix a = assemble(cfg.kernel, sites, lambda);
  const double kappa = cfg.sweep.empty() ? 0.25 : cfg.sweep.front();
  const auto fps = footprints(sites, summary, kappa);
  const SymmetricPreconditioner p = build_cholesky_preconditioner(FootprintMatrices(a), fps);
  const LinearOperator apply_a = [&](const Vector& x) -> Vector {
    return a.entries.selfadjointView<Eigen::Lower>() * x;
  };
  const SolveResult fit = pcg(apply_a, values, p.as_operator(), cfg.tol, cfg.max_iter);

  ReconstructionResult result;
  result.n_sites = n;
  result.mean_footprint = mean_footprint_size(fps);
  result.iterations = fit.report.iterations;
  result.relative_residual = fit.report.final_relative_residual;
  result.converged = fit.report.converged;
  result.grid = cfg.grid;
  result.lower = -w;
  result.upper = w;
  result.grid_spacing = scale / static_cast<double>(cfg.grid - 1);

  Vector axis(cfg.grid);
  for (Index k = 0; k < cfg.grid; ++k) axis(k) = -w + result.grid_spacing * static_cast<double>(k);
  Matrix queries(2, cfg.grid * cfg.grid);
  for (Index iy = 0; iy < cfg.grid; ++iy) {
    for (Index ix = 0; ix < cfg.grid; ++ix) {
      queries(0, iy * cfg.grid + ix) = (axis(ix) + w) / scale;
      queries(1, iy * cfg.grid + ix) = (axis(iy) + w) / scale;
    }
  }
  const Vector grid_values = evaluate_expansion(fit.solution, cfg.kernel, sites, queries);
  result.values.resize(cfg.grid, cfg.grid);
  for (Index iy = 0; iy < cfg.grid; ++iy) {
    for (Index ix = 0; ix < cfg.grid; ++ix) result.values(ix, iy) = grid_values(iy * cfg.grid + ix) * scale;
  }
  result.zero_set = marching_squares(result.values, axis, axis, 0.0);

  for (const auto& s : result.zero_set) {
    for (const auto& v : {s.a, s.b}) {
      result.max_deviation = std::max(result.max_deviation, std::abs(shape_signed_distance(cfg.shape, v[0], v[1])));
    }
  }
  if (result.zero_set.empty()) {
    result.max_deviation = std::numeric_limits<double>::infinity();
    result.max_gap = std::numeric_limits<double>::infinity();
  } else {
    constexpr int probes = 720;
    for (int k = 0; k < probes; ++k) {
      const auto c = curve_point(cfg.shape, 2.0 * std::numbers::pi * k / probes);
      double best = std::numeric_limits<double>::infinity();
      for (const auto& s : result.zero_set) best = std::min(best, segment_distance(c[0], c[1], s.a, s.b));
      result.max_gap = std::max(result.max_gap, best);
    }
  }
  return result;
}

// --- emission ---------------------------------------------------------------

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream out;
  out.precision(12);
  out << v;
  return out.str();
}

}  // namespace

void emit_csv(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.method << ',' << r.n << ',' << fmt(r.nu) << ',' << fmt(r.param) << ',' << fmt(r.compression_rate) << ','
        << fmt(r.failed ? std::numeric_limits<double>::quiet_NaN() : r.spectral_error) << ',' << r.iterations << ','
        << fmt(r.assembly_ms) << ',' << fmt(r.solve_ms) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void emit_dat(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "method param comprate error iterations meanfootprint\n";
  for (const auto& r : records) {
    out << r.method << ' ' << fmt(r.param) << ' ' << fmt(r.compression_rate) << ' '
        << fmt(r.failed ? std::numeric_limits<double>::quiet_NaN() : r.spectral_error) << ' ' << r.iterations << ' '
        << fmt(r.mean_footprint) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<ExperimentRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) throw IoError(path.string() + ": unexpected header");
  std::vector<ExperimentRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ',')) f.push_back(item);
    if (f.size() != 9) throw IoError(path.string() + ": expected 9 fields");
    ExperimentRecord r;
    r.method = f[0];
    r.n = std::stoll(f[1]);
    r.nu = std::stod(f[2]);
    r.param = std::stod(f[3]);
    r.compression_rate = std::stod(f[4]);
    r.spectral_error = std::stod(f[5]);
    r.failed = std::isnan(r.spectral_error);
    r.iterations = std::stoll(f[6]);
    r.assembly_ms = std::stod(f[7]);
    r.solve_ms = std::stod(f[8]);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace kdb::bench
