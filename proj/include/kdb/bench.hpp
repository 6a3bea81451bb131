#pragma once

#include <kdb/kernels.hpp>
#include <kdb/pointset.hpp>
#include <kdb/samplets.hpp>
#include <kdb/types.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kdb::bench {

struct ExperimentConfig {
  std::string method = "footprint";  // compression study: footprint | samplet
  Index n = 1000;
  Index dim = 2;
  std::uint64_t seed = 1;
  KernelSpec kernel = KernelSpec::matern(0.5, 0.1);
  std::optional<double> lambda;  // absolute ridge; overrides lambda_factor * N
  double lambda_factor = 1e-6;
  std::vector<double> sweep;     // kappa values or thresholds
  double tol = 1e-9;
  Index max_iter = 5000;
  Index power_iters = 200;
  Index moments = 6;             // q + 1
  Index leaf_capacity = 0;       // 0: 2 * m_q
  // samplet factor fill-reducing ordering: nested-dissection | amd | natural
  std::string ordering = nested_dissection_available() ? "nested-dissection" : "amd";
  Index probe_resolution = 0;    // 0: default_probe_resolution
  std::vector<std::string> precond = {"none", "sqrt", "cholesky"};
  std::optional<std::filesystem::path> points;
  bool header = false;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> dat;
  std::optional<std::filesystem::path> export_dir;
  // reconstruction
  std::string shape = "circle";
  Index boundary_samples = 2000;
  Index offsurface_samples = 1000;
  Index grid = 200;
  double box_half_width = 1.5;

  double ridge(Index n_sites) const { return lambda ? *lambda : lambda_factor * static_cast<double>(n_sites); }
};

/// key = value lines, '#' comments. Unknown keys are an error.
ExperimentConfig parse_config(const std::filesystem::path& path);
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

struct ExperimentRecord {
  std::string method;
  Index n = 0;
  double nu = 0.0;
  double param = 0.0;
  double compression_rate = 0.0;
  double spectral_error = 0.0;
  Index iterations = -1;
  double assembly_ms = 0.0;
  double solve_ms = 0.0;
  double mean_footprint = 0.0;
  bool failed = false;
  std::string note;
};

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Sites from cfg.points if set, uniform random otherwise.
DataSiteSet make_sites(const ExperimentConfig& cfg);

std::vector<ExperimentRecord> run_compression_study(const ExperimentConfig& cfg);
std::vector<ExperimentRecord> run_preconditioner_study(const ExperimentConfig& cfg);

/// Error strictly decreasing along the sweep, per method: kappa ascending for
/// footprints, threshold descending for samplets. Failed points are skipped.
Check check_compression_monotone(const std::vector<ExperimentRecord>& records);
/// Iterations strictly decreasing in kappa per method; sqrt <= cholesky at equal kappa.
std::vector<Check> check_preconditioner_trends(const std::vector<ExperimentRecord>& records);

struct Segment {
  std::array<double, 2> a;
  std::array<double, 2> b;
};

struct ReconstructionResult {
  Index grid = 0;
  double lower = 0.0;        // grid spans [lower, upper]^2 in shape coordinates
  double upper = 0.0;
  Matrix values;             // grid x grid, values(ix, iy)
  std::vector<Segment> zero_set;
  double max_deviation = 0.0;  // max distance of zero-set vertices to the true curve
  double max_gap = 0.0;        // max distance of true-curve samples to the zero set
  double grid_spacing = 0.0;
  Index n_sites = 0;
  double mean_footprint = 0.0;
  Index iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/// Signed distance (negative inside) of a point to the built-in shape.
double shape_signed_distance(const std::string& shape, double x, double y);

/// Marching squares on values(ix, iy) sampled at xs[ix], ys[iy].
std::vector<Segment> marching_squares(const Matrix& values, const Vector& xs, const Vector& ys, double level = 0.0);

/// Fits the signed distance of a 2D shape with Cholesky-preconditioned CG,
/// evaluates it on a grid and extracts the zero level set. cfg.sweep[0] is
/// kappa (default 0.25).
ReconstructionResult reconstruct_implicit_curve(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader =
    "method,N,nu,param,compression_rate,spectral_error,iterations,assembly_ms,solve_ms";

void emit_csv(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path);
/// Whitespace-separated table for pgfplots/gnuplot.
void emit_dat(const std::vector<ExperimentRecord>& records, const std::filesystem::path& path);
std::vector<ExperimentRecord> read_csv(const std::filesystem::path& path);

}  // namespace kdb::bench
