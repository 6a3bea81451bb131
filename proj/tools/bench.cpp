// bench: compression and preconditioner studies, implicit curve reconstruction.
#include <kdb/bench.hpp>
#include <kdb/error.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

namespace {

using kdb::bench::ExperimentConfig;

const char* const kSettingKeys[] = {
    "method",    "n",      "dim",        "seed",       "kernel",          "lambda",
    "lambda-factor", "kappa", "threshold", "tol",      "max-iter",        "power-iters",
    "moments",   "leaf-capacity", "ordering", "probe-resolution", "precond", "points", "header",
    "out",       "dat",    "export-mtx", "shape",      "boundary-samples", "offsurface-samples",
    "grid",      "box-half-width",
};

struct Options {
  std::string config;
  std::map<std::string, std::string> settings;
};

void add_settings(CLI::App* app, Options& opts) {
  app->add_option("--config", opts.config, "key = value configuration file");
  for (const char* key : kSettingKeys) {
    app->add_option(std::string("--") + key, opts.settings[key], std::string("override '") + key + "'");
  }
}

ExperimentConfig resolve(CLI::App* app, const Options& opts) {
  ExperimentConfig cfg = opts.config.empty() ? ExperimentConfig{} : kdb::bench::parse_config(opts.config);
  for (const auto& [key, value] : opts.settings) {
    if (app->count("--" + key) > 0) kdb::bench::apply_setting(cfg, key, value);
  }
  return cfg;
}

void print_records(const std::vector<kdb::bench::ExperimentRecord>& records) {
  std::cout << std::left << std::setw(16) << "method" << std::setw(10) << "param" << std::setw(14) << "rate"
            << std::setw(14) << "error" << std::setw(8) << "iters" << std::setw(10) << "footprint"
            << "ms\n";
  for (const auto& r : records) {
    std::cout << std::left << std::setw(16) << r.method << std::setw(10) << r.param << std::setw(14)
              << r.compression_rate << std::setw(14) << r.spectral_error << std::setw(8) << r.iterations
              << std::setw(10) << r.mean_footprint << r.assembly_ms + r.solve_ms;
    if (!r.note.empty()) std::cout << "  [" << (r.failed ? "failed: " : "") << r.note << "]";
    std::cout << '\n';
  }
}

bool report(const std::vector<kdb::bench::Check>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << '\n';
    ok = ok && c.passed;
  }
  return ok;
}

void write_outputs(const ExperimentConfig& cfg, const std::vector<kdb::bench::ExperimentRecord>& records) {
  if (cfg.out) kdb::bench::emit_csv(records, *cfg.out);
  if (cfg.dat) kdb::bench::emit_dat(records, *cfg.dat);
}

int run_reconstruction(const ExperimentConfig& cfg) {
  const auto r = kdb::bench::reconstruct_implicit_curve(cfg);
  std::cout << "sites " << r.n_sites << ", mean footprint " << r.mean_footprint << ", pcg iterations "
            << r.iterations << ", relative residual " << r.relative_residual << '\n';
  std::cout << "zero set: " << r.zero_set.size() << " segments, max deviation " << r.max_deviation
            << ", max gap " << r.max_gap << ", grid spacing " << r.grid_spacing << '\n';
  if (cfg.out) {
    std::ofstream out(*cfg.out);
    if (!out) throw kdb::IoError("cannot open " + cfg.out->string());
    out << "x0,y0,x1,y1\n";
    out.precision(12);
    for (const auto& s : r.zero_set) out << s.a[0] << ',' << s.a[1] << ',' << s.b[0] << ',' << s.b[1] << '\n';
  }
  if (cfg.dat) {
    std::ofstream out(*cfg.dat);
    if (!out) throw kdb::IoError("cannot open " + cfg.dat->string());
    const double step = r.grid_spacing;
    for (kdb::Index iy = 0; iy < r.grid; ++iy) {
      for (kdb::Index ix = 0; ix < r.grid; ++ix) {
        out << r.lower + step * static_cast<double>(ix) << ' ' << r.lower + step * static_cast<double>(iy) << ' '
            << r.values(ix, iy) << '\n';
      }
      out << '\n';
    }
  }
  const bool ok = r.converged && r.max_deviation <= 2.0 * r.grid_spacing && r.max_gap <= 2.0 * r.grid_spacing;
  std::cout << (ok ? "PASS" : "FAIL") << " zero level set within two grid cells and solver converged\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-basis benchmarks for kernel approximation"};
  app.require_subcommand(1);
  Options compression_opts, precond_opts, reconstruct_opts;
  auto* compression = app.add_subcommand("compression", "error vs compression rate (footprint | samplet)");
  auto* precond = app.add_subcommand("precond", "PCG iterations vs footprint parameter");
  auto* reconstruct = app.add_subcommand("reconstruct", "implicit curve from signed distance samples");
  add_settings(compression, compression_opts);
  add_settings(precond, precond_opts);
  add_settings(reconstruct, reconstruct_opts);
  CLI11_PARSE(app, argc, argv);

  try {
    if (compression->parsed()) {
      const auto cfg = resolve(compression, compression_opts);
      const auto records = kdb::bench::run_compression_study(cfg);
      print_records(records);
      write_outputs(cfg, records);
      return report({kdb::bench::check_compression_monotone(records)}) ? 0 : 1;
    }
    if (precond->parsed()) {
      const auto cfg = resolve(precond, precond_opts);
      const auto records = kdb::bench::run_preconditioner_study(cfg);
      print_records(records);
      write_outputs(cfg, records);
      return report(kdb::bench::check_preconditioner_trends(records)) ? 0 : 1;
    }
    return run_reconstruction(resolve(reconstruct, reconstruct_opts));
  } catch (const kdb::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
