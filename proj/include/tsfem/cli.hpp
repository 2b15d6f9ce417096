#pragma once

// Command-line front end:
//   tsfem mesh gen --shape square|disc|cell [...] -o file
//   tsfem mesh info file
//   tsfem cell-problem --geometry none|circle|ellipse|dziuk --level L [-o dir]
//   tsfem benchmark --levels a..b [-o file]
//   tsfem simulate --config file [-o dir]
// Exit codes: 0 success, 2 invalid input, 1 runtime failure. Failures print
// one line `error[<kind>]: message` to the error stream.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tsfem/benchmark.hpp"
#include "tsfem/cell_problem.hpp"
#include "tsfem/config.hpp"
#include "tsfem/mesh_io.hpp"
#include "tsfem/output.hpp"
#include "tsfem/simulation.hpp"

namespace tsfem {

namespace cli {

inline std::string sci(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*e", digits, v);
  return buf;
}

/// "a..b" or a single level.
inline std::pair<unsigned, unsigned> parse_levels(const std::string& text) {
  const auto dots = text.find("..");
  try {
    std::size_t used = 0;
    if (dots == std::string::npos) {
      const auto v = std::stoul(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return {static_cast<unsigned>(v), static_cast<unsigned>(v)};
    }
    const auto a = std::stoul(text.substr(0, dots), &used);
    if (used != dots) throw std::invalid_argument(text);
    const auto rest = text.substr(dots + 2);
    const auto b = std::stoul(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(text);
    if (b < a) fail(ErrorKind::validation, "--levels: upper level " + rest + " is below lower level");
    return {static_cast<unsigned>(a), static_cast<unsigned>(b)};
  } catch (const std::logic_error&) {
    fail(ErrorKind::validation, "--levels: expected a..b, got '" + text + "'");
  }
}

inline void ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) fail(ErrorKind::io, "cannot create directory '" + dir + "'");
}

inline std::string join(const std::string& dir, const std::string& file) { return (std::filesystem::path(dir) / file).string(); }

struct MeshGen {
  std::string shape = "square";
  std::string cell = "circle";
  std::vector<double> bounds{0.0, 0.0, 1.0, 1.0};
  std::size_t n = 1, rings = 4, segments = 32, layers = 16;
  unsigned level = 0;
  std::string output;
};

inline int mesh_gen(const MeshGen& o, std::ostream& out) {
  TriMesh mesh;
  CellGeometry cell;
  if (o.shape != "square") cell.kind = parse_cell_kind(o.cell);
  if (o.shape == "square") {
    if (o.bounds.size() != 4) fail(ErrorKind::validation, "--bounds: expected x0 y0 x1 y1");
    mesh = generate_mesh(SquareSpec{{o.bounds[0], o.bounds[1]}, {o.bounds[2], o.bounds[3]}, o.n}, o.level);
  } else if (o.shape == "disc") {
    mesh = generate_mesh(MappedDiscSpec{cell.kind == CellKind::none ? DiscMap{IdentityMap{}} : cell.disc_map(), o.rings, o.segments}, o.level);
  } else if (o.shape == "cell") {
    CellResolution res;
    res.segments = o.segments;
    res.layers = o.layers;
    mesh = make_cell_exterior_mesh(cell, o.level, res);
  } else {
    fail(ErrorKind::validation, "--shape: unknown shape '" + o.shape + "' (expected square|disc|cell)");
  }
  if (o.output.empty() || o.output == "-") {
    write_mesh(mesh, out);
  } else {
    write_mesh(mesh, o.output);
    out << "wrote " << o.output << ": " << mesh.node_count() << " nodes, " << mesh.triangle_count() << " triangles\n";
  }
  return 0;
}

inline int mesh_info(const std::string& path, std::ostream& out) {
  const auto mesh = read_mesh(path);
  validate(mesh);
  const auto s = mesh_stats(mesh);
  out << "nodes " << mesh.node_count() << "\n"
      << "triangles " << mesh.triangle_count() << "\n"
      << "boundary_edges " << mesh.boundary_edges.size() << "\n"
      << "periodic_classes " << mesh.periodic_classes.size() << "\n"
      << "area " << format_double(s.total_area) << "\n"
      << "h_max " << format_double(s.h_max) << "\n"
      << "min_angle_deg " << format_double(s.min_angle) << "\n";
  return 0;
}

struct CellOptions {
  std::string geometry = "ellipse";
  unsigned level = 3;
  double d_e = 1e-2;
  double radius = 1.0;
  std::string output;
};

inline int cell_problem(const CellOptions& o, std::ostream& out) {
  CellGeometry cell;
  cell.kind = parse_cell_kind(o.geometry);
  cell.radius = o.radius;
  if (!(o.d_e > 0.0)) fail(ErrorKind::validation, "--d-e: must be > 0");
  const auto mesh = make_cell_exterior_mesh(cell, o.level);
  const auto hom = homogenize(mesh, o.d_e * Tensor2::Identity(), cell.volume());
  const auto& d = hom.d_hom;
  out << "geometry " << to_string(cell.kind) << "\n"
      << "level " << o.level << "\n"
      << "dofs " << mesh.node_count() - [&] {
           std::size_t dup = 0;
           for (const auto& c : mesh.periodic_classes) dup += c.size() - 1;
           return dup;
         }() << "\n"
      << "h_max " << sci(hom.mesh_h.h_max, 4) << "\n"
      << "d_hom " << sci(d(0, 0)) << ' ' << sci(d(0, 1)) << ' ' << sci(d(1, 0)) << ' ' << sci(d(1, 1)) << "\n"
      << "theta_e " << sci(hom.theta_e) << "\n";
  if (!o.output.empty()) {
    ensure_directory(o.output);
    auto snap = make_snapshot(mesh, 0.0);
    snap.title = "cell correctors";
    snap.scalars = {{"w1", hom.cell_solutions[0]}, {"w2", hom.cell_solutions[1]}};
    const auto path = join(o.output, "cell_" + std::string(to_string(cell.kind)) + ".vtk");
    write_snapshot(snap, path);
    out << "wrote " << path << "\n";
  }
  return 0;
}

/// CSV table of errors per level with EOCs against the previous level.
inline void write_benchmark_table(const std::vector<ErrorRecord>& recs, std::ostream& os) {
  os << "level,h_omega,h_yi,h_gamma,tau";
  for (auto s : benchmark_species) {
    const auto n = std::string(to_string(s));
    os << ',' << n << "_l2h1," << n << "_linfl2," << n << "_eoc_l2h1," << n << "_eoc_linfl2";
  }
  os << '\n';
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const auto& r = recs[i];
    os << r.level << ',' << sci(r.h_omega) << ',' << sci(r.h_yi) << ',' << sci(r.h_gamma) << ',' << sci(r.tau);
    for (std::size_t s = 0; s < 4; ++s) {
      os << ',' << sci(r.l2h1[s]) << ',' << sci(r.linfl2[s]);
      if (i == 0) {
        os << ",,";
      } else {
        const auto& p = recs[i - 1];
        os << ',' << compute_eoc({p.l2h1[s], r.l2h1[s]}, {p.h(), r.h()})[0] << ','
           << compute_eoc({p.linfl2[s], r.linfl2[s]}, {p.h(), r.h()})[0];
      }
    }
    os << '\n';
  }
}

struct BenchmarkCli {
  std::string levels = "0..3";
  double tau0 = BenchmarkOptions{}.tau0;
  std::string output;
};

inline int benchmark(const BenchmarkCli& o, std::ostream& out) {
  const auto [lo, hi] = parse_levels(o.levels);
  if (hi > 6) fail(ErrorKind::validation, "--levels: the finest supported level is 6");
  if (!(o.tau0 > 0.0)) fail(ErrorKind::validation, "--tau0: must be > 0");
  BenchmarkOptions opt;
  opt.tau0 = o.tau0;
  std::vector<ErrorRecord> recs;
  for (unsigned l = lo; l <= hi; ++l) recs.push_back(run_benchmark(l, opt));
  if (o.output.empty() || o.output == "-") {
    write_benchmark_table(recs, out);
  } else {
    std::ostringstream os;
    write_benchmark_table(recs, os);
    auto f = detail::open_output(o.output);
    f << os.str();
    detail::finish_output(f, o.output);
    out << "wrote " << o.output << "\n";
  }
  return 0;
}

struct SimulateCli {
  std::string config;
  std::string output;
};

inline int simulate(const SimulateCli& o, std::ostream& out) {
  auto config = parse_config(o.config);
  if (!o.output.empty()) config.output.directory = o.output;
  TwoScaleSimulation sim(config);
  const auto& d = sim.d_hom();
  out << "scenario " << config.name << "\n"
      << "macro_nodes " << sim.omega().node_count() << "\n"
      << "micro_nodes " << sim.micro_meshes().y_i.node_count() << ' ' << sim.micro_meshes().gamma.node_count() << "\n"
      << "steps " << config.time.steps() << "\n"
      << "d_hom " << sci(d(0, 0)) << ' ' << sci(d(0, 1)) << ' ' << sci(d(1, 0)) << ' ' << sci(d(1, 1)) << "\n"
      << "theta_e " << sci(sim.theta_e()) << "\n";
  const auto traj = run(sim);
  for (auto sp : all_species) {
    const auto k = species_index(sp);
    out << "range " << to_string(sp) << ' ' << sci(traj.minimum[k]) << ' ' << sci(traj.maximum[k]) << "\n";
  }
  for (const auto& p : traj.probes) {
    const auto t = crossing_time(traj.times, p, Species::c_e, 0.1);
    out << "probe " << p.id << " node " << p.node << " c_e " << sci(p.values.back()[0]) << " crossing_0.1 "
        << (t ? sci(*t, 4) : std::string("none")) << "\n";
  }
  if (!config.output.directory.empty()) {
    const auto& dir = config.output.directory;
    ensure_directory(dir);
    write_timeseries(traj, join(dir, "timeseries.csv"));
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "macro_%05zu.vtk", i);
      auto snap = macro_snapshot(sim.omega(), traj.samples[i]);
      snap.title = config.name;
      write_snapshot(snap, join(dir, name));
    }
    // micro fields at the probe nodes, final time
    for (const auto& p : traj.probes) {
      const auto col = static_cast<Eigen::Index>(p.node);
      auto bulk = make_snapshot(sim.micro_meshes().y_i, sim.time());
      bulk.title = config.name + " c_i at " + p.id;
      bulk.scalars = {{"c_i", sim.micro().c_i.col(col)}};
      write_snapshot(bulk, join(dir, "micro_" + p.id + "_bulk.vtk"));
      auto surf = make_snapshot(sim.micro_meshes().gamma, sim.time());
      surf.title = config.name + " membrane at " + p.id;
      for (auto sp : surface_species) surf.scalars.emplace_back(std::string(to_string(sp)), sim.micro().species(sp).col(col));
      write_snapshot(surf, join(dir, "micro_" + p.id + "_membrane.vtk"));
    }
    out << "wrote " << traj.samples.size() << " snapshots and timeseries.csv to " << dir << "\n";
  }
  return 0;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Two-scale bulk-surface finite element solver", "tsfem"};
  app.require_subcommand(1);

  auto* mesh = app.add_subcommand("mesh", "generate or inspect meshes");
  mesh->require_subcommand(1);
  cli::MeshGen gen;
  auto* mesh_gen = mesh->add_subcommand("gen", "generate a mesh file");
  mesh_gen->add_option("--shape", gen.shape, "square|disc|cell")->capture_default_str();
  mesh_gen->add_option("--cell", gen.cell, "none|circle|ellipse|dziuk (disc and cell shapes)")->capture_default_str();
  mesh_gen->add_option("--bounds", gen.bounds, "x0 y0 x1 y1 (square)")->expected(4);
  mesh_gen->add_option("--n", gen.n, "cells per side at level 0 (square)")->capture_default_str();
  mesh_gen->add_option("--rings", gen.rings, "rings (disc)")->capture_default_str();
  mesh_gen->add_option("--segments", gen.segments, "rim segments (disc, cell)")->capture_default_str();
  mesh_gen->add_option("--layers", gen.layers, "radial layers (cell)")->capture_default_str();
  mesh_gen->add_option("--level", gen.level, "refinement level")->capture_default_str();
  mesh_gen->add_option("-o,--output", gen.output, "output file (default: stdout)");
  std::string info_path;
  auto* mesh_info = mesh->add_subcommand("info", "print mesh statistics");
  mesh_info->add_option("file", info_path, "mesh file")->required();

  cli::CellOptions cell;
  auto* cellp = app.add_subcommand("cell-problem", "solve the periodic cell problems");
  cellp->add_option("--geometry", cell.geometry, "none|circle|ellipse|dziuk")->capture_default_str();
  cellp->add_option("--level", cell.level, "refinement level")->capture_default_str();
  cellp->add_option("--d-e", cell.d_e, "extracellular diffusivity")->capture_default_str();
  cellp->add_option("--radius", cell.radius, "circle radius")->capture_default_str();
  cellp->add_option("-o,--output", cell.output, "directory for corrector fields");

  cli::BenchmarkCli bench;
  auto* benchp = app.add_subcommand("benchmark", "manufactured-solution convergence table");
  benchp->add_option("--levels", bench.levels, "level range a..b")->capture_default_str();
  benchp->add_option("--tau0", bench.tau0, "time step at level 0")->capture_default_str();
  benchp->add_option("-o,--output", bench.output, "CSV file (default: stdout)");

  cli::SimulateCli sim;
  auto* simp = app.add_subcommand("simulate", "run a two-scale scenario");
  simp->add_option("--config", sim.config, "TOML scenario file")->required();
  simp->add_option("-o,--output", sim.output, "output directory (overrides output.directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (mesh_gen->parsed()) return cli::mesh_gen(gen, out);
    if (mesh_info->parsed()) return cli::mesh_info(info_path, out);
    if (cellp->parsed()) return cli::cell_problem(cell, out);
    if (benchp->parsed()) return cli::benchmark(bench, out);
    if (simp->parsed()) return cli::simulate(sim, out);
  } catch (const Error& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error[" << to_string(e.kind()) << "]: " << msg << "\n";
    return is_validation_kind(e.kind()) ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tsfem
