#pragma once

// Result files: probe time series as CSV and field snapshots as legacy VTK
// ASCII polydata. Numbers use 17 significant digits so reruns are
// byte-identical.

#include <fstream>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "tsfem/mesh_io.hpp"
#include "tsfem/simulation.hpp"

namespace tsfem {

/// Nodal scalars on a triangle mesh (POLYGONS) or a closed curve (LINES).
struct FieldSnapshot {
  double time = 0.0;
  std::string title = "tsfem";
  std::vector<Point2> points;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<std::array<std::size_t, 2>> lines;
  std::vector<std::pair<std::string, Vector>> scalars;

  void check() const {
    for (const auto& [name, v] : scalars) {
      if (static_cast<std::size_t>(v.size()) != points.size())
        fail(ErrorKind::input, "snapshot field '" + name + "' has " + std::to_string(v.size()) + " values for " +
                                   std::to_string(points.size()) + " points");
    }
    for (const auto& t : triangles)
      for (auto i : t)
        if (i >= points.size()) fail(ErrorKind::input, "snapshot triangle references missing point " + std::to_string(i));
    for (const auto& l : lines)
      for (auto i : l)
        if (i >= points.size()) fail(ErrorKind::input, "snapshot line references missing point " + std::to_string(i));
  }
};

inline FieldSnapshot make_snapshot(const TriMesh& mesh, double time) {
  FieldSnapshot s;
  s.time = time;
  s.points = mesh.nodes;
  s.triangles = mesh.triangles;
  return s;
}

inline FieldSnapshot make_snapshot(const CurveMesh& curve, double time) {
  FieldSnapshot s;
  s.time = time;
  s.points = curve.nodes;
  s.lines = curve.segments;
  return s;
}

/// Macro snapshot of one sample: c_e plus per-node means of the micro species.
inline FieldSnapshot macro_snapshot(const TriMesh& omega, const Sample& sample) {
  auto s = make_snapshot(omega, sample.time);
  for (auto sp : all_species) s.scalars.emplace_back(std::string(to_string(sp)), sample.fields[species_index(sp)]);
  if (sample.coupling.size() > 0) s.scalars.emplace_back("coupling", sample.coupling);
  return s;
}

inline void write_snapshot(const FieldSnapshot& snap, std::ostream& os) {
  snap.check();
  os << "# vtk DataFile Version 3.0\n"
     << snap.title << " t=" << format_double(snap.time) << "\n"
     << "ASCII\n"
     << "DATASET POLYDATA\n"
     << "POINTS " << snap.points.size() << " double\n";
  for (const auto& p : snap.points) os << format_double(p[0]) << ' ' << format_double(p[1]) << " 0\n";
  if (!snap.triangles.empty()) {
    os << "POLYGONS " << snap.triangles.size() << ' ' << 4 * snap.triangles.size() << '\n';
    for (const auto& t : snap.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!snap.lines.empty()) {
    os << "LINES " << snap.lines.size() << ' ' << 3 * snap.lines.size() << '\n';
    for (const auto& l : snap.lines) os << "2 " << l[0] << ' ' << l[1] << '\n';
  }
  if (!snap.scalars.empty()) {
    os << "POINT_DATA " << snap.points.size() << '\n';
    for (const auto& [name, v] : snap.scalars) {
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (Eigen::Index i = 0; i < v.size(); ++i) os << format_double(v[i]) << '\n';
    }
  }
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::io, "cannot open '" + path + "' for writing");
  return os;
}

inline void finish_output(std::ofstream& os, const std::string& path) {
  os.flush();
  if (!os) fail(ErrorKind::io, "failed writing '" + path + "'");
}

}  // namespace detail

inline void write_snapshot(const FieldSnapshot& snap, const std::string& path) {
  snap.check();
  auto os = detail::open_output(path);
  write_snapshot(snap, os);
  detail::finish_output(os, path);
}

/// Long-format CSV of the probe values at every sampled step.
inline void write_timeseries(const Trajectory& traj, std::ostream& os) {
  os << "time,probe_id,species,value\n";
  for (const auto& s : traj.samples) {
    for (const auto& p : traj.probes) {
      if (s.step >= p.values.size()) fail(ErrorKind::input, "probe '" + p.id + "' has no value at step " + std::to_string(s.step));
      for (auto sp : all_species)
        os << format_double(s.time) << ',' << p.id << ',' << to_string(sp) << ',' << format_double(p.values[s.step][species_index(sp)])
           << '\n';
    }
  }
}

inline void write_timeseries(const Trajectory& traj, const std::string& path) {
  auto os = detail::open_output(path);
  write_timeseries(traj, os);
  detail::finish_output(os, path);
}

}  // namespace tsfem
