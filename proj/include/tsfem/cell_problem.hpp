#pragma once

// Periodic unit-cell problems on the perforated cell Y_e and the effective
// (homogenised) diffusion tensor they induce.

#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include "tsfem/assembly.hpp"
#include "tsfem/error.hpp"
#include "tsfem/mesh.hpp"
#include "tsfem/parallel.hpp"
#include "tsfem/solver.hpp"

namespace tsfem {

struct CellSolutions {
  /// Correctors w^1, w^2 as nodal vectors on the unreduced mesh (periodic
  /// classes carry equal values), each with zero lumped-mass mean.
  std::array<Vector, 2> w;
  PeriodicReduction reduction;
  std::array<std::size_t, 2> iterations{};
};

struct HomogenizedData {
  Tensor2 d_hom = Tensor2::Zero();
  double theta_e = 1.0;
  std::array<Vector, 2> cell_solutions;
  MeshStats mesh_h;
};

enum class CellKind { none, circle, ellipse, dziuk };

inline std::string_view to_string(CellKind kind) noexcept {
  switch (kind) {
    case CellKind::none: return "none";
    case CellKind::circle: return "circle";
    case CellKind::ellipse: return "ellipse";
    case CellKind::dziuk: return "dziuk";
  }
  return "?";
}

inline CellKind parse_cell_kind(std::string_view name) {
  for (auto kind : {CellKind::none, CellKind::circle, CellKind::ellipse, CellKind::dziuk})
    if (name == to_string(kind)) return kind;
  fail(ErrorKind::input, "unknown cell geometry '" + std::string(name) + "' (expected none|circle|ellipse|dziuk)");
}

/// Unit cell Y = [lower, upper]^2 containing one biological cell Y_i.
struct CellGeometry {
  CellKind kind = CellKind::ellipse;
  double radius = 1.0;                              // circle
  std::array<double, 2> ellipse_coefficients{0.26, 5.0};  // c1 x1^2 + c2 x2^2 < 1
  Point2 lower{-2.0, -2.0};
  Point2 upper{2.0, 2.0};

  double volume() const { return (upper[0] - lower[0]) * (upper[1] - lower[1]); }

  friend bool operator==(const CellGeometry&, const CellGeometry&) = default;

  DiscMap disc_map() const {
    switch (kind) {
      case CellKind::circle: return circle_map(radius);
      case CellKind::ellipse: return ellipse_from_coefficients(ellipse_coefficients[0], ellipse_coefficients[1]);
      case CellKind::dziuk: return DziukMap{};
      case CellKind::none: break;
    }
    fail(ErrorKind::configuration, "cell geometry 'none' has no interior cell");
  }
};

struct CellResolution {
  std::size_t segments = 32;  // hole / membrane nodes at level 0
  std::size_t layers = 16;
  double grading = 2.0;
  double clustering = 3.0;

  friend bool operator==(const CellResolution&, const CellResolution&) = default;
};

/// Periodic mesh of Y_e = Y \ Y_i at the given level, with periodic classes.
inline TriMesh make_cell_exterior_mesh(const CellGeometry& cell, unsigned level, const CellResolution& res = {}) {
  TriMesh mesh;
  if (cell.kind == CellKind::none) {
    mesh = generate_mesh(SquareSpec{cell.lower, cell.upper, res.segments / 4}, level);
    mesh.domain_tag = DomainTag::cell_exterior;
  } else {
    PerforatedSquareSpec spec;
    spec.hole = cell.disc_map();
    spec.lower = cell.lower;
    spec.upper = cell.upper;
    spec.segments = res.segments;
    spec.layers = res.layers;
    spec.grading = res.grading;
    spec.clustering = res.clustering;
    mesh = generate_mesh(spec, level);
  }
  const auto period = bounding_box_period(mesh);
  return match_periodic_nodes(std::move(mesh), period);
}

/// Load vectors b^j_i = int_{Y_e} (d_e e_j) . grad phi_i.
inline std::array<Vector, 2> cell_load_vectors(const TriMesh& mesh, const Tensor2& d_e) {
  std::array<Vector, 2> b{Vector::Zero(static_cast<Eigen::Index>(mesh.nodes.size())),
                          Vector::Zero(static_cast<Eigen::Index>(mesh.nodes.size()))};
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto e = p1_element(mesh, t);
    for (int j = 0; j < 2; ++j) {
      const Eigen::Vector2d flux = d_e.col(j);
      for (int a = 0; a < 3; ++a)
        b[j][static_cast<Eigen::Index>(mesh.triangles[t][a])] += e.area * flux.dot(e.grad[a]);
    }
  }
  return b;
}

inline CellSolutions solve_cell_problems(const TriMesh& mesh_ye, const Tensor2& d_e, const SolveOptions& options = {}) {
  bool has_outer = false;
  for (const auto& edge : mesh_ye.boundary_edges) has_outer = has_outer || edge.marker == BoundaryMarker::outer;
  if (has_outer && mesh_ye.periodic_classes.empty())
    fail(ErrorKind::configuration, "cell mesh has no periodic classes; run match_periodic_nodes first");
  check_coefficient(d_e);

  CellSolutions out;
  out.reduction = make_periodic_reduction(mesh_ye.nodes.size(), mesh_ye.periodic_classes);
  const SparseOperator stiffness = apply_periodic_constraints(assemble_stiffness(mesh_ye, d_e), out.reduction);
  const Vector lumped = assemble_lumped_mass(mesh_ye).values;
  const auto loads = cell_load_vectors(mesh_ye, d_e);

  SolveOptions gauged = options;
  gauged.gauge = Gauge::mean_zero;
  parallel_for_chunks(0, 2, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t j = lo; j < hi; ++j) {
      const Vector rhs = -out.reduction.restrict_sum(loads[j]);
      // e_j is already divergence free when there is no hole: the load is
      // pure rounding noise and the corrector vanishes
      const double scale = d_e.cwiseAbs().maxCoeff() * std::sqrt(total_area(mesh_ye));
      Vector w;
      if (rhs.norm() <= 1e-13 * scale) {
        w = Vector::Zero(static_cast<Eigen::Index>(mesh_ye.nodes.size()));
      } else {
        auto report = pcg(stiffness, rhs, gauged);
        out.iterations[j] = report.iterations;
        w = out.reduction.prolong(report.x);
      }
      w.array() -= lumped.dot(w) / lumped.sum();
      out.w[j] = std::move(w);
    }
  });
  return out;
}

/// D_ij = 1/|Y| int_{Y_e} [ d_e,ij + (d_e grad w^j)_i ], symmetrised.
inline Tensor2 homogenized_tensor(const TriMesh& mesh_ye, const Tensor2& d_e, const CellSolutions& cell,
                                  double cell_volume) {
  for (const auto& w : cell.w) {
    if (static_cast<std::size_t>(w.size()) != mesh_ye.nodes.size())
      fail(ErrorKind::input, "cell solution size does not match the cell mesh");
  }
  if (!(cell_volume > 0.0)) fail(ErrorKind::input, "cell volume must be positive");
  Tensor2 integral = Tensor2::Zero();
  for (std::size_t t = 0; t < mesh_ye.triangles.size(); ++t) {
    const auto e = p1_element(mesh_ye, t);
    const auto& tri = mesh_ye.triangles[t];
    for (int j = 0; j < 2; ++j) {
      Eigen::Vector2d grad_w = Eigen::Vector2d::Zero();
      for (int a = 0; a < 3; ++a) grad_w += cell.w[j][static_cast<Eigen::Index>(tri[a])] * e.grad[a];
      integral.col(j) += e.area * (d_e.col(j) + d_e * grad_w);
    }
  }
  const Tensor2 tensor = integral / cell_volume;
  return 0.5 * (tensor + tensor.transpose());
}

inline double porosity(const TriMesh& mesh_ye, double cell_volume) {
  if (!(cell_volume > 0.0)) fail(ErrorKind::input, "cell volume must be positive");
  return total_area(mesh_ye) / cell_volume;
}

inline HomogenizedData homogenize(const TriMesh& mesh_ye, const Tensor2& d_e, double cell_volume,
                                  const SolveOptions& options = {}) {
  auto cell = solve_cell_problems(mesh_ye, d_e, options);
  HomogenizedData data;
  data.d_hom = homogenized_tensor(mesh_ye, d_e, cell, cell_volume);
  data.theta_e = porosity(mesh_ye, cell_volume);
  data.cell_solutions = std::move(cell.w);
  data.mesh_h = mesh_stats(mesh_ye);
  return data;
}

}  // namespace tsfem
