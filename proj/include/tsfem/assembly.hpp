#pragma once

// P1 assembly on triangulations and on closed polygonal curves, periodic
// constraint reduction, nodal interpolation and discrete norms.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "tsfem/error.hpp"
#include "tsfem/mesh.hpp"
#include "tsfem/sparse.hpp"

namespace tsfem {

using Tensor2 = Eigen::Matrix2d;

struct P1Element {
  double area = 0.0;
  std::array<Eigen::Vector2d, 3> grad;
};

/// Area and (constant) basis gradients of triangle t.
inline P1Element p1_element(const TriMesh& mesh, std::size_t t) {
  const auto& tri = mesh.triangles[t];
  const auto& p0 = mesh.nodes[tri[0]];
  const auto& p1 = mesh.nodes[tri[1]];
  const auto& p2 = mesh.nodes[tri[2]];
  const double twice_area = orient2d(p0, p1, p2);
  if (!(twice_area > 0.0) || !std::isfinite(twice_area))
    fail(ErrorKind::assembly, "degenerate or inverted triangle " + std::to_string(t));
  P1Element e;
  e.area = 0.5 * twice_area;
  // grad phi_i = rot(edge opposite i) / (2 area)
  e.grad[0] = Eigen::Vector2d(p1[1] - p2[1], p2[0] - p1[0]) / twice_area;
  e.grad[1] = Eigen::Vector2d(p2[1] - p0[1], p0[0] - p2[0]) / twice_area;
  e.grad[2] = Eigen::Vector2d(p0[1] - p1[1], p1[0] - p0[0]) / twice_area;
  return e;
}

inline void check_coefficient(const Tensor2& coeff) {
  if (!coeff.allFinite()) fail(ErrorKind::input, "diffusion tensor has non-finite entries");
  const double scale = coeff.cwiseAbs().maxCoeff();
  if (std::abs(coeff(0, 1) - coeff(1, 0)) > 1e-14 * scale)
    fail(ErrorKind::input, "diffusion tensor is not symmetric");
  const double trace = coeff.trace();
  const double det = coeff.determinant();
  if (trace < 0.0 || det < -1e-14 * scale * scale)
    fail(ErrorKind::input, "diffusion tensor is not positive semidefinite");
}

/// Stiffness matrix (coeff grad phi_j, grad phi_i), integrated exactly.
inline SparseOperator assemble_stiffness(const TriMesh& mesh, const Tensor2& coeff) {
  check_coefficient(coeff);
  const Tensor2 c = 0.5 * (coeff + coeff.transpose());
  SparseBuilder builder(mesh.nodes.size());
  builder.reserve(9 * mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto e = p1_element(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a) {
      for (int b = a; b < 3; ++b) {
        const double v = e.area * e.grad[a].dot(c * e.grad[b]);
        builder.add(tri[a], tri[b], v);
        if (a != b) builder.add(tri[b], tri[a], v);
      }
    }
  }
  return std::move(builder).build(true);
}

inline SparseOperator assemble_stiffness(const TriMesh& mesh, double coeff = 1.0) {
  return assemble_stiffness(mesh, Tensor2(coeff * Tensor2::Identity()));
}

/// Consistent P1 mass matrix (exact).
inline SparseOperator assemble_consistent_mass(const TriMesh& mesh) {
  SparseBuilder builder(mesh.nodes.size());
  builder.reserve(9 * mesh.triangles.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double area = p1_element(mesh, t).area;
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) builder.add(tri[a], tri[b], area / (a == b ? 6.0 : 12.0));
  }
  return std::move(builder).build(true);
}

/// Vertex-rule lumped mass: area/3 to each vertex.
inline DiagonalOperator assemble_lumped_mass(const TriMesh& mesh) {
  DiagonalOperator m{Vector::Zero(static_cast<Eigen::Index>(mesh.nodes.size()))};
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const double third = p1_element(mesh, t).area / 3.0;
    for (auto v : mesh.triangles[t]) m.values[static_cast<Eigen::Index>(v)] += third;
  }
  return m;
}

/// Half the summed lengths of boundary edges touching each node; zero on
/// interior nodes. Used for natural boundary loads.
inline Vector assemble_boundary_lumped_mass(const TriMesh& mesh, std::optional<BoundaryMarker> marker = std::nullopt) {
  Vector w = Vector::Zero(static_cast<Eigen::Index>(mesh.nodes.size()));
  for (const auto& edge : mesh.boundary_edges) {
    if (marker && edge.marker != *marker) continue;
    const double half = 0.5 * distance(mesh.nodes[edge.nodes[0]], mesh.nodes[edge.nodes[1]]);
    w[static_cast<Eigen::Index>(edge.nodes[0])] += half;
    w[static_cast<Eigen::Index>(edge.nodes[1])] += half;
  }
  return w;
}

/// Element matrix of the arc-length Laplacian on one segment of length h.
inline Eigen::Matrix2d curve_element_stiffness(double h, double coeff) {
  if (!(h > 0.0)) fail(ErrorKind::assembly, "zero-length curve segment");
  const double k = coeff / h;
  return (Eigen::Matrix2d() << k, -k, -k, k).finished();
}

/// Laplace-Beltrami stiffness on a polygonal curve: (coeff/h)[[1,-1],[-1,1]]
/// per segment.
inline SparseOperator assemble_curve_stiffness(const CurveMesh& curve, double coeff = 1.0) {
  validate(curve);
  if (!(coeff >= 0.0)) fail(ErrorKind::input, "curve diffusion coefficient must be nonnegative");
  SparseBuilder builder(curve.nodes.size());
  for (std::size_t s = 0; s < curve.segments.size(); ++s) {
    const auto [a, b] = curve.segments[s];
    const auto k = curve_element_stiffness(segment_length(curve, s), coeff);
    builder.add(a, a, k(0, 0));
    builder.add(a, b, k(0, 1));
    builder.add(b, a, k(1, 0));
    builder.add(b, b, k(1, 1));
  }
  return std::move(builder).build(true);
}

inline SparseOperator assemble_curve_consistent_mass(const CurveMesh& curve) {
  validate(curve);
  SparseBuilder builder(curve.nodes.size());
  for (std::size_t s = 0; s < curve.segments.size(); ++s) {
    const double h = segment_length(curve, s);
    const auto [a, b] = curve.segments[s];
    builder.add(a, a, h / 3.0);
    builder.add(a, b, h / 6.0);
    builder.add(b, a, h / 6.0);
    builder.add(b, b, h / 3.0);
  }
  return std::move(builder).build(true);
}

inline DiagonalOperator assemble_curve_lumped_mass(const CurveMesh& curve) {
  validate(curve);
  DiagonalOperator m{Vector::Zero(static_cast<Eigen::Index>(curve.nodes.size()))};
  for (std::size_t s = 0; s < curve.segments.size(); ++s) {
    const double half = 0.5 * segment_length(curve, s);
    for (auto v : curve.segments[s]) m.values[static_cast<Eigen::Index>(v)] += half;
  }
  return m;
}

// ---------------------------------------------------------------------------
// periodic constraints

/// Old-to-new index map that collapses each periodic class onto one unknown.
struct PeriodicReduction {
  std::vector<std::size_t> old_to_new;
  std::size_t reduced_dimension = 0;

  std::size_t full_dimension() const noexcept { return old_to_new.size(); }

  /// R^T v: sums the entries of each class.
  Vector restrict_sum(const Vector& full) const {
    Vector r = Vector::Zero(static_cast<Eigen::Index>(reduced_dimension));
    for (std::size_t i = 0; i < old_to_new.size(); ++i) r[static_cast<Eigen::Index>(old_to_new[i])] += full[static_cast<Eigen::Index>(i)];
    return r;
  }

  /// R v: copies each reduced value to every member of its class.
  Vector prolong(const Vector& reduced) const {
    Vector f(static_cast<Eigen::Index>(old_to_new.size()));
    for (std::size_t i = 0; i < old_to_new.size(); ++i) f[static_cast<Eigen::Index>(i)] = reduced[static_cast<Eigen::Index>(old_to_new[i])];
    return f;
  }
};

inline PeriodicReduction make_periodic_reduction(std::size_t dimension, const std::vector<std::vector<std::size_t>>& classes) {
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> class_of(dimension, unset);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (auto v : classes[c]) {
      if (v >= dimension) fail(ErrorKind::constraint, "periodic class index out of range");
      if (class_of[v] != unset)
        fail(ErrorKind::constraint, "node " + std::to_string(v) + " belongs to overlapping periodic classes");
      class_of[v] = c;
    }
  }
  PeriodicReduction red;
  red.old_to_new.assign(dimension, unset);
  std::vector<std::size_t> class_index(classes.size(), unset);
  for (std::size_t i = 0; i < dimension; ++i) {
    if (class_of[i] == unset) {
      red.old_to_new[i] = red.reduced_dimension++;
    } else {
      auto& ci = class_index[class_of[i]];
      if (ci == unset) ci = red.reduced_dimension++;
      red.old_to_new[i] = ci;
    }
  }
  return red;
}

inline SparseOperator apply_periodic_constraints(const SparseOperator& op, const PeriodicReduction& red) {
  if (op.dimension() != red.full_dimension()) fail(ErrorKind::constraint, "operator size does not match reduction");
  SparseBuilder builder(red.reduced_dimension);
  builder.reserve(op.nonzeros());
  const auto rp = op.row_ptr();
  const auto ci = op.col_idx();
  const auto v = op.values();
  for (std::size_t r = 0; r < op.dimension(); ++r)
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) builder.add(red.old_to_new[r], red.old_to_new[ci[k]], v[k]);
  SparseOperator reduced = std::move(builder).build(op.symmetric());
  if (!op.symmetric()) return reduced;
  // class sums can be accumulated in different orders for (p,q) and (q,p)
  SparseBuilder sym(red.reduced_dimension);
  const auto rrp = reduced.row_ptr();
  const auto rci = reduced.col_idx();
  const auto rv = reduced.values();
  for (std::size_t r = 0; r < reduced.dimension(); ++r)
    for (std::size_t k = rrp[r]; k < rrp[r + 1]; ++k) sym.add(r, rci[k], 0.5 * (rv[k] + reduced.value(rci[k], r)));
  return std::move(sym).build(true);
}

inline DiagonalOperator apply_periodic_constraints(const DiagonalOperator& op, const PeriodicReduction& red) {
  if (op.dimension() != red.full_dimension()) fail(ErrorKind::constraint, "operator size does not match reduction");
  return DiagonalOperator{red.restrict_sum(op.values)};
}

// ---------------------------------------------------------------------------
// interpolation and norms

template <class Fn>
Vector interpolate(Fn&& fn, const std::vector<Point2>& nodes) {
  Vector u(static_cast<Eigen::Index>(nodes.size()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double v = fn(nodes[i]);
    if (!std::isfinite(v))
      fail(ErrorKind::input, "interpolated function is not finite at node " + std::to_string(i) + " " +
                                 format_point(nodes[i]));
    u[static_cast<Eigen::Index>(i)] = v;
  }
  return u;
}

template <class Fn>
Vector interpolate(Fn&& fn, const TriMesh& mesh) {
  return interpolate(std::forward<Fn>(fn), mesh.nodes);
}

template <class Fn>
Vector interpolate(Fn&& fn, const CurveMesh& curve) {
  return interpolate(std::forward<Fn>(fn), curve.nodes);
}

struct DiscreteNorms {
  double l2 = 0.0;
  double h1_semi = 0.0;

  double h1() const { return std::sqrt(l2 * l2 + h1_semi * h1_semi); }
};

/// Consistent mass and unit stiffness of one mesh, kept for repeated norm
/// evaluation.
struct NormOperators {
  SparseOperator mass;
  SparseOperator stiffness;

  static NormOperators on(const TriMesh& mesh) {
    return {assemble_consistent_mass(mesh), assemble_stiffness(mesh, 1.0)};
  }
  static NormOperators on(const CurveMesh& curve) {
    return {assemble_curve_consistent_mass(curve), assemble_curve_stiffness(curve, 1.0)};
  }

  /// Squared (l2, h1 semi) norms.
  std::array<double, 2> squared(const Vector& u) const {
    if (static_cast<std::size_t>(u.size()) != mass.dimension())
      fail(ErrorKind::input, "vector size " + std::to_string(u.size()) + " does not match mesh size " +
                                 std::to_string(mass.dimension()));
    return {std::max(0.0, u.dot(mass.apply(u))), std::max(0.0, u.dot(stiffness.apply(u)))};
  }

  DiscreteNorms norms(const Vector& u) const {
    const auto sq = squared(u);
    return {std::sqrt(sq[0]), std::sqrt(sq[1])};
  }
};

inline DiscreteNorms discrete_norms(const Vector& u, const TriMesh& mesh) { return NormOperators::on(mesh).norms(u); }
inline DiscreteNorms discrete_norms(const Vector& u, const CurveMesh& curve) { return NormOperators::on(curve).norms(u); }

}  // namespace tsfem
