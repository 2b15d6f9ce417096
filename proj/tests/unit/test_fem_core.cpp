#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include <Eigen/Dense>

#include "tsfem/assembly.hpp"

using namespace tsfem;

namespace {

TriMesh reference_triangle() {
  TriMesh mesh;
  mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  mesh.triangles = {{0, 1, 2}};
  mesh.boundary_edges = {{{0, 1}}, {{1, 2}}, {{2, 0}}};
  return mesh;
}

TriMesh unit_square(std::size_t n) { return generate_mesh(SquareSpec{{0.0, 0.0}, {1.0, 1.0}, n}); }

Eigen::MatrixXd dense(const SparseOperator& op) { return Eigen::MatrixXd(op.to_eigen()); }

CurveMesh square_loop() { return extract_boundary_curve(unit_square(1), BoundaryMarker::outer); }

}  // namespace

TEST(AssembleStiffness, ReferenceTriangleIdentity) {
  const auto K = dense(assemble_stiffness(reference_triangle(), 1.0));
  Eigen::Matrix3d expected;
  expected << 2, -1, -1, -1, 1, 0, -1, 0, 1;
  expected *= 0.5;
  EXPECT_LT((K - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(AssembleStiffness, ReferenceTriangleAnisotropic) {
  Tensor2 d;
  d << 2.0, 0.0, 0.0, 1.0;
  const auto K = assemble_stiffness(reference_triangle(), d);
  EXPECT_DOUBLE_EQ(K.value(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(K.value(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(K.value(2, 2), 0.5);
}

TEST(AssembleStiffness, ZeroCoefficient) {
  const auto K = assemble_stiffness(unit_square(3), 0.0);
  for (double v : K.values()) EXPECT_EQ(v, 0.0);
}

TEST(AssembleStiffness, SymmetricWithVanishingRowSums) {
  Tensor2 d;
  d << 0.7, 0.2, 0.2, 0.3;
  PerforatedSquareSpec spec;
  spec.hole = DiscMap{DziukMap{}};
  for (const auto& mesh : {unit_square(5), generate_mesh(spec, 0), generate_mesh(MappedDiscSpec{EllipseMap{2.0, 0.5}, 4, 32})}) {
    const auto K = assemble_stiffness(mesh, d);
    EXPECT_TRUE(K.symmetric());
    EXPECT_TRUE(K.is_structurally_symmetric());
    for (std::size_t r = 0; r < K.dimension(); ++r) EXPECT_LE(std::abs(K.row_sum(r)), 1e-12 * K.row_abs_max(r));
  }
}

TEST(AssembleStiffness, NonSymmetricCoefficientRejected) {
  Tensor2 d;
  d << 1.0, 0.5, 0.0, 1.0;
  EXPECT_THROW(assemble_stiffness(reference_triangle(), d), Error);
}

TEST(AssembleStiffness, DegenerateTriangleIsAssemblyError) {
  TriMesh mesh;
  mesh.nodes = {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  mesh.triangles = {{0, 1, 2}};
  try {
    assemble_stiffness(mesh, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::assembly);
  }
}

TEST(AssembleStiffness, PermutationEquivariant) {
  const auto mesh = generate_mesh(MappedDiscSpec{DziukMap{}, 2, 16});
  const std::size_t n = mesh.node_count();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng(7);
  std::shuffle(perm.begin(), perm.end(), rng);
  TriMesh permuted = mesh;
  for (std::size_t i = 0; i < n; ++i) permuted.nodes[perm[i]] = mesh.nodes[i];
  for (auto& t : permuted.triangles)
    for (auto& v : t) v = perm[v];
  for (auto& e : permuted.boundary_edges)
    for (auto& v : e.nodes) v = perm[v];
  const auto K = assemble_stiffness(mesh, 1.0);
  const auto Kp = assemble_stiffness(permuted, 1.0);
  const auto M = assemble_lumped_mass(mesh);
  const auto Mp = assemble_lumped_mass(permuted);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(Mp.values[static_cast<Eigen::Index>(perm[i])], M.values[static_cast<Eigen::Index>(i)], 1e-15);
    for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(Kp.value(perm[i], perm[j]), K.value(i, j), 1e-13);
  }
}

TEST(AssembleLumpedMass, TwoTriangleSquare) {
  const auto m = assemble_lumped_mass(unit_square(1)).values;
  // nodes 0 (0,0) and 3 (1,1) touch both triangles
  EXPECT_DOUBLE_EQ(m[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(m[1], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(m[2], 1.0 / 6.0);
  EXPECT_DOUBLE_EQ(m[3], 1.0 / 3.0);
}

TEST(AssembleLumpedMass, ReferenceTriangle) {
  const auto m = assemble_lumped_mass(reference_triangle()).values;
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(m[i], 1.0 / 6.0);
}

TEST(AssembleLumpedMass, SumsToArea) {
  PerforatedSquareSpec spec;
  for (const auto& mesh : {unit_square(7), generate_mesh(spec, 1), generate_mesh(MappedDiscSpec{DziukMap{}, 4, 32}, 1)}) {
    const auto m = assemble_lumped_mass(mesh);
    EXPECT_NEAR(m.total(), total_area(mesh), 1e-13 * total_area(mesh));
    EXPECT_GT(m.values.minCoeff(), 0.0);
  }
}

TEST(AssembleConsistentMass, IntegratesProducts) {
  // int x1 * x2 over the unit square is 1/4
  const auto mesh = unit_square(4);
  const auto M = assemble_consistent_mass(mesh);
  const auto x = interpolate([](const Point2& p) { return p[0]; }, mesh);
  const auto y = interpolate([](const Point2& p) { return p[1]; }, mesh);
  EXPECT_NEAR(x.dot(M.apply(y)), 0.25, 1e-14);
  EXPECT_NEAR(Vector::Ones(x.size()).dot(M.apply(Vector::Ones(x.size()))), 1.0, 1e-14);
}

TEST(AssembleCurveStiffness, SegmentElementMatrix) {
  const auto k = curve_element_stiffness(0.5, 1.0);
  EXPECT_DOUBLE_EQ(k(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(k(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(k(1, 0), -2.0);
  EXPECT_DOUBLE_EQ(k(1, 1), 2.0);
}

TEST(AssembleCurveStiffness, HalfLengthSegmentInLoop) {
  // triangle loop whose first segment has length 0.5
  CurveMesh curve;
  curve.nodes = {{0.0, 0.0}, {0.5, 0.0}, {0.25, 1.0}};
  curve.segments = {{0, 1}, {1, 2}, {2, 0}};
  curve.parent_indices = {0, 1, 2};
  const auto K = assemble_curve_stiffness(curve, 1.0);
  EXPECT_DOUBLE_EQ(K.value(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(K.value(1, 0), -2.0);
}

TEST(AssembleCurveStiffness, ZeroCoefficient) {
  const auto K = assemble_curve_stiffness(square_loop(), 0.0);
  for (double v : K.values()) EXPECT_EQ(v, 0.0);
}

TEST(AssembleCurveStiffness, ConstantsInKernel) {
  const auto K = assemble_curve_stiffness(square_loop(), 1.0);
  EXPECT_EQ(K.apply(Vector::Ones(4)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleCurveStiffness, ZeroLengthSegmentRejected) {
  CurveMesh curve;
  curve.nodes = {{0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}};
  curve.segments = {{0, 1}, {1, 2}, {2, 0}};
  curve.parent_indices = {0, 1, 2};
  EXPECT_THROW(assemble_curve_stiffness(curve, 1.0), Error);
}

TEST(AssembleCurveStiffness, DiscreteLaplacianOfCosine) {
  // on a fine circle the Laplace-Beltrami of cos(2 phi) is -4 cos(2 phi)
  const auto curve = extract_boundary_curve(generate_mesh(MappedDiscSpec{IdentityMap{}, 1, 256}), BoundaryMarker::outer);
  const auto K = assemble_curve_stiffness(curve, 1.0);
  const auto m = assemble_curve_lumped_mass(curve).values;
  const auto u = interpolate([](const Point2& p) { return std::cos(2.0 * std::atan2(p[1], p[0])); }, curve);
  const Vector lap = -K.apply(u).cwiseQuotient(m);
  EXPECT_LT((lap + 4.0 * u).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(AssembleCurveLumpedMass, UniformCircle) {
  const auto curve = extract_boundary_curve(generate_mesh(MappedDiscSpec{IdentityMap{}, 1, 8}), BoundaryMarker::outer);
  const auto m = assemble_curve_lumped_mass(curve);
  const double perimeter = 16.0 * std::sin(std::numbers::pi / 8);
  for (Eigen::Index i = 0; i < 8; ++i) EXPECT_NEAR(m.values[i], perimeter / 8.0, 1e-15);
  EXPECT_NEAR(m.total(), perimeter, 1e-14);
}

TEST(AssembleCurveLumpedMass, OpenChainIsTopologyError) {
  CurveMesh curve;
  curve.nodes = {{0.0, 0.0}, {1.0, 0.0}};
  curve.segments = {{0, 1}};
  curve.parent_indices = {0, 1};
  try {
    assemble_curve_lumped_mass(curve);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::topology);
  }
}

TEST(AssembleCurveLumpedMass, SumsToLength) {
  PerforatedSquareSpec spec;
  spec.hole = DiscMap{DziukMap{}};
  const auto curve = extract_boundary_curve(generate_mesh(spec, 1), BoundaryMarker::hole);
  EXPECT_NEAR(assemble_curve_lumped_mass(curve).total(), total_length(curve), 1e-13 * total_length(curve));
}

TEST(PeriodicConstraints, NoClassesIsIdentity) {
  const auto red = make_periodic_reduction(5, {});
  EXPECT_EQ(red.reduced_dimension, 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(red.old_to_new[i], i);
}

TEST(PeriodicConstraints, DiagonalAdditivity) {
  const auto red = make_periodic_reduction(2, {{0, 1}});
  Vector weights(2);
  weights << 0.25, 0.5;
  const auto reduced = apply_periodic_constraints(DiagonalOperator{weights}, red);
  ASSERT_EQ(reduced.dimension(), 1u);
  EXPECT_DOUBLE_EQ(reduced.values[0], 0.75);
}

TEST(PeriodicConstraints, OverlapIsConstraintError) {
  try {
    make_periodic_reduction(4, {{0, 1}, {1, 2}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::constraint);
  }
}

TEST(PeriodicConstraints, ReducedStiffnessKeepsConstantsInKernel) {
  const auto mesh = match_periodic_nodes(unit_square(4), PeriodVectors{{1.0, 0.0}, {0.0, 1.0}});
  const auto red = make_periodic_reduction(mesh.node_count(), mesh.periodic_classes);
  EXPECT_EQ(red.reduced_dimension, 16u);
  const auto K = apply_periodic_constraints(assemble_stiffness(mesh, 1.0), red);
  EXPECT_TRUE(K.is_structurally_symmetric());
  EXPECT_LT(K.apply(Vector::Ones(16)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(PeriodicConstraints, ReducedOperatorIsGalerkinProjection) {
  const auto mesh = match_periodic_nodes(unit_square(3), PeriodVectors{{1.0, 0.0}, {0.0, 1.0}});
  const auto red = make_periodic_reduction(mesh.node_count(), mesh.periodic_classes);
  const auto K = assemble_stiffness(mesh, 1.0);
  const auto Kr = dense(apply_periodic_constraints(K, red));
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(mesh.node_count()),
                                            static_cast<Eigen::Index>(red.reduced_dimension));
  for (std::size_t i = 0; i < mesh.node_count(); ++i) P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(red.old_to_new[i])) = 1.0;
  const Eigen::MatrixXd expected = P.transpose() * dense(K) * P;
  EXPECT_LT((Kr - expected).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Interpolate, Constants) {
  const auto u = interpolate([](const Point2&) { return 1.0; }, unit_square(2));
  EXPECT_EQ(u, Vector::Ones(9));
}

TEST(Interpolate, Coordinate) {
  const auto mesh = unit_square(2);
  const auto u = interpolate([](const Point2& p) { return p[0]; }, mesh);
  for (std::size_t i = 0; i < mesh.node_count(); ++i) EXPECT_EQ(u[static_cast<Eigen::Index>(i)], mesh.nodes[i][0]);
}

TEST(Interpolate, GaussianAtOrigin) {
  const auto mesh = generate_mesh(SquareSpec{{-0.5, -0.5}, {0.5, 0.5}, 2});
  const auto u = interpolate([](const Point2& p) { return std::exp(-10.0 * (p[0] * p[0] + p[1] * p[1])); }, mesh);
  EXPECT_EQ(u[4], 1.0);
}

TEST(Interpolate, NonFiniteNamesNode) {
  try {
    interpolate([](const Point2& p) { return p[0] > 0.9 ? std::nan("") : 0.0; }, unit_square(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
    EXPECT_NE(std::string(e.what()).find("node 1"), std::string::npos);
  }
}

TEST(DiscreteNorms, Constant) {
  const auto mesh = unit_square(3);
  const auto n = discrete_norms(Vector::Ones(16), mesh);
  EXPECT_NEAR(n.l2, 1.0, 1e-14);
  EXPECT_NEAR(n.h1_semi, 0.0, 1e-7);
}

TEST(DiscreteNorms, LinearFunction) {
  const auto mesh = unit_square(3);
  const auto u = interpolate([](const Point2& p) { return p[0]; }, mesh);
  const auto n = discrete_norms(u, mesh);
  EXPECT_NEAR(n.h1_semi, 1.0, 1e-14);
  EXPECT_NEAR(n.l2, 1.0 / std::sqrt(3.0), 1e-14);
}

TEST(DiscreteNorms, SizeMismatch) {
  EXPECT_THROW(discrete_norms(Vector::Ones(3), unit_square(1)), Error);
}

TEST(DiscreteNorms, CurveConstant) {
  const auto curve = square_loop();
  const auto n = discrete_norms(Vector::Ones(4), curve);
  EXPECT_NEAR(n.l2, 2.0, 1e-14);
  EXPECT_NEAR(n.h1_semi, 0.0, 1e-7);
}
