#pragma once

// Triangulations of the macroscopic domain and of the unit cell, the
// membrane curve induced by a cell mesh, and periodic node identification.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tsfem/error.hpp"

namespace tsfem {

using Point2 = std::array<double, 2>;

enum class DomainTag { macro, cell_interior, cell_exterior };
enum class BoundaryMarker { outer, hole };

inline std::string_view to_string(BoundaryMarker marker) noexcept {
  return marker == BoundaryMarker::outer ? "outer" : "hole";
}

struct BoundaryEdge {
  std::array<std::size_t, 2> nodes{};
  BoundaryMarker marker = BoundaryMarker::outer;

  friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

struct TriMesh {
  std::vector<Point2> nodes;
  std::vector<std::array<std::size_t, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<std::vector<std::size_t>> periodic_classes;
  DomainTag domain_tag = DomainTag::macro;

  std::size_t node_count() const noexcept { return nodes.size(); }
  std::size_t triangle_count() const noexcept { return triangles.size(); }
};

/// Closed polygonal curve. Node k is joined to node k+1 (mod n) by segment k
/// for curves produced by extract_boundary_curve; general segment lists are
/// accepted and checked by validate().
struct CurveMesh {
  std::vector<Point2> nodes;
  std::vector<std::array<std::size_t, 2>> segments;
  std::vector<std::size_t> parent_indices;

  std::size_t node_count() const noexcept { return nodes.size(); }
};

struct MeshStats {
  double h_max = 0.0;
  double min_angle = 0.0;  // degrees
  double total_area = 0.0;
  std::size_t node_count = 0;
  std::size_t triangle_count = 0;
};

// ---------------------------------------------------------------------------
// geometry helpers

inline double distance(const Point2& a, const Point2& b) noexcept {
  return std::hypot(b[0] - a[0], b[1] - a[1]);
}

/// Twice the signed area of (a, b, c); positive for counter-clockwise order.
inline double orient2d(const Point2& a, const Point2& b, const Point2& c) noexcept {
  return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
}

inline double triangle_area(const TriMesh& mesh, std::size_t t) noexcept {
  const auto& tri = mesh.triangles[t];
  return 0.5 * orient2d(mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]);
}

inline double total_area(const TriMesh& mesh) noexcept {
  double area = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) area += triangle_area(mesh, t);
  return area;
}

inline double segment_length(const CurveMesh& curve, std::size_t s) noexcept {
  return distance(curve.nodes[curve.segments[s][0]], curve.nodes[curve.segments[s][1]]);
}

inline double total_length(const CurveMesh& curve) noexcept {
  double length = 0.0;
  for (std::size_t s = 0; s < curve.segments.size(); ++s) length += segment_length(curve, s);
  return length;
}

inline std::string format_point(const Point2& p) {
  std::ostringstream os;
  os.precision(17);
  os << '(' << p[0] << ", " << p[1] << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// validation

inline void validate(const TriMesh& mesh) {
  const std::size_t n = mesh.nodes.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(mesh.nodes[i][0]) || !std::isfinite(mesh.nodes[i][1]))
      fail(ErrorKind::validation, "node " + std::to_string(i) + " has a non-finite coordinate");
  }
  std::map<std::pair<std::size_t, std::size_t>, int> edge_use;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (auto v : tri) {
      if (v >= n)
        fail(ErrorKind::validation, "triangle " + std::to_string(t) + " references node " +
                                        std::to_string(v) + " but the mesh has " +
                                        std::to_string(n) + " nodes");
    }
    if (!(triangle_area(mesh, t) > 0.0))
      fail(ErrorKind::validation,
           "triangle " + std::to_string(t) + " has non-positive signed area");
    for (int e = 0; e < 3; ++e) {
      auto a = tri[e], b = tri[(e + 1) % 3];
      ++edge_use[{std::min(a, b), std::max(a, b)}];
    }
  }
  std::map<std::pair<std::size_t, std::size_t>, int> boundary_use;
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    auto [a, b] = mesh.boundary_edges[e].nodes;
    if (a >= n || b >= n)
      fail(ErrorKind::validation, "boundary edge " + std::to_string(e) + " index out of range");
    ++boundary_use[{std::min(a, b), std::max(a, b)}];
  }
  for (const auto& [edge, count] : edge_use) {
    if (count > 2)
      fail(ErrorKind::validation, "edge (" + std::to_string(edge.first) + ", " +
                                      std::to_string(edge.second) + ") is shared by " +
                                      std::to_string(count) + " triangles");
    const bool marked = boundary_use.count(edge) != 0;
    if (count == 1 && !marked)
      fail(ErrorKind::validation, "edge (" + std::to_string(edge.first) + ", " +
                                      std::to_string(edge.second) +
                                      ") lies on the boundary but carries no marker");
    if (count == 2 && marked)
      fail(ErrorKind::validation, "boundary edge (" + std::to_string(edge.first) + ", " +
                                      std::to_string(edge.second) + ") is interior");
  }
  for (const auto& [edge, count] : boundary_use) {
    if (count != 1 || edge_use.count(edge) == 0)
      fail(ErrorKind::validation, "boundary edge (" + std::to_string(edge.first) + ", " +
                                      std::to_string(edge.second) +
                                      ") is duplicated or not a triangle edge");
  }
  std::vector<char> seen(n, 0);
  for (const auto& cls : mesh.periodic_classes) {
    for (auto v : cls) {
      if (v >= n) fail(ErrorKind::validation, "periodic class index out of range");
      if (seen[v]) fail(ErrorKind::validation, "node " + std::to_string(v) + " is in two periodic classes");
      seen[v] = 1;
    }
  }
}

inline void validate(const CurveMesh& curve) {
  const std::size_t n = curve.nodes.size();
  if (n < 3 || curve.segments.size() != n)
    fail(ErrorKind::topology, "curve must be a single closed loop (nodes " + std::to_string(n) +
                                  ", segments " + std::to_string(curve.segments.size()) + ")");
  std::vector<std::array<std::size_t, 2>> adjacent(n, {n, n});
  std::vector<int> degree(n, 0);
  for (std::size_t s = 0; s < curve.segments.size(); ++s) {
    auto [a, b] = curve.segments[s];
    if (a >= n || b >= n || a == b)
      fail(ErrorKind::topology, "curve segment " + std::to_string(s) + " is invalid");
    for (auto [u, v] : {std::pair{a, b}, std::pair{b, a}}) {
      if (degree[u] >= 2)
        fail(ErrorKind::topology, "curve node " + std::to_string(u) + " has degree above 2");
      adjacent[u][degree[u]++] = v;
    }
    if (!(segment_length(curve, s) > 0.0))
      fail(ErrorKind::topology, "curve segment " + std::to_string(s) + " has zero length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (degree[i] != 2)
      fail(ErrorKind::topology, "curve node " + std::to_string(i) + " has degree " +
                                    std::to_string(degree[i]) + " (curve must be closed)");
  }
  std::size_t visited = 1, previous = 0, current = adjacent[0][0];
  while (current != 0) {
    const std::size_t next = adjacent[current][0] == previous ? adjacent[current][1] : adjacent[current][0];
    previous = current;
    current = next;
    if (++visited > n) break;
  }
  if (visited != n) fail(ErrorKind::topology, "curve consists of more than one loop");
  if (!curve.parent_indices.empty()) {
    if (curve.parent_indices.size() != n)
      fail(ErrorKind::topology, "parent index map has the wrong size");
    auto sorted = curve.parent_indices;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      fail(ErrorKind::topology, "parent index map is not injective");
  }
}

// ---------------------------------------------------------------------------
// statistics

inline MeshStats mesh_stats(const TriMesh& mesh) {
  MeshStats stats;
  stats.node_count = mesh.nodes.size();
  stats.triangle_count = mesh.triangles.size();
  stats.min_angle = 180.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    std::array<double, 3> len{};
    for (int e = 0; e < 3; ++e)
      len[e] = distance(mesh.nodes[tri[(e + 1) % 3]], mesh.nodes[tri[(e + 2) % 3]]);
    for (int e = 0; e < 3; ++e) {
      stats.h_max = std::max(stats.h_max, len[e]);
      const double a = len[e], b = len[(e + 1) % 3], c = len[(e + 2) % 3];
      const double cosine = std::clamp((b * b + c * c - a * a) / (2.0 * b * c), -1.0, 1.0);
      stats.min_angle = std::min(stats.min_angle, std::acos(cosine) * 180.0 / std::numbers::pi);
    }
    stats.total_area += triangle_area(mesh, t);
  }
  if (mesh.triangles.empty()) stats.min_angle = 0.0;
  return stats;
}

inline double curve_h_max(const CurveMesh& curve) noexcept {
  double h = 0.0;
  for (std::size_t s = 0; s < curve.segments.size(); ++s) h = std::max(h, segment_length(curve, s));
  return h;
}

// ---------------------------------------------------------------------------
// geometry specifications

/// Maps of the closed unit disc onto a cell shape.
struct IdentityMap {};
struct EllipseMap {
  double a = 1.0;  // semi-axis along x1
  double b = 1.0;  // semi-axis along x2
};
/// (u1, u2) -> (u1 - 0.2 + u2^2, u2): the image of the unit disc is
/// {(x1 + 0.2 - x2^2)^2 + x2^2 < 1}.
struct DziukMap {};
using DiscMap = std::variant<IdentityMap, EllipseMap, DziukMap>;

/// Ellipse {c1 x1^2 + c2 x2^2 < 1}.
inline EllipseMap ellipse_from_coefficients(double c1, double c2) {
  if (!(c1 > 0.0) || !(c2 > 0.0)) fail(ErrorKind::geometry, "ellipse coefficients must be positive");
  return {1.0 / std::sqrt(c1), 1.0 / std::sqrt(c2)};
}

inline EllipseMap circle_map(double radius) { return {radius, radius}; }

inline Point2 map_point(const DiscMap& map, const Point2& u) {
  return std::visit(
      [&](const auto& m) -> Point2 {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IdentityMap>) {
          return u;
        } else if constexpr (std::is_same_v<M, EllipseMap>) {
          return {m.a * u[0], m.b * u[1]};
        } else {
          return {u[0] - 0.2 + u[1] * u[1], u[1]};
        }
      },
      map);
}

inline double map_jacobian(const DiscMap& map, const Point2&) {
  return std::visit(
      [](const auto& m) -> double {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, IdentityMap>) {
          return 1.0;
        } else if constexpr (std::is_same_v<M, EllipseMap>) {
          return m.a * m.b;
        } else {
          return 1.0;
        }
      },
      map);
}

/// Exact area enclosed by the image of the unit disc.
inline double mapped_disc_area(const DiscMap& map) {
  return std::numbers::pi * map_jacobian(map, {0.0, 0.0});
}

struct SquareSpec {
  Point2 lower{0.0, 0.0};
  Point2 upper{1.0, 1.0};
  std::size_t n = 1;  // cells per side at level 0
};

/// Structured disc of `rings` concentric rings; ring k carries
/// k * segments / rings nodes so the rim has `segments` nodes and the
/// tangential spacing is uniform. The node count is 1 + segments*(rings+1)/2.
struct MappedDiscSpec {
  DiscMap map = IdentityMap{};
  std::size_t rings = 1;
  std::size_t segments = 4;
};

/// Square with one star-shaped hole. The hole is either the image of the unit
/// circle under a disc map (sampled at `segments` equally spaced parameter
/// angles) or an explicit counter-clockwise polygon whose node 0 points along
/// +x from the star centre.
struct PerforatedSquareSpec {
  std::variant<DiscMap, std::vector<Point2>> hole = DiscMap{IdentityMap{}};
  std::optional<Point2> star_centre;
  Point2 lower{-2.0, -2.0};
  Point2 upper{2.0, 2.0};
  std::size_t segments = 32;  // multiple of 8
  std::size_t layers = 16;
  double grading = 2.0;  // outermost / innermost layer thickness
  /// sinh stretching of the outer nodes toward the face midpoints; 0 keeps
  /// them uniform. The same stretching is used on every half side, so
  /// opposite faces still match.
  double clustering = 0.0;
};

using GeometrySpec = std::variant<SquareSpec, MappedDiscSpec, PerforatedSquareSpec>;

namespace detail {

inline void check_square(const Point2& lower, const Point2& upper) {
  if (!(upper[0] > lower[0]) || !(upper[1] > lower[1]))
    fail(ErrorKind::geometry, "square bounds are empty");
}

inline TriMesh make_square(const SquareSpec& spec, std::size_t n) {
  check_square(spec.lower, spec.upper);
  if (n == 0) fail(ErrorKind::geometry, "square grid needs n >= 1");
  TriMesh mesh;
  const std::size_t row = n + 1;
  mesh.nodes.reserve(row * row);
  for (std::size_t j = 0; j <= n; ++j) {
    const double y = j == n ? spec.upper[1]
                            : spec.lower[1] + (spec.upper[1] - spec.lower[1]) * static_cast<double>(j) / static_cast<double>(n);
    for (std::size_t i = 0; i <= n; ++i) {
      const double x = i == n ? spec.upper[0]
                              : spec.lower[0] + (spec.upper[0] - spec.lower[0]) * static_cast<double>(i) / static_cast<double>(n);
      mesh.nodes.push_back({x, y});
    }
  }
  auto id = [row](std::size_t i, std::size_t j) { return j * row + i; };
  mesh.triangles.reserve(2 * n * n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  for (std::size_t i = 0; i < n; ++i) mesh.boundary_edges.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryMarker::outer});
  for (std::size_t j = 0; j < n; ++j) mesh.boundary_edges.push_back({{id(n, j), id(n, j + 1)}, BoundaryMarker::outer});
  for (std::size_t i = n; i > 0; --i) mesh.boundary_edges.push_back({{id(i, n), id(i - 1, n)}, BoundaryMarker::outer});
  for (std::size_t j = n; j > 0; --j) mesh.boundary_edges.push_back({{id(0, j), id(0, j - 1)}, BoundaryMarker::outer});
  return mesh;
}

inline Point2 unit_circle(double angle) { return {std::cos(angle), std::sin(angle)}; }

inline TriMesh make_mapped_disc(const MappedDiscSpec& spec, std::size_t rings, std::size_t segments) {
  if (rings == 0 || segments % rings != 0 || segments / rings < 3)
    fail(ErrorKind::geometry, "mapped disc needs segments divisible by rings with at least 3 nodes on ring 1");
  const std::size_t per_ring = segments / rings;
  const double two_pi = 2.0 * std::numbers::pi;
  TriMesh mesh;
  mesh.domain_tag = DomainTag::cell_interior;
  std::vector<std::size_t> ring_start(rings + 1, 0);
  mesh.nodes.push_back({0.0, 0.0});
  for (std::size_t k = 1; k <= rings; ++k) {
    ring_start[k] = mesh.nodes.size();
    const std::size_t count = k * per_ring;
    const double radius = static_cast<double>(k) / static_cast<double>(rings);
    for (std::size_t i = 0; i < count; ++i) {
      const auto dir = unit_circle(two_pi * static_cast<double>(i) / static_cast<double>(count));
      mesh.nodes.push_back(k == rings ? dir : Point2{radius * dir[0], radius * dir[1]});
    }
  }
  // centre fan
  for (std::size_t i = 0; i < per_ring; ++i)
    mesh.triangles.push_back({0, ring_start[1] + i, ring_start[1] + (i + 1) % per_ring});
  // strips between consecutive rings, merged by parameter angle
  for (std::size_t k = 2; k <= rings; ++k) {
    const std::size_t na = (k - 1) * per_ring, nb = k * per_ring;
    auto a = [&](std::size_t i) { return ring_start[k - 1] + i % na; };
    auto b = [&](std::size_t j) { return ring_start[k] + j % nb; };
    std::size_t i = 0, j = 0;
    while (i < na || j < nb) {
      const double next_a = static_cast<double>(i + 1) / static_cast<double>(na);
      const double next_b = static_cast<double>(j + 1) / static_cast<double>(nb);
      if (j < nb && (i == na || next_b <= next_a)) {
        mesh.triangles.push_back({a(i), b(j), b(j + 1)});
        ++j;
      } else {
        mesh.triangles.push_back({a(i), b(j), a(i + 1)});
        ++i;
      }
    }
  }
  for (std::size_t i = 0; i < segments; ++i)
    mesh.boundary_edges.push_back({{ring_start[rings] + i, ring_start[rings] + (i + 1) % segments}, BoundaryMarker::outer});
  for (auto& p : mesh.nodes) {
    const double jac = map_jacobian(spec.map, p);
    if (!(jac > 0.0) || !std::isfinite(jac))
      fail(ErrorKind::geometry, "disc map has a degenerate Jacobian at " + format_point(p));
    p = map_point(spec.map, p);
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    if (!(triangle_area(mesh, t) > 0.0))
      fail(ErrorKind::geometry, "mapped disc triangle " + std::to_string(t) + " is inverted");
  }
  return mesh;
}

inline bool segments_cross(const Point2& p, const Point2& q, const Point2& a, const Point2& b) {
  const double d1 = orient2d(p, q, a), d2 = orient2d(p, q, b);
  const double d3 = orient2d(a, b, p), d4 = orient2d(a, b, q);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

/// Point on the boundary of [lower, upper]^2 for parameter index i of s,
/// walking counter-clockwise from the midpoint of the right face with s/8
/// equal steps per half side.
inline Point2 square_perimeter_point(const Point2& lower, const Point2& upper, std::size_t i, std::size_t s,
                                     double clustering = 0.0) {
  const std::size_t m = s / 8;
  const std::size_t half_side = (i / m) % 8;
  double f = static_cast<double>(i % m) / static_cast<double>(m);
  if (clustering > 0.0) {
    // distance from the face midpoint is stretched; even half sides start at
    // a midpoint, odd ones end there
    const bool from_mid = half_side % 2 == 0;
    const double g = from_mid ? f : 1.0 - f;
    const double stretched = std::sinh(clustering * g) / std::sinh(clustering);
    f = from_mid ? stretched : 1.0 - stretched;
  }
  const double xc = 0.5 * (lower[0] + upper[0]), yc = 0.5 * (lower[1] + upper[1]);
  const std::array<Point2, 9> corners = {Point2{upper[0], yc}, Point2{upper[0], upper[1]}, Point2{xc, upper[1]},
                                         Point2{lower[0], upper[1]}, Point2{lower[0], yc}, Point2{lower[0], lower[1]},
                                         Point2{xc, lower[1]}, Point2{upper[0], lower[1]}, Point2{upper[0], yc}};
  const Point2& p0 = corners[half_side];
  const Point2& p1 = corners[half_side + 1];
  Point2 p{p0[0] + f * (p1[0] - p0[0]), p0[1] + f * (p1[1] - p0[1])};
  // faces are exactly axis aligned
  if (half_side == 0 || half_side == 7) p[0] = upper[0];
  if (half_side == 3 || half_side == 4) p[0] = lower[0];
  if (half_side == 1 || half_side == 2) p[1] = upper[1];
  if (half_side == 5 || half_side == 6) p[1] = lower[1];
  return p;
}

/// Points of the mapped unit circle hit by the rays from `centre` through each
/// of `targets`. The polar angle about the centre is monotone in the circle
/// parameter for star-shaped images; it is tabulated and inverted by bisection.
inline std::vector<Point2> radial_curve_points(const DiscMap& map, const Point2& centre, const std::vector<Point2>& targets) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  constexpr std::size_t samples = 4096;
  auto polar = [&](double theta) {
    const Point2 p = map_point(map, unit_circle(theta));
    return std::atan2(p[1] - centre[1], p[0] - centre[0]);
  };
  // unwrapped polar angle on a uniform parameter grid
  std::vector<double> alpha(samples + 1);
  alpha[0] = polar(0.0);
  for (std::size_t k = 1; k <= samples; ++k) {
    const double raw = polar(two_pi * static_cast<double>(k) / samples);
    double step = raw - std::remainder(alpha[k - 1], two_pi);
    step = std::remainder(step, two_pi);
    if (!(step > 0.0)) fail(ErrorKind::geometry, "hole is not star-shaped about " + format_point(centre));
    alpha[k] = alpha[k - 1] + step;
  }
  if (std::abs(alpha[samples] - alpha[0] - two_pi) > 1e-9)
    fail(ErrorKind::geometry, "hole does not wind once around " + format_point(centre));
  std::vector<Point2> out;
  out.reserve(targets.size());
  for (const auto& q : targets) {
    double phi = std::atan2(q[1] - centre[1], q[0] - centre[0]);
    while (phi < alpha[0]) phi += two_pi;
    while (phi >= alpha[0] + two_pi) phi -= two_pi;
    const auto it = std::upper_bound(alpha.begin(), alpha.end(), phi);
    const std::size_t k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - alpha.begin(), 1)) - 1;
    double lo = two_pi * static_cast<double>(k) / samples, hi = two_pi * static_cast<double>(k + 1) / samples;
    const double base = alpha[k];
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      const double a = base + std::remainder(polar(mid) - base, two_pi);
      (a < phi ? lo : hi) = mid;
    }
    out.push_back(map_point(map, unit_circle(0.5 * (lo + hi))));
  }
  return out;
}

inline std::vector<Point2> hole_polygon(const PerforatedSquareSpec& spec, std::size_t level) {
  if (const auto* map = std::get_if<DiscMap>(&spec.hole)) {
    const std::size_t s = spec.segments << level;
    std::vector<Point2> outer(s);
    for (std::size_t i = 0; i < s; ++i) outer[i] = square_perimeter_point(spec.lower, spec.upper, i, s, spec.clustering);
    const Point2 centre = spec.star_centre ? *spec.star_centre : map_point(*map, {0.0, 0.0});
    return radial_curve_points(*map, centre, outer);
  }
  auto poly = std::get<std::vector<Point2>>(spec.hole);
  for (std::size_t l = 0; l < level; ++l) {
    std::vector<Point2> refined;
    refined.reserve(2 * poly.size());
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& a = poly[i];
      const auto& b = poly[(i + 1) % poly.size()];
      refined.push_back(a);
      refined.push_back({0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])});
    }
    poly = std::move(refined);
  }
  return poly;
}

inline TriMesh make_perforated_square(const PerforatedSquareSpec& spec, std::size_t level) {
  check_square(spec.lower, spec.upper);
  const auto hole = hole_polygon(spec, level);
  const std::size_t s = hole.size();
  const std::size_t layers = spec.layers << level;
  if (s < 8 || s % 8 != 0) fail(ErrorKind::geometry, "hole polygon needs a multiple of 8 nodes");
  if (layers == 0) fail(ErrorKind::geometry, "perforated square needs at least one layer");
  if (!(spec.grading > 0.0)) fail(ErrorKind::geometry, "layer grading must be positive");

  Point2 centre{0.0, 0.0};
  if (spec.star_centre) {
    centre = *spec.star_centre;
  } else if (const auto* map = std::get_if<DiscMap>(&spec.hole)) {
    centre = map_point(*map, {0.0, 0.0});
  } else {
    for (const auto& p : hole) centre = {centre[0] + p[0] / static_cast<double>(s), centre[1] + p[1] / static_cast<double>(s)};
  }
  for (const auto& p : hole) {
    if (!(p[0] > spec.lower[0] && p[0] < spec.upper[0] && p[1] > spec.lower[1] && p[1] < spec.upper[1]))
      fail(ErrorKind::geometry, "hole node " + format_point(p) + " is not strictly inside the square");
  }

  std::vector<Point2> outer(s);
  for (std::size_t i = 0; i < s; ++i) outer[i] = square_perimeter_point(spec.lower, spec.upper, i, s, spec.clustering);

  // star-shapedness: rays from the centre and blend segments must not cross the hole
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t e = 0; e < s; ++e) {
      const std::size_t e1 = (e + 1) % s;
      if (e == i || e1 == i) continue;
      if (segments_cross(centre, hole[i], hole[e], hole[e1]) || segments_cross(hole[i], outer[i], hole[e], hole[e1]))
        fail(ErrorKind::geometry, "hole is not star-shaped: blend ray through " + format_point(hole[i]) +
                                      " crosses the hole boundary");
    }
    if (!(orient2d(hole[i], hole[(i + 1) % s], centre) > 0.0))
      fail(ErrorKind::geometry, "hole is not star-shaped about " + format_point(centre));
  }

  std::vector<double> t(layers + 1, 0.0);
  {
    const double ratio = layers > 1 ? std::pow(spec.grading, 1.0 / static_cast<double>(layers - 1)) : 1.0;
    double thickness = 1.0, sum = 0.0;
    for (std::size_t k = 1; k <= layers; ++k) {
      sum += thickness;
      t[k] = sum;
      thickness *= ratio;
    }
    for (auto& v : t) v /= sum;
    t[layers] = 1.0;
  }

  TriMesh mesh;
  mesh.domain_tag = DomainTag::cell_exterior;
  mesh.nodes.reserve(s * (layers + 1));
  for (std::size_t k = 0; k <= layers; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      if (k == 0) {
        mesh.nodes.push_back(hole[i]);
      } else if (k == layers) {
        mesh.nodes.push_back(outer[i]);
      } else {
        mesh.nodes.push_back({hole[i][0] + t[k] * (outer[i][0] - hole[i][0]),
                              hole[i][1] + t[k] * (outer[i][1] - hole[i][1])});
      }
    }
  }
  auto id = [s](std::size_t k, std::size_t i) { return k * s + i % s; };
  mesh.triangles.reserve(2 * s * layers);
  for (std::size_t k = 0; k < layers; ++k) {
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t a = id(k, i), b = id(k, i + 1), c = id(k + 1, i + 1), d = id(k + 1, i);
      const auto& P = mesh.nodes;
      const std::array<std::size_t, 3> ac1{a, d, c}, ac2{a, c, b}, bd1{a, d, b}, bd2{b, d, c};
      auto positive = [&](const std::array<std::size_t, 3>& tri) { return orient2d(P[tri[0]], P[tri[1]], P[tri[2]]) > 0.0; };
      const bool ac_ok = positive(ac1) && positive(ac2);
      const bool bd_ok = positive(bd1) && positive(bd2);
      const bool prefer_ac = distance(P[a], P[c]) <= distance(P[b], P[d]);
      if (ac_ok && (prefer_ac || !bd_ok)) {
        mesh.triangles.push_back(ac1);
        mesh.triangles.push_back(ac2);
      } else if (bd_ok) {
        mesh.triangles.push_back(bd1);
        mesh.triangles.push_back(bd2);
      } else {
        fail(ErrorKind::geometry, "radial blend produced an inverted cell near " + format_point(P[a]) +
                                      " (hole not star-shaped with respect to the square)");
      }
    }
  }
  for (std::size_t i = 0; i < s; ++i) {
    mesh.boundary_edges.push_back({{id(0, i + 1), id(0, i)}, BoundaryMarker::hole});
    mesh.boundary_edges.push_back({{id(layers, i), id(layers, i + 1)}, BoundaryMarker::outer});
  }
  return mesh;
}

}  // namespace detail

/// Builds the triangulation described by `spec`; each level doubles the
/// resolution in every direction.
inline TriMesh generate_mesh(const GeometrySpec& spec, unsigned level = 0) {
  TriMesh mesh = std::visit(
      [level](const auto& g) -> TriMesh {
        using G = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<G, SquareSpec>) {
          return detail::make_square(g, g.n << level);
        } else if constexpr (std::is_same_v<G, MappedDiscSpec>) {
          return detail::make_mapped_disc(g, g.rings << level, g.segments << level);
        } else {
          return detail::make_perforated_square(g, level);
        }
      },
      spec);
  validate(mesh);
  return mesh;
}

// ---------------------------------------------------------------------------
// boundary curve

inline CurveMesh extract_boundary_curve(const TriMesh& mesh, BoundaryMarker marker) {
  std::map<std::size_t, std::vector<std::size_t>> adjacency;
  std::optional<std::array<std::size_t, 2>> first;
  for (const auto& edge : mesh.boundary_edges) {
    if (edge.marker != marker) continue;
    if (!first) first = edge.nodes;
    adjacency[edge.nodes[0]].push_back(edge.nodes[1]);
    adjacency[edge.nodes[1]].push_back(edge.nodes[0]);
  }
  if (!first)
    fail(ErrorKind::topology, "mesh has no boundary edges marked '" + std::string(to_string(marker)) + "'");
  for (const auto& [node, nbrs] : adjacency) {
    if (nbrs.size() != 2)
      fail(ErrorKind::topology, "boundary node " + std::to_string(node) + " has " + std::to_string(nbrs.size()) +
                                    " marked edges; marked edges must form one closed loop");
  }
  CurveMesh curve;
  std::size_t previous = (*first)[0], current = (*first)[1];
  curve.parent_indices.push_back(previous);
  while (current != (*first)[0]) {
    curve.parent_indices.push_back(current);
    const auto& nbrs = adjacency[current];
    const std::size_t next = nbrs[0] == previous ? nbrs[1] : nbrs[0];
    previous = current;
    current = next;
    if (curve.parent_indices.size() > adjacency.size()) break;
  }
  if (curve.parent_indices.size() != adjacency.size())
    fail(ErrorKind::topology, "marked boundary edges form more than one loop");
  const std::size_t n = curve.parent_indices.size();
  curve.nodes.reserve(n);
  for (auto p : curve.parent_indices) curve.nodes.push_back(mesh.nodes[p]);
  for (std::size_t k = 0; k < n; ++k) curve.segments.push_back({k, (k + 1) % n});
  validate(curve);
  return curve;
}

// ---------------------------------------------------------------------------
// periodic matching

struct PeriodVectors {
  Point2 first{1.0, 0.0};
  Point2 second{0.0, 1.0};
};

inline double mesh_diameter(const TriMesh& mesh) {
  if (mesh.nodes.empty()) return 0.0;
  Point2 lo = mesh.nodes.front(), hi = lo;
  for (const auto& p : mesh.nodes) {
    lo = {std::min(lo[0], p[0]), std::min(lo[1], p[1])};
    hi = {std::max(hi[0], p[0]), std::max(hi[1], p[1])};
  }
  return distance(lo, hi);
}

inline double default_matching_tolerance(const TriMesh& mesh) { return 1e-9 * mesh_diameter(mesh); }

/// Identifies outer boundary nodes that coincide after translation by a
/// period vector. Corners end up in one class of four.
inline TriMesh match_periodic_nodes(TriMesh mesh, const PeriodVectors& period, double tol) {
  std::vector<std::size_t> boundary;
  for (const auto& edge : mesh.boundary_edges) {
    if (edge.marker != BoundaryMarker::outer) continue;
    boundary.push_back(edge.nodes[0]);
    boundary.push_back(edge.nodes[1]);
  }
  std::sort(boundary.begin(), boundary.end());
  boundary.erase(std::unique(boundary.begin(), boundary.end()), boundary.end());
  if (boundary.empty()) fail(ErrorKind::matching, "mesh has no outer boundary to match");

  Point2 lo = mesh.nodes[boundary.front()], hi = lo;
  for (auto v : boundary) {
    const auto& p = mesh.nodes[v];
    lo = {std::min(lo[0], p[0]), std::min(lo[1], p[1])};
    hi = {std::max(hi[0], p[0]), std::max(hi[1], p[1])};
  }
  // sort by x for a windowed search
  std::vector<std::size_t> by_x = boundary;
  std::sort(by_x.begin(), by_x.end(), [&](auto a, auto b) { return mesh.nodes[a][0] < mesh.nodes[b][0]; });

  std::vector<std::size_t> parent(mesh.nodes.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  std::vector<char> matched(mesh.nodes.size(), 0);
  auto lookup = [&](const Point2& q) -> std::optional<std::size_t> {
    auto it = std::lower_bound(by_x.begin(), by_x.end(), q[0] - tol,
                               [&](std::size_t v, double x) { return mesh.nodes[v][0] < x; });
    for (; it != by_x.end() && mesh.nodes[*it][0] <= q[0] + tol; ++it) {
      if (std::abs(mesh.nodes[*it][1] - q[1]) <= tol) return *it;
    }
    return std::nullopt;
  };
  const std::array<Point2, 4> shifts = {period.first, Point2{-period.first[0], -period.first[1]}, period.second,
                                        Point2{-period.second[0], -period.second[1]}};
  for (auto v : boundary) {
    const auto& p = mesh.nodes[v];
    for (const auto& shift : shifts) {
      const Point2 q{p[0] + shift[0], p[1] + shift[1]};
      if (q[0] < lo[0] - tol || q[0] > hi[0] + tol || q[1] < lo[1] - tol || q[1] > hi[1] + tol) continue;
      const auto partner = lookup(q);
      if (!partner)
        fail(ErrorKind::matching, "boundary node " + std::to_string(v) + " at " + format_point(p) +
                                      " has no periodic partner near " + format_point(q));
      matched[v] = matched[*partner] = 1;
      const auto ra = find(v), rb = find(*partner);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  for (auto v : boundary) {
    if (!matched[v])
      fail(ErrorKind::matching, "boundary node " + std::to_string(v) + " at " + format_point(mesh.nodes[v]) +
                                    " has no periodic partner");
  }
  std::map<std::size_t, std::vector<std::size_t>> classes;
  for (auto v : boundary) classes[find(v)].push_back(v);
  mesh.periodic_classes.clear();
  for (auto& [root, members] : classes) {
    if (members.size() > 1) mesh.periodic_classes.push_back(std::move(members));
  }
  return mesh;
}

inline TriMesh match_periodic_nodes(TriMesh mesh, const PeriodVectors& period) {
  const double tol = default_matching_tolerance(mesh);
  return match_periodic_nodes(std::move(mesh), period, tol);
}

/// Period vectors spanning the bounding box of the outer boundary.
inline PeriodVectors bounding_box_period(const TriMesh& mesh) {
  Point2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
  Point2 hi{std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()};
  for (const auto& p : mesh.nodes) {
    lo = {std::min(lo[0], p[0]), std::min(lo[1], p[1])};
    hi = {std::max(hi[0], p[0]), std::max(hi[1], p[1])};
  }
  return {{hi[0] - lo[0], 0.0}, {0.0, hi[1] - lo[1]}};
}

/// Nodes that lie on a boundary edge with the given marker (or any marker).
inline std::vector<char> boundary_node_mask(const TriMesh& mesh, std::optional<BoundaryMarker> marker = std::nullopt) {
  std::vector<char> mask(mesh.nodes.size(), 0);
  for (const auto& edge : mesh.boundary_edges) {
    if (marker && edge.marker != *marker) continue;
    mask[edge.nodes[0]] = mask[edge.nodes[1]] = 1;
  }
  return mask;
}

}  // namespace tsfem
