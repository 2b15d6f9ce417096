#pragma once

// Macro ligand equation on Omega_h:
//   theta (C^n - C^{n-1}) / tau - div(D_hom grad C^n) = theta F_e(C^{n-1}) - g^{n-1}
// with lumped mass, Dirichlet elimination and natural zero flux elsewhere.

#include <cmath>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tsfem/assembly.hpp"
#include "tsfem/error.hpp"
#include "tsfem/micro_dynamics.hpp"
#include "tsfem/solver.hpp"

namespace tsfem {

/// Dirichlet part of the macro boundary; the rest is zero flux.
/// all_boundary and max_coordinate_below select boundary nodes only. A custom
/// predicate is evaluated on every node and must not select interior nodes.
struct BoundarySpec {
  enum class Kind { neumann, all_boundary, max_coordinate_below, custom };
  Kind kind = Kind::neumann;
  double threshold = 0.05;
  double value = 1.0;
  std::function<bool(const Point2&)> predicate;

  static BoundarySpec neumann() { return {}; }
  static BoundarySpec all_boundary(double value) { return {Kind::all_boundary, 0.0, value, {}}; }
  static BoundarySpec max_coordinate_below(double threshold, double value) {
    return {Kind::max_coordinate_below, threshold, value, {}};
  }
  static BoundarySpec custom(std::function<bool(const Point2&)> pred, double value) {
    return {Kind::custom, 0.0, value, std::move(pred)};
  }

  bool operator==(const BoundarySpec& o) const {
    return kind == o.kind && threshold == o.threshold && value == o.value && kind != Kind::custom;
  }
};

inline std::string_view to_string(BoundarySpec::Kind kind) noexcept {
  switch (kind) {
    case BoundarySpec::Kind::neumann: return "neumann";
    case BoundarySpec::Kind::all_boundary: return "all_boundary";
    case BoundarySpec::Kind::max_coordinate_below: return "max_coordinate_below";
    case BoundarySpec::Kind::custom: return "custom";
  }
  return "?";
}

inline BoundarySpec::Kind parse_boundary_kind(std::string_view name) {
  for (auto k : {BoundarySpec::Kind::neumann, BoundarySpec::Kind::all_boundary, BoundarySpec::Kind::max_coordinate_below}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::validation, "unknown boundary kind '" + std::string(name) +
                                  "' (expected neumann|all_boundary|max_coordinate_below)");
}

/// Nodes carrying the Dirichlet value, in increasing order.
inline std::vector<std::size_t> dirichlet_nodes(const TriMesh& mesh, const BoundarySpec& bc) {
  const auto on_boundary = boundary_node_mask(mesh);
  std::vector<std::size_t> nodes;
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    const auto& p = mesh.nodes[i];
    bool hit = false;
    switch (bc.kind) {
      case BoundarySpec::Kind::neumann: break;
      case BoundarySpec::Kind::all_boundary: hit = on_boundary[i]; break;
      case BoundarySpec::Kind::max_coordinate_below: hit = on_boundary[i] && std::max(p[0], p[1]) < bc.threshold; break;
      case BoundarySpec::Kind::custom:
        if (!bc.predicate) fail(ErrorKind::configuration, "custom boundary predicate is empty");
        hit = bc.predicate(p);
        if (hit && !on_boundary[i])
          fail(ErrorKind::configuration, "Dirichlet predicate selects interior node " + std::to_string(i) + " " + format_point(p));
        break;
    }
    if (hit) nodes.push_back(i);
  }
  return nodes;
}

struct MacroField {
  Vector values;
  std::size_t time_index = 0;
};

/// theta M + tau K(D_hom) restricted to the free nodes and factored once.
struct MacroOperator {
  double tau = 0.0;
  double theta = 1.0;
  Vector mass;                               // lumped macro mass
  std::vector<std::size_t> free_nodes;
  std::vector<std::size_t> fixed_nodes;      // Dirichlet nodes
  double dirichlet_value = 0.0;
  Vector dirichlet_rhs;                      // -A_fd g_D on the free nodes
  FactoredSpd system;

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(mass.size()); }
};

inline MacroOperator build_macro_operator(const TriMesh& omega, const Tensor2& d_hom, double theta, double tau,
                                          const BoundarySpec& bc) {
  if (omega.node_count() == 0 || omega.triangle_count() == 0) fail(ErrorKind::configuration, "macro mesh is empty");
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::configuration, "time step must be positive");
  if (!(theta > 0.0) || !(theta <= 1.0)) fail(ErrorKind::configuration, "porosity theta_e must lie in (0, 1]");
  if (!std::isfinite(bc.value)) fail(ErrorKind::configuration, "Dirichlet value is not finite");

  MacroOperator op;
  op.tau = tau;
  op.theta = theta;
  op.mass = assemble_lumped_mass(omega).values;
  op.dirichlet_value = bc.value;
  op.fixed_nodes = dirichlet_nodes(omega, bc);
  const std::size_t n = omega.node_count();
  std::vector<std::ptrdiff_t> index(n, -1);
  {
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (k < op.fixed_nodes.size() && op.fixed_nodes[k] == i) {
        ++k;
        continue;
      }
      index[i] = static_cast<std::ptrdiff_t>(op.free_nodes.size());
      op.free_nodes.push_back(i);
    }
  }
  if (op.free_nodes.empty()) fail(ErrorKind::configuration, "every macro node is a Dirichlet node");

  const auto full = combine(tau, assemble_stiffness(omega, d_hom), theta, assemble_lumped_mass(omega));
  SparseBuilder builder(op.free_nodes.size());
  op.dirichlet_rhs = Vector::Zero(static_cast<Eigen::Index>(op.free_nodes.size()));
  const auto rp = full.row_ptr();
  const auto ci = full.col_idx();
  const auto v = full.values();
  for (std::size_t r = 0; r < n; ++r) {
    if (index[r] < 0) continue;
    const auto row = static_cast<std::size_t>(index[r]);
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
      if (index[ci[k]] >= 0) {
        builder.add(row, static_cast<std::size_t>(index[ci[k]]), v[k]);
      } else {
        op.dirichlet_rhs[static_cast<Eigen::Index>(row)] -= v[k] * bc.value;
      }
    }
  }
  try {
    op.system = FactoredSpd(std::move(builder).build(true));
  } catch (const Error&) {
    fail(ErrorKind::configuration, "macro operator is not SPD");
  }
  return op;
}

/// Advances C^{n-1} to C^n. `coupling` holds g_k per macro node; `load`, if
/// given, is an assembled load vector entering as tau * load.
inline MacroField macro_step(const MacroField& c, const Vector& coupling, const ReactionSpec& spec, const MacroOperator& op,
                             const Vector* load = nullptr) {
  const auto n = static_cast<Eigen::Index>(op.node_count());
  if (c.values.size() != n || coupling.size() != n || (load && load->size() != n))
    fail(ErrorKind::input, "macro vectors do not match the macro mesh");
  Vector rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = c.values[i];
    rhs[i] = op.mass[i] * (op.theta * u + op.tau * (op.theta * spec.F_e(u) - coupling[i]));
  }
  if (load) rhs += op.tau * *load;
  Vector reduced(static_cast<Eigen::Index>(op.free_nodes.size()));
  for (std::size_t k = 0; k < op.free_nodes.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(op.free_nodes[k]);
    const double value = rhs[i];
    if (!std::isfinite(value))
      fail(ErrorKind::step, "non-finite load for c_e at macro node " + std::to_string(op.free_nodes[k]));
    reduced[static_cast<Eigen::Index>(k)] = value + op.dirichlet_rhs[static_cast<Eigen::Index>(k)];
  }
  const Vector x = op.system.solve(reduced);
  MacroField next{Vector(n), c.time_index + 1};
  for (std::size_t k = 0; k < op.free_nodes.size(); ++k)
    next.values[static_cast<Eigen::Index>(op.free_nodes[k])] = x[static_cast<Eigen::Index>(k)];
  for (auto i : op.fixed_nodes) next.values[static_cast<Eigen::Index>(i)] = op.dirichlet_value;
  return next;
}

/// theta * sum_i m_i C_i
inline double macro_mass(const MacroField& c, const MacroOperator& op) { return op.theta * op.mass.dot(c.values); }

}  // namespace tsfem
