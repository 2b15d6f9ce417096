#pragma once

// Micro-scale IMEX stepping at one macro node: four membrane species on the
// curve Gamma_h and the intracellular concentration on Y_{h,i}.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "tsfem/assembly.hpp"
#include "tsfem/cell_problem.hpp"
#include "tsfem/error.hpp"
#include "tsfem/mesh.hpp"
#include "tsfem/solver.hpp"

namespace tsfem {

/// Production term preset: zero, constant c, or linear alpha * u.
struct SourceTerm {
  enum class Kind { zero, constant, linear };
  Kind kind = Kind::zero;
  double value = 0.0;

  static SourceTerm zero() { return {}; }
  static SourceTerm constant(double c) { return {Kind::constant, c}; }
  static SourceTerm linear(double alpha) { return {Kind::linear, alpha}; }

  double operator()(double u) const noexcept {
    switch (kind) {
      case Kind::zero: return 0.0;
      case Kind::constant: return value;
      case Kind::linear: return value * u;
    }
    return 0.0;
  }
  bool is_zero() const noexcept { return kind == Kind::zero || value == 0.0; }

  friend bool operator==(const SourceTerm&, const SourceTerm&) = default;
};

inline std::string_view to_string(SourceTerm::Kind kind) noexcept {
  switch (kind) {
    case SourceTerm::Kind::zero: return "zero";
    case SourceTerm::Kind::constant: return "constant";
    case SourceTerm::Kind::linear: return "linear";
  }
  return "?";
}

/// Rate constants of
///   G_e = a_e c_e r_f - b_e r_b,  G_d = a_i r_b p_d - b_i p_a,  G_i = gamma_i p_a - kappa_i c_i
/// plus linear decay rates and production presets.
struct ReactionSpec {
  double a_e = 0.0, b_e = 0.0, a_i = 0.0, b_i = 0.0, gamma_i = 0.0, kappa_i = 0.0;
  double d_f = 0.0, d_b = 0.0, d_d = 0.0, d_a = 0.0;
  SourceTerm F_e, F_i, F_f, F_d;

  void validate() const {
    const std::pair<const char*, double> rates[] = {{"a_e", a_e}, {"b_e", b_e}, {"a_i", a_i}, {"b_i", b_i},
                                                    {"gamma_i", gamma_i}, {"kappa_i", kappa_i}, {"d_f", d_f},
                                                    {"d_b", d_b}, {"d_d", d_d}, {"d_a", d_a}};
    for (const auto& [name, v] : rates) {
      if (!(v >= 0.0) || !std::isfinite(v))
        fail(ErrorKind::validation, std::string("reactions.") + name + " must be a finite nonnegative rate");
    }
    const std::pair<const char*, const SourceTerm*> sources[] = {{"F_e", &F_e}, {"F_i", &F_i}, {"F_f", &F_f}, {"F_d", &F_d}};
    for (const auto& [name, f] : sources) {
      if (!std::isfinite(f->value)) fail(ErrorKind::validation, std::string("reactions.") + name + " is not finite");
    }
  }

  double ge(double c_e, double r_f, double r_b) const noexcept { return a_e * c_e * r_f - b_e * r_b; }
  double gd(double r_b, double p_d, double p_a) const noexcept { return a_i * r_b * p_d - b_i * p_a; }
  double gi(double p_a, double c_i) const noexcept { return gamma_i * p_a - kappa_i * c_i; }

  /// Step bound under which the explicit scheme keeps nonnegative states
  /// nonnegative: 0.5 / (total loss rate).
  double step_bound(double max_c_e, double max_p_d) const noexcept {
    const double rate = a_e * max_c_e + b_e + a_i * max_p_d + b_i + gamma_i + kappa_i + std::max({d_f, d_b, d_d, d_a});
    return rate > 0.0 ? 0.5 / rate : std::numeric_limits<double>::infinity();
  }

  friend bool operator==(const ReactionSpec&, const ReactionSpec&) = default;
};

struct MicroDiffusion {
  double d_f = 0.0, d_b = 0.0, d_d = 0.0, d_a = 0.0, d_i = 0.0;

  friend bool operator==(const MicroDiffusion&, const MicroDiffusion&) = default;
};

/// explicit_euler evaluates every reaction at the old level. lagged_implicit
/// solves the species in sequence with the forward consumptions (a_e, a_i,
/// gamma_i) implicit and the reverse transfers (b_e, b_i, kappa_i) explicit.
/// Positivity then constrains tau only through the reverse rates, not the
/// stiff forward ones. r_f + r_b + p_a + c_i balances exactly; p_d does not.
enum class ReactionTreatment { explicit_euler, lagged_implicit };

inline std::string_view to_string(ReactionTreatment t) noexcept {
  return t == ReactionTreatment::explicit_euler ? "explicit" : "lagged_implicit";
}

inline ReactionTreatment parse_reaction_treatment(std::string_view name) {
  if (name == "explicit") return ReactionTreatment::explicit_euler;
  if (name == "lagged_implicit") return ReactionTreatment::lagged_implicit;
  fail(ErrorKind::validation, "unknown reaction treatment '" + std::string(name) + "' (expected explicit|lagged_implicit)");
}

enum class Species { c_e, c_i, r_f, r_b, p_d, p_a };

inline constexpr std::array<Species, 4> surface_species = {Species::r_f, Species::r_b, Species::p_d, Species::p_a};

inline std::string_view to_string(Species s) noexcept {
  switch (s) {
    case Species::c_e: return "c_e";
    case Species::c_i: return "c_i";
    case Species::r_f: return "r_f";
    case Species::r_b: return "r_b";
    case Species::p_d: return "p_d";
    case Species::p_a: return "p_a";
  }
  return "?";
}

/// Intracellular mesh Y_{h,i} and its boundary curve Gamma_h.
struct MicroMeshes {
  TriMesh y_i;
  CurveMesh gamma;
};

inline MicroMeshes make_micro_meshes(const DiscMap& map, std::size_t rings, std::size_t segments, unsigned level = 0) {
  MicroMeshes m;
  m.y_i = generate_mesh(MappedDiscSpec{map, rings, segments}, level);
  m.gamma = extract_boundary_curve(m.y_i, BoundaryMarker::outer);
  return m;
}

struct MicroState {
  Vector r_f, r_b, p_d, p_a, c_i;
  std::size_t time_index = 0;
};

/// Read-only and writable views of one macro node's micro vectors. Columns of
/// a TwoScaleField bind to these without copies.
struct MicroConstView {
  Eigen::Ref<const Vector> r_f, r_b, p_d, p_a, c_i;
};
struct MicroView {
  Eigen::Ref<Vector> r_f, r_b, p_d, p_a, c_i;

  operator MicroConstView() const { return {r_f, r_b, p_d, p_a, c_i}; }
};

inline MicroConstView view(const MicroState& s) { return {s.r_f, s.r_b, s.p_d, s.p_a, s.c_i}; }
inline MicroView view(MicroState& s) { return {s.r_f, s.r_b, s.p_d, s.p_a, s.c_i}; }

/// Fixed data for the micro solves, shared read-only by all macro nodes.
struct MicroOperators {
  double tau = 0.0;
  ReactionTreatment treatment = ReactionTreatment::explicit_euler;
  /// 1/|Y| for the macro coupling integral.
  double coupling_scale = 1.0;
  std::vector<std::size_t> trace;  // Gamma_h node -> Y_{h,i} node
  Vector curve_mass;
  Vector bulk_mass;
  /// A_i = M_i + tau D_i K_i
  SparseOperator bulk_operator;
  FactoredSpd bulk;
  std::array<SparseOperator, 4> surface_operator;
  /// A_s = M_Gamma + tau (D_s K_Gamma + d_s M_Gamma), s = f, b, d, a, stored
  /// in cyclic tridiagonal form along the curve loop (node k - k+1)
  std::array<Vector, 4> lower, diag, upper;

  std::size_t surface_dofs() const noexcept { return static_cast<std::size_t>(curve_mass.size()); }
  std::size_t bulk_dofs() const noexcept { return static_cast<std::size_t>(bulk_mass.size()); }
};

inline MicroOperators build_micro_operators(const MicroMeshes& meshes, const MicroDiffusion& diffusion, const ReactionSpec& spec,
                                            double tau, double cell_volume = 1.0,
                                            ReactionTreatment treatment = ReactionTreatment::explicit_euler) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorKind::configuration, "time step must be positive");
  if (!(cell_volume > 0.0)) fail(ErrorKind::configuration, "cell volume must be positive");
  const std::array<double, 4> d_s = {diffusion.d_f, diffusion.d_b, diffusion.d_d, diffusion.d_a};
  const std::array<double, 4> decay = {spec.d_f, spec.d_b, spec.d_d, spec.d_a};
  for (int s = 0; s < 4; ++s) {
    if (!(d_s[s] >= 0.0) || !(decay[s] >= 0.0))
      fail(ErrorKind::configuration, std::string("negative diffusion or decay for ") + std::string(to_string(surface_species[s])));
  }
  if (!(diffusion.d_i >= 0.0)) fail(ErrorKind::configuration, "negative intracellular diffusion");

  MicroOperators ops;
  ops.tau = tau;
  ops.treatment = treatment;
  ops.coupling_scale = 1.0 / cell_volume;
  ops.trace = meshes.gamma.parent_indices;
  ops.curve_mass = assemble_curve_lumped_mass(meshes.gamma).values;
  ops.bulk_mass = assemble_lumped_mass(meshes.y_i).values;
  for (auto v : ops.trace) {
    if (v >= meshes.y_i.node_count()) fail(ErrorKind::configuration, "trace map points outside the intracellular mesh");
  }

  const std::size_t n = meshes.gamma.node_count();
  const auto k_gamma = assemble_curve_stiffness(meshes.gamma, 1.0);
  const auto m_gamma = DiagonalOperator{ops.curve_mass};
  for (int s = 0; s < 4; ++s) {
    const auto& a = ops.surface_operator[s] = combine(tau * d_s[s], k_gamma, 1.0 + tau * decay[s], m_gamma);
    auto& lo = ops.lower[s];
    auto& di = ops.diag[s];
    auto& up = ops.upper[s];
    lo.resize(static_cast<Eigen::Index>(n));
    di.resize(static_cast<Eigen::Index>(n));
    up.resize(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      lo[kk] = a.value(k, (k + n - 1) % n);
      di[kk] = a.value(k, k);
      up[kk] = a.value(k, (k + 1) % n);
    }
  }
  // the tridiagonal form relies on consecutive loop numbering
  for (std::size_t k = 0; k < n; ++k) {
    const auto& seg = meshes.gamma.segments[k];
    if (seg[0] != k || seg[1] != (k + 1) % n)
      fail(ErrorKind::configuration, "membrane curve is not numbered consecutively along the loop");
  }

  auto bulk = combine(tau * diffusion.d_i, assemble_stiffness(meshes.y_i, 1.0), 1.0, DiagonalOperator{ops.bulk_mass});
  try {
    ops.bulk = FactoredSpd(bulk);
    ops.bulk_operator = std::move(bulk);
  } catch (const Error&) {
    fail(ErrorKind::configuration, "intracellular operator is not SPD");
  }
  return ops;
}

namespace detail {

inline void check_load(const Vector& load, Species s) {
  for (Eigen::Index j = 0; j < load.size(); ++j) {
    if (!std::isfinite(load[j]))
      fail(ErrorKind::step, "non-finite reaction load for " + std::string(to_string(s)) + " at micro node " + std::to_string(j));
  }
}

}  // namespace detail

/// Advances one macro node's micro state from level n-1 to n. `c_e` is the
/// macro ligand value at this node at level n-1. `out` must not alias `in`.
inline void micro_step(const MicroConstView& in, MicroView out, double c_e, const ReactionSpec& spec,
                       const MicroOperators& ops) {
  const double tau = ops.tau;
  const Vector& m = ops.curve_mass;
  const auto N = static_cast<Eigen::Index>(ops.surface_dofs());
  const auto trace = [&](Eigen::Index j) { return static_cast<Eigen::Index>(ops.trace[static_cast<std::size_t>(j)]); };
  Vector rhs(N), bulk_rhs(static_cast<Eigen::Index>(ops.bulk_dofs()));
  for (Eigen::Index k = 0; k < bulk_rhs.size(); ++k)
    bulk_rhs[k] = ops.bulk_mass[k] * (in.c_i[k] + tau * spec.F_i(in.c_i[k]));

  const auto solve = [&](int s, Eigen::Ref<Vector> target, const Vector* loss) {
    detail::check_load(rhs, surface_species[s]);
    rhs.array() *= m.array();
    if (loss) {
      const Vector d = ops.diag[s] + tau * m.cwiseProduct(*loss);
      solve_cyclic_tridiagonal(ops.lower[s], d, ops.upper[s], rhs);
    } else {
      solve_cyclic_tridiagonal(ops.lower[s], ops.diag[s], ops.upper[s], rhs);
    }
    target = rhs;
  };

  if (ops.treatment == ReactionTreatment::explicit_euler) {
    std::array<Vector, 4> load{Vector(N), Vector(N), Vector(N), Vector(N)};
    for (Eigen::Index j = 0; j < N; ++j) {
      const double rf = in.r_f[j], rb = in.r_b[j], pd = in.p_d[j], pa = in.p_a[j];
      const double ge = spec.ge(c_e, rf, rb);
      const double gd = spec.gd(rb, pd, pa);
      const double gi = spec.gi(pa, in.c_i[trace(j)]);
      load[0][j] = rf + tau * (spec.F_f(rf) - ge);
      load[1][j] = rb + tau * (ge - gd);
      load[2][j] = pd + tau * (spec.F_d(pd) - gd);
      load[3][j] = pa + tau * (gd - gi);
      bulk_rhs[trace(j)] += tau * m[j] * gi;
    }
    const std::array<Eigen::Ref<Vector>*, 4> outs = {&out.r_f, &out.r_b, &out.p_d, &out.p_a};
    for (int s = 0; s < 4; ++s) {
      rhs = load[s];
      solve(s, *outs[s], nullptr);
    }
  } else {
    // Sequential sweep r_f, r_b, p_d, p_a, c_i. Forward transfers (a_e,
    // a_i, gamma_i) are implicit in the donor and enter the receiver with the
    // donor's new value. Reverse transfers (b_e, b_i, kappa_i) are explicit
    // on both sides. Either way the receiver gains exactly what the donor
    // lost.
    Vector loss(N);
    for (Eigen::Index j = 0; j < N; ++j) {
      rhs[j] = in.r_f[j] + tau * (spec.F_f(in.r_f[j]) + spec.b_e * in.r_b[j]);
      loss[j] = spec.a_e * c_e;
    }
    solve(0, out.r_f, &loss);
    for (Eigen::Index j = 0; j < N; ++j) {
      rhs[j] = in.r_b[j] + tau * (spec.a_e * c_e * out.r_f[j] + spec.b_i * in.p_a[j] - spec.b_e * in.r_b[j]);
      loss[j] = spec.a_i * in.p_d[j];
    }
    solve(1, out.r_b, &loss);
    for (Eigen::Index j = 0; j < N; ++j) {
      rhs[j] = in.p_d[j] + tau * (spec.F_d(in.p_d[j]) + spec.b_i * in.p_a[j]);
      loss[j] = spec.a_i * out.r_b[j];
    }
    solve(2, out.p_d, &loss);
    for (Eigen::Index j = 0; j < N; ++j) {
      rhs[j] = in.p_a[j] + tau * (spec.a_i * in.p_d[j] * out.r_b[j] + spec.kappa_i * in.c_i[trace(j)] - spec.b_i * in.p_a[j]);
      loss[j] = spec.gamma_i;
    }
    solve(3, out.p_a, &loss);
    for (Eigen::Index j = 0; j < N; ++j)
      bulk_rhs[trace(j)] += tau * m[j] * (spec.gamma_i * out.p_a[j] - spec.kappa_i * in.c_i[trace(j)]);
  }
  detail::check_load(bulk_rhs, Species::c_i);
  out.c_i = ops.bulk.solve(bulk_rhs);
}

inline MicroState micro_step(const MicroState& state, double c_e, const ReactionSpec& spec, const MicroOperators& ops) {
  MicroState next;
  next.r_f.resize(state.r_f.size());
  next.r_b.resize(state.r_b.size());
  next.p_d.resize(state.p_d.size());
  next.p_a.resize(state.p_a.size());
  next.c_i.resize(state.c_i.size());
  micro_step(view(state), view(next), c_e, spec, ops);
  next.time_index = state.time_index + 1;
  return next;
}

/// (1/|Y|) sum_j m_j G_e(c_e, r_f, r_b)_j
inline double coupling_flux(const MicroConstView& state, double c_e, const ReactionSpec& spec, const MicroOperators& ops) {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < ops.curve_mass.size(); ++j) sum += ops.curve_mass[j] * spec.ge(c_e, state.r_f[j], state.r_b[j]);
  return ops.coupling_scale * sum;
}

inline double coupling_flux(const MicroState& state, double c_e, const ReactionSpec& spec, const MicroOperators& ops) {
  return coupling_flux(view(state), c_e, spec, ops);
}

/// Micro states of every macro node, one matrix per species with one column
/// per macro node (structure of arrays).
struct TwoScaleField {
  Eigen::MatrixXd r_f, r_b, p_d, p_a, c_i;
  std::size_t time_index = 0;

  TwoScaleField() = default;
  TwoScaleField(std::size_t surface_dofs, std::size_t bulk_dofs, std::size_t macro_nodes) {
    const auto s = static_cast<Eigen::Index>(surface_dofs), b = static_cast<Eigen::Index>(bulk_dofs),
               m = static_cast<Eigen::Index>(macro_nodes);
    r_f = r_b = p_d = p_a = Eigen::MatrixXd::Zero(s, m);
    c_i = Eigen::MatrixXd::Zero(b, m);
  }

  std::size_t macro_nodes() const noexcept { return static_cast<std::size_t>(r_f.cols()); }

  MicroConstView node(std::size_t k) const {
    const auto c = static_cast<Eigen::Index>(k);
    return {r_f.col(c), r_b.col(c), p_d.col(c), p_a.col(c), c_i.col(c)};
  }
  MicroView node(std::size_t k) {
    const auto c = static_cast<Eigen::Index>(k);
    return {r_f.col(c), r_b.col(c), p_d.col(c), p_a.col(c), c_i.col(c)};
  }

  MicroState state(std::size_t k) const {
    const auto c = static_cast<Eigen::Index>(k);
    return {r_f.col(c), r_b.col(c), p_d.col(c), p_a.col(c), c_i.col(c), time_index};
  }
  void set_state(std::size_t k, const MicroState& s) {
    const auto c = static_cast<Eigen::Index>(k);
    r_f.col(c) = s.r_f;
    r_b.col(c) = s.r_b;
    p_d.col(c) = s.p_d;
    p_a.col(c) = s.p_a;
    c_i.col(c) = s.c_i;
  }

  const Eigen::MatrixXd& species(Species s) const {
    switch (s) {
      case Species::r_f: return r_f;
      case Species::r_b: return r_b;
      case Species::p_d: return p_d;
      case Species::p_a: return p_a;
      case Species::c_i: return c_i;
      case Species::c_e: break;
    }
    fail(ErrorKind::input, "c_e is a macro field");
  }
};

}  // namespace tsfem
