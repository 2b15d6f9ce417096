#pragma once

// Manufactured-solution convergence study on Omega = [-0.5, 0.5]^2 with the
// unit disc as cell:
//   dt c_e - lap c_e = -int_Gamma G_e + f1,   grad c_e . nu = g1 correction
//   dt c_i - lap_y c_i = f2,                  grad c_i . nu = G_i + g2
//   dt r_f - lap_Gamma r_f = -G_e + f3
//   dt p_a - lap_Gamma p_a = G_e - G_i + f4
// with G_e = c_e r_f - p_a and G_i = p_a - c_i. No porosity and no 1/|Y|.

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tsfem/assembly.hpp"
#include "tsfem/error.hpp"
#include "tsfem/macro_dynamics.hpp"
#include "tsfem/micro_dynamics.hpp"
#include "tsfem/parallel.hpp"

namespace tsfem {

/// Closed-form fields. Each factors into a macro amplitude and a micro
/// profile: c_i = A(x) E(y, t), r_f = p_a = 5 A(x) E(z, t) with
/// A = 1 + |x|^2 and E = exp(-4 t (y1 y2)^2).
struct BenchmarkSolution {
  static constexpr double end_time = 0.25;

  static double norm2(const Point2& p) noexcept { return p[0] * p[0] + p[1] * p[1]; }
  static double amplitude(const Point2& x) noexcept { return 1.0 + norm2(x); }
  static double q(const Point2& y) noexcept { return (y[0] * y[1]) * (y[0] * y[1]); }

  static double c_e(const Point2& x, double t) noexcept {
    return std::cos(std::numbers::pi * t) * std::exp(-10.0 * norm2(x));
  }
  static Eigen::Vector2d grad_c_e(const Point2& x, double t) noexcept {
    return -20.0 * c_e(x, t) * Eigen::Vector2d(x[0], x[1]);
  }
  static double profile(const Point2& y, double t) noexcept { return std::exp(-4.0 * t * q(y)); }
  static Eigen::Vector2d grad_profile(const Point2& y, double t) noexcept {
    // grad q = 2 y1 y2 (y2, y1)
    const double s = 2.0 * y[0] * y[1];
    return -4.0 * t * profile(y, t) * s * Eigen::Vector2d(y[1], y[0]);
  }
  static double c_i(const Point2& x, const Point2& y, double t) noexcept { return amplitude(x) * profile(y, t); }
  static double r_f(const Point2& x, const Point2& z, double t) noexcept { return 5.0 * amplitude(x) * profile(z, t); }
  static double p_a(const Point2& x, const Point2& z, double t) noexcept { return r_f(x, z, t); }

  /// int over the unit circle of E(z, t) = 2 pi exp(-t/2) I0(t/2)
  static double circle_integral(double t) {
    return 2.0 * std::numbers::pi * std::exp(-0.5 * t) * std::cyl_bessel_i(0.0, 0.5 * t);
  }
};

struct BenchmarkSources {
  double f1 = 0.0, f2 = 0.0, f3 = 0.0, f4 = 0.0, g1 = 0.0, g2 = 0.0;
};

namespace detail {

/// -lap_Gamma E / E - 4 q on the unit circle, the z-dependent part of f3/B/E
inline double surface_factor(double q, double t) noexcept {
  const double c4 = 1.0 - 8.0 * q;  // cos(4 phi)
  const double lap = 4.0 * t * t * (1.0 - c4 * c4) - 8.0 * t * c4;
  return -4.0 * q - lap;
}

inline double bulk_factor(const Point2& y, double t) noexcept {
  const double q = BenchmarkSolution::q(y);
  const double r2 = BenchmarkSolution::norm2(y);
  return -4.0 * q - 64.0 * t * t * q * r2 + 8.0 * t * r2;
}

inline double f1_value(const Point2& x, double t) {
  using S = BenchmarkSolution;
  const double gauss = std::exp(-10.0 * S::norm2(x));
  const double ce = std::cos(std::numbers::pi * t) * gauss;
  const double dt = -std::numbers::pi * std::sin(std::numbers::pi * t) * gauss;
  const double lap = (-40.0 + 400.0 * S::norm2(x)) * ce;
  return dt - lap + (ce - 1.0) * 5.0 * S::amplitude(x) * S::circle_integral(t);
}

}  // namespace detail

/// Source and boundary-correction values. f2 is evaluated at y; f3, f4 and
/// g2 at z = y / |y| on the unit circle; g1 assumes x on the boundary of
/// Omega, where x . nu = 1/2 on every face.
inline BenchmarkSources benchmark_sources(double t, const Point2& x, const Point2& y) {
  using S = BenchmarkSolution;
  BenchmarkSources s;
  const double a = S::amplitude(x);
  const double ce = S::c_e(x, t);
  s.f1 = detail::f1_value(x, t);
  s.f2 = a * S::profile(y, t) * detail::bulk_factor(y, t);
  const double r = std::sqrt(S::norm2(y));
  const Point2 z = r > 0.0 ? Point2{y[0] / r, y[1] / r} : Point2{1.0, 0.0};
  const double q = S::q(z);
  const double e = S::profile(z, t);
  const double sf = detail::surface_factor(q, t);
  s.f3 = 5.0 * a * e * (sf + ce - 1.0);
  s.f4 = a * e * (5.0 * sf - 5.0 * (ce - 1.0) + 4.0);
  s.g1 = -10.0 * ce;
  s.g2 = a * e * (-16.0 * t * q - 4.0);
  return s;
}

/// Mesh schedule: Omega grid with 2^(level+1) cells per side, Y_i a disc with
/// 8 * 2^level rim segments and 2^level rings.
struct BenchmarkMeshes {
  unsigned level = 0;
  TriMesh omega;
  MicroMeshes micro;
  double h_omega = 0.0, h_yi = 0.0, h_gamma = 0.0;

  double h() const noexcept { return std::max({h_omega, h_yi, h_gamma}); }
};

inline BenchmarkMeshes benchmark_meshes(unsigned level) {
  if (level > 8) fail(ErrorKind::configuration, "benchmark level " + std::to_string(level) + " is out of range 0..8");
  BenchmarkMeshes m;
  m.level = level;
  m.omega = generate_mesh(SquareSpec{{-0.5, -0.5}, {0.5, 0.5}, 2}, level);
  m.micro = make_micro_meshes(IdentityMap{}, 1, 8, level);
  m.h_omega = mesh_stats(m.omega).h_max;
  m.h_yi = mesh_stats(m.micro.y_i).h_max;
  m.h_gamma = curve_h_max(m.micro.gamma);
  return m;
}

enum class BenchmarkSpecies { c_e, c_i, r_f, p_a };
inline constexpr std::array<BenchmarkSpecies, 4> benchmark_species = {BenchmarkSpecies::c_e, BenchmarkSpecies::c_i,
                                                                      BenchmarkSpecies::r_f, BenchmarkSpecies::p_a};

inline std::string_view to_string(BenchmarkSpecies s) noexcept {
  switch (s) {
    case BenchmarkSpecies::c_e: return "c_e";
    case BenchmarkSpecies::c_i: return "c_i";
    case BenchmarkSpecies::r_f: return "r_f";
    case BenchmarkSpecies::p_a: return "p_a";
  }
  return "?";
}

struct ErrorRecord {
  unsigned level = 0;
  double h_omega = 0.0, h_yi = 0.0, h_gamma = 0.0;
  double tau = 0.0;
  std::size_t steps = 0;
  std::array<double, 4> l2h1{};   // L2(0,T;H1), species order as benchmark_species
  std::array<double, 4> linfl2{}; // Linf(0,T;L2)

  double h() const noexcept { return std::max({h_omega, h_yi, h_gamma}); }
};

struct BenchmarkOptions {
  double tau0 = 0.05;  // time step at h = h0
  double h0 = 0.0;     // 0: h of level 0
  std::optional<double> tau;  // overrides the tau ~ h^2 rule
  double end_time = BenchmarkSolution::end_time;
};

/// Discrete state: c_e nodal on Omega, micro species column k per macro node.
struct BenchmarkState {
  double time = 0.0;
  Vector c_e;
  Eigen::MatrixXd c_i, r_f, p_a;
};

/// tau = tau0 (h / h0)^2, shortened so that the end time is a whole number
/// of steps.
inline double benchmark_tau(const BenchmarkMeshes& m, const BenchmarkOptions& opt, std::size_t* steps = nullptr) {
  double tau = 0.0;
  if (opt.tau) {
    tau = *opt.tau;
  } else {
    const double h0 = opt.h0 > 0.0 ? opt.h0 : benchmark_meshes(0).h();
    tau = opt.tau0 * (m.h() / h0) * (m.h() / h0);
  }
  if (!(tau > 0.0)) fail(ErrorKind::configuration, "benchmark time step must be positive");
  const auto n = static_cast<std::size_t>(std::ceil(opt.end_time / tau - 1e-9));
  if (steps) *steps = std::max<std::size_t>(1, n);
  return opt.end_time / static_cast<double>(std::max<std::size_t>(1, n));
}

namespace detail {

// 7-point degree-5 rule on triangles (barycentric coordinates, unit weights sum)
struct TriangleRule {
  std::array<std::array<double, 3>, 7> bary;
  std::array<double, 7> weight;

  TriangleRule() {
    const double s = std::sqrt(15.0);
    const double a1 = (6.0 - s) / 21.0, a2 = (6.0 + s) / 21.0;
    const double w1 = (155.0 - s) / 1200.0, w2 = (155.0 + s) / 1200.0;
    bary[0] = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    weight[0] = 9.0 / 40.0;
    bary[1] = {a1, a1, 1.0 - 2.0 * a1};
    bary[2] = {a1, 1.0 - 2.0 * a1, a1};
    bary[3] = {1.0 - 2.0 * a1, a1, a1};
    bary[4] = {a2, a2, 1.0 - 2.0 * a2};
    bary[5] = {a2, 1.0 - 2.0 * a2, a2};
    bary[6] = {1.0 - 2.0 * a2, a2, a2};
    for (int k = 1; k < 4; ++k) weight[k] = w1;
    for (int k = 4; k < 7; ++k) weight[k] = w2;
  }
};

// 5-point Gauss-Legendre on [0, 1]
inline constexpr std::array<double, 5> gauss_points = {0.046910077030668, 0.230765344947158, 0.5, 0.769234655052842,
                                                       0.953089922969332};
inline constexpr std::array<double, 5> gauss_weights = {0.118463442528095, 0.239314335249683, 0.284444444444444,
                                                        0.239314335249683, 0.118463442528095};

/// Integrals of an exact profile against the P1 basis of one mesh:
/// load_j = int phi_j u, grad_j = int grad phi_j . grad u, plus int u^2 and
/// int |grad u|^2.
struct ProfileMoments {
  Vector load, grad;
  double square = 0.0, grad_square = 0.0;
};

inline ProfileMoments bulk_moments(const TriMesh& mesh, const std::function<double(const Point2&)>& u,
                                   const std::function<Eigen::Vector2d(const Point2&)>& grad_u) {
  static const TriangleRule rule;
  ProfileMoments m{Vector::Zero(static_cast<Eigen::Index>(mesh.node_count())),
                   Vector::Zero(static_cast<Eigen::Index>(mesh.node_count())), 0.0, 0.0};
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto e = p1_element(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (std::size_t k = 0; k < rule.weight.size(); ++k) {
      const auto& l = rule.bary[k];
      Point2 p{0.0, 0.0};
      for (int a = 0; a < 3; ++a) {
        p[0] += l[a] * mesh.nodes[tri[a]][0];
        p[1] += l[a] * mesh.nodes[tri[a]][1];
      }
      const double w = rule.weight[k] * e.area;
      const double v = u(p);
      const Eigen::Vector2d g = grad_u(p);
      for (int a = 0; a < 3; ++a) {
        m.load[static_cast<Eigen::Index>(tri[a])] += w * l[a] * v;
        m.grad[static_cast<Eigen::Index>(tri[a])] += w * e.grad[a].dot(g);
      }
      m.square += w * v * v;
      m.grad_square += w * g.squaredNorm();
    }
  }
  return m;
}

/// As bulk_moments on the polygon Gamma_h, with the exact profile lifted
/// radially from the unit circle.
inline ProfileMoments curve_moments(const CurveMesh& curve, const std::function<double(const Point2&)>& u,
                                    const std::function<Eigen::Vector2d(const Point2&)>& grad_u) {
  ProfileMoments m{Vector::Zero(static_cast<Eigen::Index>(curve.node_count())),
                   Vector::Zero(static_cast<Eigen::Index>(curve.node_count())), 0.0, 0.0};
  for (std::size_t s = 0; s < curve.segments.size(); ++s) {
    const auto [i, j] = curve.segments[s];
    const auto& a = curve.nodes[i];
    const auto& b = curve.nodes[j];
    const double h = distance(a, b);
    const Eigen::Vector2d tangent((b[0] - a[0]) / h, (b[1] - a[1]) / h);
    for (std::size_t k = 0; k < gauss_points.size(); ++k) {
      const double g = gauss_points[k];
      const Eigen::Vector2d x((1.0 - g) * a[0] + g * b[0], (1.0 - g) * a[1] + g * b[1]);
      const double r = x.norm();
      const Eigen::Vector2d p = x / r;
      const Point2 pp{p[0], p[1]};
      // derivative along the segment of u(x / |x|)
      const Eigen::Vector2d grad_ambient = grad_u(pp);
      const Eigen::Vector2d grad_lift = (grad_ambient - p * p.dot(grad_ambient)) / r;
      const double ds = grad_lift.dot(tangent);
      const double v = u(pp);
      const double w = gauss_weights[k] * h;
      m.load[static_cast<Eigen::Index>(i)] += w * (1.0 - g) * v;
      m.load[static_cast<Eigen::Index>(j)] += w * g * v;
      m.grad[static_cast<Eigen::Index>(i)] += w * (-1.0 / h) * ds;
      m.grad[static_cast<Eigen::Index>(j)] += w * (1.0 / h) * ds;
      m.square += w * v * v;
      m.grad_square += w * ds * ds;
    }
  }
  return m;
}

/// Squared L2 and H1-semi errors of columns U(:, k) against amp_k * profile,
/// summed with the macro weights.
inline std::array<double, 2> two_scale_errors(const Eigen::MatrixXd& U, const Vector& amp, const Vector& weights,
                                              const NormOperators& norms, const ProfileMoments& pm) {
  double l2 = 0.0, semi = 0.0;
  for (Eigen::Index k = 0; k < U.cols(); ++k) {
    const Vector col = U.col(k);
    const auto sq = norms.squared(col);
    const double a = amp[k];
    l2 += weights[k] * std::max(0.0, sq[0] - 2.0 * a * col.dot(pm.load) + a * a * pm.square);
    semi += weights[k] * std::max(0.0, sq[1] - 2.0 * a * col.dot(pm.grad) + a * a * pm.grad_square);
  }
  return {l2, semi};
}

}  // namespace detail

/// Runs the benchmark system on one mesh level. `observer`, if set, sees
/// the state after every step (and the initial state).
inline ErrorRecord run_benchmark(const BenchmarkMeshes& meshes, const BenchmarkOptions& options = {},
                                 const std::function<void(std::size_t, const BenchmarkState&)>& observer = {}) {
  using S = BenchmarkSolution;
  std::size_t steps = 0;
  const double tau = benchmark_tau(meshes, options, &steps);
  const auto& omega = meshes.omega;
  const auto& gamma = meshes.micro.gamma;
  const auto& y_i = meshes.micro.y_i;
  const std::size_t nm = omega.node_count(), ns = gamma.node_count(), nb = y_i.node_count();
  const auto Nm = static_cast<Eigen::Index>(nm), Ns = static_cast<Eigen::Index>(ns), Nb = static_cast<Eigen::Index>(nb);

  const auto micro_ops = build_micro_operators(meshes.micro, {1.0, 1.0, 1.0, 1.0, 1.0}, ReactionSpec{}, tau, 1.0);
  const auto macro_op = build_macro_operator(omega, Tensor2::Identity(), 1.0, tau, BoundarySpec::neumann());
  const Vector boundary_weights = assemble_boundary_lumped_mass(omega);
  const Vector& m_gamma = micro_ops.curve_mass;
  const Vector& m_bulk = micro_ops.bulk_mass;
  const auto macro_norms = NormOperators::on(omega);
  const auto bulk_norms = NormOperators::on(y_i);
  const auto curve_norms = NormOperators::on(gamma);

  Vector amp(Nm);
  for (Eigen::Index k = 0; k < Nm; ++k) amp[k] = S::amplitude(omega.nodes[static_cast<std::size_t>(k)]);

  BenchmarkState state;
  state.c_e = interpolate([](const Point2& x) { return S::c_e(x, 0.0); }, omega);
  const Vector ones_b = Vector::Ones(Nb), ones_s = Vector::Ones(Ns);
  state.c_i = ones_b * amp.transpose();
  state.r_f = 5.0 * ones_s * amp.transpose();
  state.p_a = state.r_f;

  ErrorRecord rec;
  rec.level = meshes.level;
  rec.h_omega = meshes.h_omega;
  rec.h_yi = meshes.h_yi;
  rec.h_gamma = meshes.h_gamma;
  rec.tau = tau;
  rec.steps = steps;
  std::array<double, 4> l2h1_sq{};

  auto measure = [&](double t, bool accumulate) {
    // c_e: direct quadrature on Omega
    const auto ce = detail::bulk_moments(omega, [t](const Point2& x) { return S::c_e(x, t); },
                                         [t](const Point2& x) { return S::grad_c_e(x, t); });
    const auto sq = macro_norms.squared(state.c_e);
    const double l2 = std::max(0.0, sq[0] - 2.0 * state.c_e.dot(ce.load) + ce.square);
    const double semi = std::max(0.0, sq[1] - 2.0 * state.c_e.dot(ce.grad) + ce.grad_square);
    std::array<std::array<double, 2>, 4> e;
    e[0] = {l2, semi};
    const auto bulk = detail::bulk_moments(y_i, [t](const Point2& y) { return S::profile(y, t); },
                                           [t](const Point2& y) { return S::grad_profile(y, t); });
    const auto surf = detail::curve_moments(gamma, [t](const Point2& z) { return S::profile(z, t); },
                                            [t](const Point2& z) { return S::grad_profile(z, t); });
    e[1] = detail::two_scale_errors(state.c_i, amp, macro_op.mass, bulk_norms, bulk);
    const Vector amp5 = 5.0 * amp;
    e[2] = detail::two_scale_errors(state.r_f, amp5, macro_op.mass, curve_norms, surf);
    e[3] = detail::two_scale_errors(state.p_a, amp5, macro_op.mass, curve_norms, surf);
    for (int s = 0; s < 4; ++s) {
      rec.linfl2[s] = std::max(rec.linfl2[s], std::sqrt(e[s][0]));
      if (accumulate) l2h1_sq[s] += tau * (e[s][0] + e[s][1]);
    }
  };
  measure(0.0, false);
  if (observer) observer(0, state);

  Eigen::MatrixXd next_ci(Nb, Nm), next_rf(Ns, Nm), next_pa(Ns, Nm);
  Vector coupling(Nm);
  std::vector<Point2> unit_gamma(ns);
  for (std::size_t j = 0; j < ns; ++j) {
    const double r = std::hypot(gamma.nodes[j][0], gamma.nodes[j][1]);
    unit_gamma[j] = {gamma.nodes[j][0] / r, gamma.nodes[j][1] / r};
  }

  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = static_cast<double>(n) * tau;
    // micro profiles of the sources at t_n
    Vector e_s(Ns), sf(Ns), e_b(Nb), bf(Nb), q_s(Ns);
    for (std::size_t j = 0; j < ns; ++j) {
      const auto J = static_cast<Eigen::Index>(j);
      q_s[J] = S::q(unit_gamma[j]);
      e_s[J] = S::profile(unit_gamma[j], t);
      sf[J] = detail::surface_factor(q_s[J], t);
    }
    for (std::size_t j = 0; j < nb; ++j) {
      const auto J = static_cast<Eigen::Index>(j);
      e_b[J] = S::profile(y_i.nodes[j], t);
      bf[J] = detail::bulk_factor(y_i.nodes[j], t);
    }
    try {
      parallel_for_chunks(0, nm, [&](std::size_t lo, std::size_t hi) {
        Vector r(Ns), p(Ns), c(Nb);
        for (std::size_t k = lo; k < hi; ++k) {
          const auto K = static_cast<Eigen::Index>(k);
          const double a = amp[K];
          const double ce_old = state.c_e[K];
          const double ce_exact = S::c_e(omega.nodes[k], t);
          double g = 0.0;
          c = m_bulk.cwiseProduct(state.c_i.col(K) + tau * a * e_b.cwiseProduct(bf));
          for (Eigen::Index j = 0; j < Ns; ++j) {
            const double rf = state.r_f(j, K), pa = state.p_a(j, K);
            const double ci = state.c_i(static_cast<Eigen::Index>(micro_ops.trace[static_cast<std::size_t>(j)]), K);
            const double ge = ce_old * rf - pa;
            const double gi = pa - ci;
            const double f3 = 5.0 * a * e_s[j] * (sf[j] + ce_exact - 1.0);
            const double f4 = a * e_s[j] * (5.0 * sf[j] - 5.0 * (ce_exact - 1.0) + 4.0);
            const double g2 = a * e_s[j] * (-16.0 * t * q_s[j] - 4.0);
            r[j] = m_gamma[j] * (rf + tau * (-ge + f3));
            p[j] = m_gamma[j] * (pa + tau * (ge - gi + f4));
            c[static_cast<Eigen::Index>(micro_ops.trace[static_cast<std::size_t>(j)])] += tau * m_gamma[j] * (gi + g2);
            g += m_gamma[j] * ge;
          }
          if (!r.allFinite() || !p.allFinite() || !c.allFinite())
            fail(ErrorKind::step, "non-finite benchmark load at macro node " + std::to_string(k));
          solve_cyclic_tridiagonal(micro_ops.lower[0], micro_ops.diag[0], micro_ops.upper[0], r);
          solve_cyclic_tridiagonal(micro_ops.lower[3], micro_ops.diag[3], micro_ops.upper[3], p);
          next_rf.col(K) = r;
          next_pa.col(K) = p;
          next_ci.col(K) = micro_ops.bulk.solve(c);
          coupling[K] = g;
        }
      });
      Vector load(Nm);
      for (std::size_t k = 0; k < nm; ++k) {
        const auto K = static_cast<Eigen::Index>(k);
        const auto& x = omega.nodes[k];
        load[K] = macro_op.mass[K] * detail::f1_value(x, t) + boundary_weights[K] * (-10.0 * S::c_e(x, t));
      }
      state.c_e = macro_step({state.c_e, n - 1}, coupling, ReactionSpec{}, macro_op, &load).values;
    } catch (const Error& e) {
      fail(e.kind(), "benchmark level " + std::to_string(meshes.level) + ", step " + std::to_string(n) + ": " + e.what());
    }
    std::swap(state.c_i, next_ci);
    std::swap(state.r_f, next_rf);
    std::swap(state.p_a, next_pa);
    state.time = t;
    measure(t, true);
    if (observer) observer(n, state);
  }
  for (int s = 0; s < 4; ++s) rec.l2h1[s] = std::sqrt(l2h1_sq[s]);
  return rec;
}

inline ErrorRecord run_benchmark(unsigned level, const BenchmarkOptions& options = {}) {
  return run_benchmark(benchmark_meshes(level), options);
}

/// EOC_i = ln(e_{i+1} / e_i) / ln(h_{i+1} / h_i)
inline std::vector<double> compute_eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2)
    fail(ErrorKind::domain, "EOC needs two or more errors and as many mesh sizes");
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] > 0.0) || !(hs[i] > 0.0) || !std::isfinite(errors[i]) || !std::isfinite(hs[i]))
      fail(ErrorKind::domain, "EOC needs positive finite errors and mesh sizes (entry " + std::to_string(i) + ")");
  }
  std::vector<double> eoc;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i) {
    if (hs[i + 1] == hs[i]) fail(ErrorKind::domain, "EOC needs distinct mesh sizes (entries " + std::to_string(i) + ", " + std::to_string(i + 1) + ")");
    eoc.push_back(std::log(errors[i + 1] / errors[i]) / std::log(hs[i + 1] / hs[i]));
  }
  return eoc;
}

/// Time-step study at fixed meshes: runs tau, tau/2, ..., tau/2^halvings and
/// returns, per species, max over the coarse time grid of the two-scale L2
/// norm of successive differences.
struct TimeStudy {
  std::vector<double> taus;
  std::vector<std::array<double, 4>> differences;  // between run k and k+1
};

inline TimeStudy time_refinement_study(const BenchmarkMeshes& meshes, double tau, unsigned halvings = 2) {
  TimeStudy study;
  const auto macro_norms = NormOperators::on(meshes.omega);
  const auto bulk_norms = NormOperators::on(meshes.micro.y_i);
  const auto curve_norms = NormOperators::on(meshes.micro.gamma);
  const Vector macro_mass = assemble_lumped_mass(meshes.omega).values;
  std::vector<std::vector<BenchmarkState>> runs;
  for (unsigned k = 0; k <= halvings; ++k) {
    BenchmarkOptions opt;
    opt.tau = tau / static_cast<double>(1u << k);
    const std::size_t stride = 1u << k;
    std::vector<BenchmarkState> coarse;
    const auto rec = run_benchmark(meshes, opt, [&](std::size_t n, const BenchmarkState& s) {
      if (n % stride == 0) coarse.push_back(s);
    });
    study.taus.push_back(rec.tau);
    runs.push_back(std::move(coarse));
  }
  auto two_scale_l2 = [&](const Eigen::MatrixXd& d, const NormOperators& norms) {
    double sum = 0.0;
    for (Eigen::Index k = 0; k < d.cols(); ++k) sum += macro_mass[k] * norms.squared(d.col(k))[0];
    return std::sqrt(sum);
  };
  for (std::size_t k = 0; k + 1 < runs.size(); ++k) {
    std::array<double, 4> diff{};
    const auto count = std::min(runs[k].size(), runs[k + 1].size());
    for (std::size_t n = 0; n < count; ++n) {
      const auto& a = runs[k][n];
      const auto& b = runs[k + 1][n];
      diff[0] = std::max(diff[0], std::sqrt(macro_norms.squared(a.c_e - b.c_e)[0]));
      diff[1] = std::max(diff[1], two_scale_l2(a.c_i - b.c_i, bulk_norms));
      diff[2] = std::max(diff[2], two_scale_l2(a.r_f - b.r_f, curve_norms));
      diff[3] = std::max(diff[3], two_scale_l2(a.p_a - b.p_a, curve_norms));
    }
    study.differences.push_back(diff);
  }
  return study;
}

}  // namespace tsfem
