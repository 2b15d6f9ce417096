#pragma once

// Scenario description: geometry, resolution, time grid, coefficients,
// boundary and initial data. Every model symbol lives here.

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsfem/cell_problem.hpp"
#include "tsfem/error.hpp"
#include "tsfem/macro_dynamics.hpp"
#include "tsfem/micro_dynamics.hpp"

namespace tsfem {

struct GeometryConfig {
  Point2 macro_lower{0.0, 0.0};
  Point2 macro_upper{0.1, 0.1};
  CellGeometry cell;

  friend bool operator==(const GeometryConfig&, const GeometryConfig&) = default;
};

struct ResolutionConfig {
  std::size_t macro_cells = 16;  // grid cells per side of Omega at level 0
  unsigned macro_level = 0;
  std::size_t micro_rings = 4;
  std::size_t micro_segments = 32;
  unsigned micro_level = 0;
  unsigned cell_level = 3;
  CellResolution cell;

  friend bool operator==(const ResolutionConfig&, const ResolutionConfig&) = default;
};

struct TimeConfig {
  double tau = 1e-2;
  double end_time = 1.0;
  std::size_t sample_every = 0;  // 0: every ceil(N / 200) steps

  std::size_t steps() const {
    const double ratio = end_time / tau;
    const double nearest = std::round(ratio);
    return static_cast<std::size_t>(std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio) ? nearest : std::ceil(ratio));
  }
  std::size_t cadence() const {
    if (sample_every > 0) return sample_every;
    return std::max<std::size_t>(1, (steps() + 199) / 200);
  }

  friend bool operator==(const TimeConfig&, const TimeConfig&) = default;
};

struct DiffusionConfig {
  double d_e = 1e-2;
  std::optional<Tensor2> d_hom;   // skips the cell problems when given
  std::optional<double> theta_e;  // required together with d_hom
  MicroDiffusion micro{1e-2, 1e-2, 1e-2, 1e-2, 10.0};

  bool operator==(const DiffusionConfig& o) const {
    return d_e == o.d_e && d_hom.has_value() == o.d_hom.has_value() && (!d_hom || *d_hom == *o.d_hom) &&
           theta_e == o.theta_e && micro == o.micro;
  }
};

enum class InitialPreset { constant, bio };

inline std::string_view to_string(InitialPreset p) noexcept { return p == InitialPreset::bio ? "bio" : "constant"; }

inline InitialPreset parse_initial_preset(std::string_view name) {
  if (name == "bio") return InitialPreset::bio;
  if (name == "constant") return InitialPreset::constant;
  fail(ErrorKind::validation, "unknown initial preset '" + std::string(name) + "' (expected constant|bio)");
}

/// constant: every species takes its value below. bio: c_e = c_e value,
/// r_b = p_a = 0 and perturbed c_i, r_f, p_d with the given amplitude.
struct InitialConfig {
  InitialPreset preset = InitialPreset::constant;
  double c_e = 0.0, c_i = 0.0, r_f = 0.0, r_b = 0.0, p_d = 0.0, p_a = 0.0;
  double amplitude = 0.95;

  friend bool operator==(const InitialConfig&, const InitialConfig&) = default;
};

struct ProbeConfig {
  std::string id;
  Point2 x{};

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

struct OutputConfig {
  std::vector<ProbeConfig> probes;
  std::string directory;  // empty: no files

  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

/// Dimensional scales behind the dimensionless values; documentation only.
struct NondimRecord {
  double t_hat = 1e3;     // s
  double x_hat = 1e-2;    // m
  double r_hat = 1e-9;    // mol / m^2
  double c_hat = 1e-4;    // mol / m^3
  double epsilon = 1e-3;

  friend bool operator==(const NondimRecord&, const NondimRecord&) = default;
};

struct ScenarioConfig {
  std::string name = "custom";
  GeometryConfig geometry;
  ResolutionConfig resolution;
  TimeConfig time;
  ReactionSpec reactions;
  ReactionTreatment treatment = ReactionTreatment::explicit_euler;
  DiffusionConfig diffusion;
  BoundarySpec bc;
  InitialConfig initial;
  OutputConfig output;
  NondimRecord nondim;

  void validate() const;

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

namespace detail {

[[noreturn]] inline void invalid(std::string_view key, std::string_view why) {
  fail(ErrorKind::validation, std::string(key) + ": " + std::string(why));
}

inline void require_nonnegative(std::string_view key, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) invalid(key, "must be a finite value >= 0");
}

}  // namespace detail

inline void ScenarioConfig::validate() const {
  using detail::invalid;
  using detail::require_nonnegative;
  if (!(time.tau > 0.0) || !std::isfinite(time.tau)) invalid("time.tau", "must be > 0");
  if (!(time.end_time >= time.tau) || !std::isfinite(time.end_time)) invalid("time.T", "must be >= time.tau");
  const auto& g = geometry;
  if (!(g.macro_upper[0] > g.macro_lower[0]) || !(g.macro_upper[1] > g.macro_lower[1]))
    invalid("geometry.macro", "upper bounds must exceed lower bounds");
  if (!(g.cell.upper[0] > g.cell.lower[0]) || !(g.cell.upper[1] > g.cell.lower[1]))
    invalid("geometry.cell", "upper bounds must exceed lower bounds");
  if (g.cell.kind == CellKind::none) invalid("geometry.cell.kind", "a two-scale run needs a cell (circle|ellipse|dziuk)");
  if (g.cell.kind == CellKind::circle && !(g.cell.radius > 0.0)) invalid("geometry.cell.radius", "must be > 0");
  if (g.cell.kind == CellKind::ellipse && !(g.cell.ellipse_coefficients[0] > 0.0 && g.cell.ellipse_coefficients[1] > 0.0))
    invalid("geometry.cell.ellipse", "coefficients must be > 0");
  {
    // the cell must sit strictly inside Y: sample its boundary
    const auto map = g.cell.disc_map();
    for (int k = 0; k < 720; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / 720.0;
      const auto p = map_point(map, {std::cos(phi), std::sin(phi)});
      if (!(p[0] > g.cell.lower[0] && p[0] < g.cell.upper[0] && p[1] > g.cell.lower[1] && p[1] < g.cell.upper[1]))
        invalid("geometry.cell", "the cell does not fit inside the Y bounds");
    }
  }
  if (resolution.macro_cells == 0) invalid("resolution.macro_cells", "must be >= 1");
  if (resolution.micro_rings == 0) invalid("resolution.micro_rings", "must be >= 1");
  if (resolution.micro_segments < 4) invalid("resolution.micro_segments", "must be >= 4");
  if (resolution.cell.segments < 4 || resolution.cell.segments % 4 != 0)
    invalid("resolution.cell_segments", "must be a positive multiple of 4");
  if (resolution.cell.layers == 0) invalid("resolution.cell_layers", "must be >= 1");
  try {
    reactions.validate();
  } catch (const Error& e) {
    fail(ErrorKind::validation, e.what());
  }
  require_nonnegative("diffusion.D_e", diffusion.d_e);
  require_nonnegative("diffusion.D_i", diffusion.micro.d_i);
  require_nonnegative("diffusion.D_f", diffusion.micro.d_f);
  require_nonnegative("diffusion.D_b", diffusion.micro.d_b);
  require_nonnegative("diffusion.D_d", diffusion.micro.d_d);
  require_nonnegative("diffusion.D_a", diffusion.micro.d_a);
  if (diffusion.d_hom.has_value() != diffusion.theta_e.has_value())
    invalid("diffusion.d_hom", "d_hom and theta_e must be given together");
  if (diffusion.d_hom) {
    const auto& d = *diffusion.d_hom;
    if (!d.allFinite() || d(0, 1) != d(1, 0) || !(d(0, 0) > 0.0) || !(d.determinant() > 0.0))
      invalid("diffusion.d_hom", "must be symmetric positive definite");
    if (!(*diffusion.theta_e > 0.0 && *diffusion.theta_e <= 1.0)) invalid("diffusion.theta_e", "must lie in (0, 1]");
  } else if (!(diffusion.d_e > 0.0)) {
    invalid("diffusion.D_e", "must be > 0 when d_hom is computed");
  }
  if (!std::isfinite(bc.value)) invalid("bc.value", "must be finite");
  if (bc.kind == BoundarySpec::Kind::custom && !bc.predicate) invalid("bc", "custom predicate is empty");
  for (double v : {initial.c_e, initial.c_i, initial.r_f, initial.r_b, initial.p_d, initial.p_a})
    if (!std::isfinite(v)) invalid("initial", "values must be finite");
  if (!(initial.amplitude >= 0.0 && initial.amplitude < 1.0)) invalid("initial.amplitude", "must lie in [0, 1)");
  for (std::size_t k = 0; k < output.probes.size(); ++k) {
    const auto& p = output.probes[k].x;
    if (!(p[0] >= g.macro_lower[0] && p[0] <= g.macro_upper[0] && p[1] >= g.macro_lower[1] && p[1] <= g.macro_upper[1]))
      invalid("output.probes[" + std::to_string(k) + "]", "lies outside the macro domain");
  }
}

/// Tissue-scale receptor-ligand scenario on [0, 0.1]^2 with cells in
/// Y = [-2, 2]^2 and a ligand source on the south-west boundary. Uses the
/// lagged-implicit reactions: with a_i = 6e3 the explicit step bound is
/// below 1e-3.
inline ScenarioConfig bio_scenario(CellKind kind, double tau = 1e-2, double end_time = 50.0) {
  ScenarioConfig c;
  c.name = "bio-" + std::string(to_string(kind));
  c.geometry.cell.kind = kind;
  c.time.tau = tau;
  c.time.end_time = end_time;
  auto& r = c.reactions;
  r.a_e = 100.0;
  r.b_e = 5.0;
  r.a_i = 6e3;
  r.b_i = 10.0;
  r.gamma_i = 2.0;
  r.kappa_i = 1.0;
  c.treatment = ReactionTreatment::lagged_implicit;
  c.diffusion.d_e = 1e-2;
  c.diffusion.micro = {1e-2, 1e-2, 1e-2, 1e-2, 10.0};
  c.bc = BoundarySpec::max_coordinate_below(0.05, 1.0);
  c.initial.preset = InitialPreset::bio;
  c.initial.amplitude = 0.95;
  c.output.probes = {{"east", {0.0875, 0.0125}}, {"north", {0.0125, 0.0875}}};
  return c;
}

inline ScenarioConfig named_scenario(std::string_view name) {
  if (name == "bio-ellipse") return bio_scenario(CellKind::ellipse);
  if (name == "bio-dziuk") return bio_scenario(CellKind::dziuk);
  fail(ErrorKind::validation, "unknown scenario '" + std::string(name) + "' (expected bio-ellipse|bio-dziuk)");
}

// initial fields; x is the macro point, y a point of Y_i or Gamma

inline double initial_c_i(const InitialConfig& ic, const Point2& x, const Point2& y) {
  if (ic.preset == InitialPreset::constant) return ic.c_i;
  const double r = std::hypot(x[0], x[1]);
  return 1.0 + ic.amplitude * std::sin(std::numbers::pi * (2.0 * y[0] + 0.5 * y[1])) * std::sin(5.0 * std::numbers::pi * r);
}

inline double initial_r_f(const InitialConfig& ic, const Point2& x, const Point2& z) {
  if (ic.preset == InitialPreset::constant) return ic.r_f;
  const double r = std::hypot(x[0], x[1]);
  return 0.17 * (1.0 + ic.amplitude * std::cos(std::numbers::pi * (z[0] + 4.0 * z[1])) * std::cos(30.0 * std::numbers::pi * r));
}

inline double initial_p_d(const InitialConfig& ic, const Point2& x, const Point2& z) {
  if (ic.preset == InitialPreset::constant) return ic.p_d;
  const double r = std::hypot(x[0], x[1]);
  return 0.065 *
         (1.0 + ic.amplitude * std::cos(std::numbers::pi * (2.0 * z[0] + 0.5 * z[1])) * std::cos(10.0 * std::numbers::pi * r));
}

inline double initial_r_b(const InitialConfig& ic) { return ic.preset == InitialPreset::constant ? ic.r_b : 0.0; }
inline double initial_p_a(const InitialConfig& ic) { return ic.preset == InitialPreset::constant ? ic.p_a : 0.0; }

/// Largest initial or boundary value of any species.
inline double initial_maximum(const ScenarioConfig& c) {
  double m = std::max({c.initial.c_e, c.initial.c_i, c.initial.r_f, c.initial.r_b, c.initial.p_d, c.initial.p_a});
  if (c.initial.preset == InitialPreset::bio)
    m = std::max({c.initial.c_e, 1.0 + c.initial.amplitude, 0.17 * (1.0 + c.initial.amplitude), 0.065 * (1.0 + c.initial.amplitude)});
  if (c.bc.kind != BoundarySpec::Kind::neumann) m = std::max(m, c.bc.value);
  return m;
}

}  // namespace tsfem
