#pragma once

// Two-scale time loop: per step, coupling fluxes and micro steps from level
// n-1 at every macro node, then the macro step.

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "tsfem/cell_problem.hpp"
#include "tsfem/macro_dynamics.hpp"
#include "tsfem/micro_dynamics.hpp"
#include "tsfem/parallel.hpp"
#include "tsfem/scenario.hpp"

namespace tsfem {

inline constexpr std::array<Species, 6> all_species = {Species::c_e, Species::c_i, Species::r_f,
                                                       Species::r_b, Species::p_d, Species::p_a};

inline std::size_t species_index(Species s) noexcept { return static_cast<std::size_t>(s); }

/// Macro field plus per-node means of the micro species at one time.
struct Sample {
  double time = 0.0;
  std::size_t step = 0;
  std::array<Vector, 6> fields;  // c_e nodal, others lumped means over Gamma or Y_i
  Vector coupling;               // g at the level of this sample
};

struct ProbeSeries {
  std::string id;
  Point2 x{};
  std::size_t node = 0;             // nearest macro node
  std::vector<std::array<double, 6>> values;  // every step, species order as all_species
};

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<double> times;  // every step, starting at t = 0
  std::vector<ProbeSeries> probes;
  std::array<double, 6> minimum;
  std::array<double, 6> maximum;

  Trajectory() {
    minimum.fill(std::numeric_limits<double>::infinity());
    maximum.fill(-std::numeric_limits<double>::infinity());
  }
};

/// First time the series reaches `level`, linearly interpolated between
/// steps; nullopt if it never does.
inline std::optional<double> crossing_time(const std::vector<double>& times, const ProbeSeries& probe, Species s, double level) {
  const auto k = species_index(s);
  for (std::size_t n = 0; n < probe.values.size(); ++n) {
    const double v = probe.values[n][k];
    if (v >= level) {
      if (n == 0) return times[0];
      const double u = probe.values[n - 1][k];
      return times[n - 1] + (level - u) / (v - u) * (times[n] - times[n - 1]);
    }
  }
  return std::nullopt;
}

inline std::size_t nearest_node(const TriMesh& mesh, const Point2& x) {
  std::size_t best = 0;
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh.node_count(); ++i) {
    const double e = distance(mesh.nodes[i], x);
    if (e < d) {
      d = e;
      best = i;
    }
  }
  return best;
}

class TwoScaleSimulation {
 public:
  explicit TwoScaleSimulation(ScenarioConfig config) : config_(std::move(config)) {
    config_.validate();
    const auto& geo = config_.geometry;
    const auto& res = config_.resolution;
    omega_ = generate_mesh(SquareSpec{geo.macro_lower, geo.macro_upper, res.macro_cells}, res.macro_level);
    micro_ = make_micro_meshes(geo.cell.disc_map(), res.micro_rings, res.micro_segments, res.micro_level);
    if (config_.diffusion.d_hom) {
      d_hom_ = *config_.diffusion.d_hom;
      theta_ = *config_.diffusion.theta_e;
    } else {
      const auto cell_mesh = make_cell_exterior_mesh(geo.cell, res.cell_level, res.cell);
      const auto hom = homogenize(cell_mesh, config_.diffusion.d_e * Tensor2::Identity(), geo.cell.volume());
      d_hom_ = hom.d_hom;
      theta_ = hom.theta_e;
    }
    micro_ops_ = build_micro_operators(micro_, config_.diffusion.micro, config_.reactions, config_.time.tau,
                                       geo.cell.volume(), config_.treatment);
    macro_op_ = build_macro_operator(omega_, d_hom_, theta_, config_.time.tau, config_.bc);
    initialise();
  }

  const ScenarioConfig& config() const noexcept { return config_; }
  const TriMesh& omega() const noexcept { return omega_; }
  const MicroMeshes& micro_meshes() const noexcept { return micro_; }
  const MicroOperators& micro_operators() const noexcept { return micro_ops_; }
  const MacroOperator& macro_operator() const noexcept { return macro_op_; }
  const Tensor2& d_hom() const noexcept { return d_hom_; }
  double theta_e() const noexcept { return theta_; }
  const MacroField& c_e() const noexcept { return c_e_; }
  const TwoScaleField& micro() const noexcept { return field_; }
  /// g_k of the last completed step (level n-1 data of that step)
  const Vector& last_coupling() const noexcept { return coupling_; }
  std::size_t step_index() const noexcept { return c_e_.time_index; }
  double time() const noexcept { return static_cast<double>(step_index()) * config_.time.tau; }

  /// Coupling fluxes of the current level.
  Vector coupling_fluxes() const {
    Vector g(static_cast<Eigen::Index>(omega_.node_count()));
    for (std::size_t k = 0; k < omega_.node_count(); ++k)
      g[static_cast<Eigen::Index>(k)] = coupling_flux(field_.node(k), c_e_.values[static_cast<Eigen::Index>(k)], config_.reactions, micro_ops_);
    return g;
  }

  void step() {
    const std::size_t n = omega_.node_count();
    const auto& spec = config_.reactions;
    try {
      parallel_for_chunks(0, n, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t k = lo; k < hi; ++k) {
          const double c = c_e_.values[static_cast<Eigen::Index>(k)];
          coupling_[static_cast<Eigen::Index>(k)] = coupling_flux(field_.node(k), c, spec, micro_ops_);
          try {
            micro_step(field_.node(k), next_.node(k), c, spec, micro_ops_);
          } catch (const Error& e) {
            fail(e.kind(), std::string(e.what()) + " (macro node " + std::to_string(k) + ")");
          }
        }
      });
      c_e_ = macro_step(c_e_, coupling_, spec, macro_op_);
    } catch (const Error& e) {
      fail(e.kind(), "step " + std::to_string(c_e_.time_index + 1) + ": " + e.what());
    }
    std::swap(field_, next_);
    field_.time_index = c_e_.time_index;
  }

  /// Lumped mean of one species per macro node (c_e: the nodal values).
  Vector node_means(Species s) const {
    if (s == Species::c_e) return c_e_.values;
    const Vector& w = s == Species::c_i ? micro_ops_.bulk_mass : micro_ops_.curve_mass;
    return (w.transpose() * field_.species(s)).transpose() / w.sum();
  }

  double species_min(Species s) const {
    return s == Species::c_e ? c_e_.values.minCoeff() : field_.species(s).minCoeff();
  }
  double species_max(Species s) const {
    return s == Species::c_e ? c_e_.values.maxCoeff() : field_.species(s).maxCoeff();
  }

 private:
  void initialise() {
    const std::size_t n = omega_.node_count();
    const auto& ic = config_.initial;
    c_e_ = {Vector::Constant(static_cast<Eigen::Index>(n), ic.c_e), 0};
    for (auto i : macro_op_.fixed_nodes) c_e_.values[static_cast<Eigen::Index>(i)] = macro_op_.dirichlet_value;
    field_ = TwoScaleField(micro_.gamma.node_count(), micro_.y_i.node_count(), n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& x = omega_.nodes[k];
      const auto c = static_cast<Eigen::Index>(k);
      for (std::size_t j = 0; j < micro_.gamma.node_count(); ++j) {
        const auto& z = micro_.gamma.nodes[j];
        const auto r = static_cast<Eigen::Index>(j);
        field_.r_f(r, c) = initial_r_f(ic, x, z);
        field_.r_b(r, c) = initial_r_b(ic);
        field_.p_d(r, c) = initial_p_d(ic, x, z);
        field_.p_a(r, c) = initial_p_a(ic);
      }
      for (std::size_t j = 0; j < micro_.y_i.node_count(); ++j)
        field_.c_i(static_cast<Eigen::Index>(j), c) = initial_c_i(ic, x, micro_.y_i.nodes[j]);
    }
    next_ = field_;
    coupling_ = Vector::Zero(static_cast<Eigen::Index>(n));
  }

  ScenarioConfig config_;
  TriMesh omega_;
  MicroMeshes micro_;
  Tensor2 d_hom_ = Tensor2::Identity();
  double theta_ = 1.0;
  MicroOperators micro_ops_;
  MacroOperator macro_op_;
  MacroField c_e_;
  TwoScaleField field_, next_;
  Vector coupling_;
};

namespace detail {

inline Sample take_sample(const TwoScaleSimulation& sim) {
  Sample s;
  s.time = sim.time();
  s.step = sim.step_index();
  for (auto sp : all_species) s.fields[species_index(sp)] = sim.node_means(sp);
  s.coupling = sim.coupling_fluxes();
  return s;
}

inline void record(const TwoScaleSimulation& sim, Trajectory& traj) {
  traj.times.push_back(sim.time());
  for (auto& p : traj.probes) {
    std::array<double, 6> v{};
    for (auto sp : all_species) {
      if (sp == Species::c_e) {
        v[species_index(sp)] = sim.c_e().values[static_cast<Eigen::Index>(p.node)];
      } else {
        const Vector& w = sp == Species::c_i ? sim.micro_operators().bulk_mass : sim.micro_operators().curve_mass;
        v[species_index(sp)] = w.dot(sim.micro().species(sp).col(static_cast<Eigen::Index>(p.node))) / w.sum();
      }
    }
    p.values.push_back(v);
  }
  for (auto sp : all_species) {
    const auto k = species_index(sp);
    traj.minimum[k] = std::min(traj.minimum[k], sim.species_min(sp));
    traj.maximum[k] = std::max(traj.maximum[k], sim.species_max(sp));
  }
}

}  // namespace detail

/// Runs the whole horizon of an existing simulation.
inline Trajectory run(TwoScaleSimulation& sim) {
  Trajectory traj;
  for (const auto& p : sim.config().output.probes) traj.probes.push_back({p.id, p.x, nearest_node(sim.omega(), p.x), {}});
  const std::size_t steps = sim.config().time.steps();
  const std::size_t cadence = sim.config().time.cadence();
  detail::record(sim, traj);
  traj.samples.push_back(detail::take_sample(sim));
  for (std::size_t n = 1; n <= steps; ++n) {
    sim.step();
    detail::record(sim, traj);
    if (n % cadence == 0 || n == steps) traj.samples.push_back(detail::take_sample(sim));
  }
  return traj;
}

inline Trajectory run_two_scale(const ScenarioConfig& config) {
  TwoScaleSimulation sim(config);
  return run(sim);
}

}  // namespace tsfem
