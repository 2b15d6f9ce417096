#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "tsfem/micro_dynamics.hpp"

using namespace tsfem;

namespace {

const MicroMeshes& meshes() {
  static const MicroMeshes m = make_micro_meshes(DziukMap{}, 4, 32);
  return m;
}

MicroState constant_state(double rf, double rb, double pd, double pa, double ci) {
  const auto s = static_cast<Eigen::Index>(meshes().gamma.node_count());
  const auto b = static_cast<Eigen::Index>(meshes().y_i.node_count());
  return {Vector::Constant(s, rf), Vector::Constant(s, rb), Vector::Constant(s, pd), Vector::Constant(s, pa),
          Vector::Constant(b, ci), 0};
}

MicroState random_state(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto s = constant_state(0, 0, 0, 0, 0);
  for (Vector* v : {&s.r_f, &s.r_b, &s.p_d, &s.p_a, &s.c_i})
    for (auto& x : *v) x = u(rng);
  return s;
}

MicroDiffusion diffusion(double d) { return {d, d, d, d, 10.0 * d}; }

double curve_sum(const MicroOperators& ops, const Vector& v) { return ops.curve_mass.dot(v); }
double bulk_sum(const MicroOperators& ops, const Vector& v) { return ops.bulk_mass.dot(v); }

double min_entry(const MicroState& s) {
  double m = 1e300;
  for (const Vector* v : {&s.r_f, &s.r_b, &s.p_d, &s.p_a, &s.c_i}) m = std::min(m, v->minCoeff());
  return m;
}

}  // namespace

TEST(BuildMicroOperators, NoDiffusionNoDecayGivesLumpedMass) {
  const auto ops = build_micro_operators(meshes(), {}, ReactionSpec{}, 0.3);
  for (int s = 0; s < 4; ++s) {
    const auto& a = ops.surface_operator[s];
    for (std::size_t i = 0; i < a.dimension(); ++i)
      for (std::size_t j = 0; j < a.dimension(); ++j)
        EXPECT_EQ(a.value(i, j), i == j ? ops.curve_mass[static_cast<Eigen::Index>(i)] : 0.0);
  }
}

TEST(BuildMicroOperators, UnitDecayHalvesState) {
  ReactionSpec spec;
  spec.d_f = spec.d_b = spec.d_d = spec.d_a = 1.0;
  const auto ops = build_micro_operators(meshes(), {}, spec, 1.0);
  const auto start = random_state(1);
  const auto next = micro_step(start, 0.0, spec, ops);
  for (auto [a, b] : {std::pair{&next.r_f, &start.r_f}, {&next.r_b, &start.r_b}, {&next.p_d, &start.p_d}, {&next.p_a, &start.p_a}})
    EXPECT_LT((*a - 0.5 * *b).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(BuildMicroOperators, BulkOperatorOnConstantsIsMass) {
  const auto ops = build_micro_operators(meshes(), diffusion(1.0), ReactionSpec{}, 0.1);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(ops.bulk_dofs()));
  EXPECT_LT((ops.bulk_operator.apply(ones) - ops.bulk_mass).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(BuildMicroOperators, RejectsBadInputs) {
  for (auto bad : {MicroDiffusion{-1, 0, 0, 0, 0}, MicroDiffusion{0, 0, 0, 0, -1}}) {
    try {
      build_micro_operators(meshes(), bad, ReactionSpec{}, 0.1);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::configuration);
    }
  }
  EXPECT_THROW(build_micro_operators(meshes(), {}, ReactionSpec{}, 0.0), Error);
  ReactionSpec spec;
  spec.d_b = -0.5;
  EXPECT_THROW(build_micro_operators(meshes(), {}, spec, 0.1), Error);
}

TEST(ReactionSpec, ValidateRejectsNegativeRate) {
  ReactionSpec spec;
  spec.kappa_i = -1.0;
  try {
    spec.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::validation);
    EXPECT_NE(std::string(e.what()).find("kappa_i"), std::string::npos);
  }
}

TEST(MicroStep, ZeroRatesKeepConstants) {
  const ReactionSpec spec;
  const auto ops = build_micro_operators(meshes(), diffusion(0.7), spec, 0.05);
  const auto start = constant_state(0.3, 0.2, 0.1, 0.4, 1.5);
  const auto next = micro_step(start, 2.0, spec, ops);
  EXPECT_LT((next.r_f - start.r_f).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((next.p_a - start.p_a).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((next.c_i - start.c_i).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(next.time_index, 1u);
}

TEST(MicroStep, BindingCaricature) {
  ReactionSpec spec;
  spec.a_e = 1.0;
  const auto ops = build_micro_operators(meshes(), {}, spec, 0.1);
  const auto next = micro_step(constant_state(1.0, 0.0, 0.0, 0.0, 0.0), 1.0, spec, ops);
  EXPECT_LT((next.r_f.array() - 0.9).abs().maxCoeff(), 1e-14);
  EXPECT_LT((next.r_b.array() - 0.1).abs().maxCoeff(), 1e-14);
}

TEST(MicroStep, TransductionExchangeIsExact) {
  ReactionSpec spec;
  spec.gamma_i = 1.0;
  const auto ops = build_micro_operators(meshes(), diffusion(0.2), spec, 0.1);
  const auto start = constant_state(0.0, 0.0, 0.0, 0.8, 0.0);
  const auto next = micro_step(start, 0.0, spec, ops);
  const double lost = curve_sum(ops, start.p_a) - curve_sum(ops, next.p_a);
  const double gained = bulk_sum(ops, next.c_i) - bulk_sum(ops, start.c_i);
  EXPECT_GT(lost, 0.0);
  EXPECT_NEAR(lost, gained, 1e-13 * lost);
  // the transferred amount is tau * gamma * p_a * |Gamma_h|
  EXPECT_NEAR(lost, 0.1 * 0.8 * ops.curve_mass.sum(), 1e-13);
}

TEST(MicroStep, CombinedInvariantOverHundredSteps) {
  ReactionSpec spec;
  spec.a_i = 3.0;
  spec.b_i = 0.5;
  spec.gamma_i = 2.0;
  spec.kappa_i = 1.0;
  const auto ops = build_micro_operators(meshes(), diffusion(0.1), spec, 0.01);
  auto state = random_state(7);
  auto invariant = [&](const MicroState& s) {
    return curve_sum(ops, s.r_f + s.r_b + s.p_a) + bulk_sum(ops, s.c_i);
  };
  const double start = invariant(state);
  for (int n = 0; n < 100; ++n) state = micro_step(state, 1.0, spec, ops);
  EXPECT_NEAR(invariant(state), start, 1e-10 * start);
}

TEST(MicroStep, ZeroReactionsConserveEachSpecies) {
  const ReactionSpec spec;
  const auto ops = build_micro_operators(meshes(), diffusion(0.3), spec, 0.02);
  auto state = random_state(11);
  const auto first = state;
  for (int n = 0; n < 100; ++n) state = micro_step(state, 1.0, spec, ops);
  for (auto [a, b] : {std::pair{&state.r_f, &first.r_f}, {&state.r_b, &first.r_b}, {&state.p_d, &first.p_d}, {&state.p_a, &first.p_a}})
    EXPECT_NEAR(curve_sum(ops, *a), curve_sum(ops, *b), 1e-10 * curve_sum(ops, *b));
  EXPECT_NEAR(bulk_sum(ops, state.c_i), bulk_sum(ops, first.c_i), 1e-10 * bulk_sum(ops, first.c_i));
}

TEST(MicroStep, ReceptorBalance) {
  ReactionSpec spec;
  spec.a_e = 2.0;
  spec.b_e = 0.7;
  const double tau = 0.01, c_e = 0.6;
  const auto ops = build_micro_operators(meshes(), diffusion(0.1), spec, tau);
  const auto start = random_state(3);
  const auto next = micro_step(start, c_e, spec, ops);
  // r_f + r_b is conserved; r_f alone loses tau * sum m G_e
  EXPECT_NEAR(curve_sum(ops, next.r_f + next.r_b), curve_sum(ops, start.r_f + start.r_b), 1e-13);
  double ge = 0.0;
  for (Eigen::Index j = 0; j < start.r_f.size(); ++j)
    ge += ops.curve_mass[j] * (spec.a_e * c_e * start.r_f[j] - spec.b_e * start.r_b[j]);
  EXPECT_NEAR(curve_sum(ops, next.r_f) - curve_sum(ops, start.r_f), -tau * ge, 1e-13);
}

TEST(MicroStep, NonnegativeUnderStepBound) {
  ReactionSpec spec;
  spec.a_e = 100.0;
  spec.b_e = 5.0;
  spec.a_i = 60.0;
  spec.b_i = 10.0;
  spec.gamma_i = 2.0;
  spec.kappa_i = 1.0;
  const double c_e = 1.0;
  auto state = random_state(5);
  const double tau = spec.step_bound(c_e, state.p_d.maxCoeff());
  const auto ops = build_micro_operators(meshes(), diffusion(0.01), spec, tau);
  for (int n = 0; n < 200; ++n) {
    state = micro_step(state, c_e, spec, ops);
    ASSERT_GE(min_entry(state), -1e-12) << "step " << n;
  }
}

TEST(MicroStep, LaggedImplicitStaysNonnegativeWithLargeSteps) {
  ReactionSpec spec;
  spec.a_e = 100.0;
  spec.b_e = 5.0;
  spec.a_i = 6000.0;
  spec.b_i = 10.0;
  spec.gamma_i = 2.0;
  spec.kappa_i = 1.0;
  const auto ops = build_micro_operators(meshes(), diffusion(0.01), spec, 0.01, 1.0, ReactionTreatment::lagged_implicit);
  auto state = random_state(9);
  for (int n = 0; n < 100; ++n) {
    state = micro_step(state, 1.0, spec, ops);
    ASSERT_GE(min_entry(state), -1e-12) << "step " << n;
  }
}

TEST(MicroStep, LaggedImplicitAgreesToSecondOrderPerStep) {
  ReactionSpec spec;
  spec.a_e = 3.0;
  spec.b_e = 1.0;
  spec.a_i = 4.0;
  spec.b_i = 2.0;
  spec.gamma_i = 1.5;
  spec.kappa_i = 0.5;
  const auto start = random_state(13);
  std::vector<double> gaps;
  // without diffusion the two treatments differ only in the reaction terms
  for (double tau : {1e-2, 5e-3, 2.5e-3}) {
    const auto a = micro_step(start, 0.8, spec, build_micro_operators(meshes(), {}, spec, tau));
    const auto b = micro_step(start, 0.8, spec,
                              build_micro_operators(meshes(), {}, spec, tau, 1.0, ReactionTreatment::lagged_implicit));
    double gap = 0.0;
    for (auto [x, y] : {std::pair{&a.r_f, &b.r_f}, {&a.r_b, &b.r_b}, {&a.p_d, &b.p_d}, {&a.p_a, &b.p_a}, {&a.c_i, &b.c_i}})
      gap = std::max(gap, (*x - *y).cwiseAbs().maxCoeff());
    gaps.push_back(gap);
  }
  for (std::size_t k = 1; k < gaps.size(); ++k) EXPECT_NEAR(gaps[k - 1] / gaps[k], 4.0, 0.4);
}

TEST(MicroStep, NonFiniteLoadNamesSpeciesAndNode) {
  ReactionSpec spec;
  spec.a_e = 1.0;
  const auto ops = build_micro_operators(meshes(), {}, spec, 0.1);
  auto state = constant_state(0.0, 0.0, 0.0, 0.0, 0.0);
  state.r_f[3] = 1e300;
  try {
    micro_step(state, 1e300, spec, ops);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::step);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("r_f"), std::string::npos) << msg;
    EXPECT_NE(msg.find("node 3"), std::string::npos) << msg;
  }
}

TEST(CouplingFlux, ZeroStateAndZeroRates) {
  ReactionSpec spec;
  spec.a_e = 2.0;
  spec.b_e = 1.0;
  const auto ops = build_micro_operators(meshes(), {}, spec, 0.1);
  EXPECT_EQ(coupling_flux(constant_state(0, 0, 0, 0, 0), 1.0, spec, ops), 0.0);
  EXPECT_EQ(coupling_flux(random_state(2), 1.0, ReactionSpec{}, ops), 0.0);
}

TEST(CouplingFlux, ConstantStateClosedForm) {
  ReactionSpec spec;
  spec.a_e = 2.0;
  spec.b_e = 0.5;
  const double volume = 16.0;
  const auto ops = build_micro_operators(meshes(), {}, spec, 0.1, volume);
  double length = 0.0;
  const auto& g = meshes().gamma;
  for (const auto& seg : g.segments) length += std::hypot(g.nodes[seg[1]][0] - g.nodes[seg[0]][0], g.nodes[seg[1]][1] - g.nodes[seg[0]][1]);
  const double R = 0.3, B = 0.2, c = 1.7;
  EXPECT_NEAR(coupling_flux(constant_state(R, B, 0, 0, 0), c, spec, ops), length / volume * (2.0 * c * R - 0.5 * B), 1e-14);
}

TEST(TwoScaleField, PermutingMacroNodesPermutesResultsBitExactly) {
  ReactionSpec spec;
  spec.a_e = 1.0;
  spec.b_e = 0.2;
  spec.a_i = 5.0;
  spec.b_i = 1.0;
  spec.gamma_i = 1.0;
  spec.kappa_i = 0.3;
  const auto ops = build_micro_operators(meshes(), diffusion(0.1), spec, 0.01);
  const std::size_t nodes = 6;
  TwoScaleField field(ops.surface_dofs(), ops.bulk_dofs(), nodes);
  std::vector<double> c_e(nodes);
  for (std::size_t k = 0; k < nodes; ++k) {
    field.set_state(k, random_state(static_cast<unsigned>(100 + k)));
    c_e[k] = 0.1 * static_cast<double>(k + 1);
  }
  std::vector<std::size_t> perm(nodes);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[1], perm[4]);
  TwoScaleField permuted(ops.surface_dofs(), ops.bulk_dofs(), nodes);
  for (std::size_t k = 0; k < nodes; ++k) permuted.set_state(k, field.state(perm[k]));

  TwoScaleField a(ops.surface_dofs(), ops.bulk_dofs(), nodes), b = a;
  for (std::size_t k = 0; k < nodes; ++k) {
    micro_step(field.node(k), a.node(k), c_e[k], spec, ops);
    micro_step(permuted.node(k), b.node(k), c_e[perm[k]], spec, ops);
  }
  for (std::size_t k = 0; k < nodes; ++k) {
    const auto x = a.state(perm[k]);
    const auto y = b.state(k);
    EXPECT_EQ(x.r_f, y.r_f);
    EXPECT_EQ(x.p_a, y.p_a);
    EXPECT_EQ(x.c_i, y.c_i);
  }
  // the column kernel agrees with the standalone step
  const auto single = micro_step(field.state(2), c_e[2], spec, ops);
  EXPECT_EQ(single.r_b, a.state(2).r_b);
}

TEST(MicroStep, LaggedImplicitTransfersBalance) {
  ReactionSpec spec;
  spec.a_e = 100.0;
  spec.b_e = 5.0;
  spec.a_i = 6000.0;
  spec.b_i = 10.0;
  spec.gamma_i = 2.0;
  spec.kappa_i = 1.0;
  const auto ops = build_micro_operators(meshes(), diffusion(0.01), spec, 0.01, 1.0, ReactionTreatment::lagged_implicit);
  auto state = random_state(17);
  auto total = [&](const MicroState& s) { return curve_sum(ops, s.r_f + s.r_b + s.p_a) + bulk_sum(ops, s.c_i); };
  const double start = total(state);
  for (int n = 0; n < 50; ++n) state = micro_step(state, 1.0, spec, ops);
  EXPECT_NEAR(total(state), start, 1e-12 * start);
  EXPECT_GE(min_entry(state), 0.0);
}

TEST(MicroStep, LaggedImplicitExchangeInvariant) {
  ReactionSpec spec;
  spec.gamma_i = 2.0;
  spec.kappa_i = 1.0;
  const auto ops = build_micro_operators(meshes(), diffusion(0.1), spec, 0.01, 1.0, ReactionTreatment::lagged_implicit);
  auto state = random_state(23);
  auto invariant = [&](const MicroState& s) { return curve_sum(ops, s.p_a) + bulk_sum(ops, s.c_i); };
  const double start = invariant(state);
  for (int n = 0; n < 100; ++n) state = micro_step(state, 1.0, spec, ops);
  EXPECT_NEAR(invariant(state), start, 1e-10 * start);
}
