#include "hams/samplers.hpp"
#include "oracle_values.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using hams::BaselineConfig;
using hams::BaselineKind;
using hams::CachedState;
using hams::HamsConfig;
using hams::RngStream;
using hams::Vector;
using testing_support::isotropic_normal;
using testing_support::quartic_chain;
using testing_support::standard_normal;

namespace {

Vector scalar(double v) { return Vector::Constant(1, v); }

CachedState at1(const hams::TargetModel& t, double x, double u) {
  return CachedState::at(t, scalar(x), scalar(u));
}

struct AbCase {
  double gamma, a, b, x0, u0, zeta;
  double x_star, u_star, zeta_star, log_rho;
};

void check_ab(const HamsConfig& cfg, const AbCase& c) {
  const auto t = isotropic_normal(1, c.gamma);
  const auto p = hams::hams_ab_propose(at1(t, c.x0, c.u0), cfg, t, scalar(c.zeta));
  EXPECT_NEAR(p.star.x[0], c.x_star, 1e-14);
  EXPECT_NEAR(p.star.u[0], c.u_star, 1e-14);
  EXPECT_NEAR(p.zeta_star[0], c.zeta_star, 1e-14);
  EXPECT_NEAR(p.log_rho, c.log_rho, 1e-13);
}

}  // namespace

TEST(HamsAbOracle, HamsASymmetricCase) {
  check_ab(HamsConfig::make_a(0.5, 0.5),
           {4, 0.5, 0.5, 1, 0.5, 0.3, oracle::kHamsA_x_star, oracle::kHamsA_u_star,
            oracle::kHamsA_zeta_star, oracle::kHamsA_log_rho});
}

TEST(HamsAbOracle, HamsBSymmetricCase) {
  check_ab(HamsConfig::make_b(0.5, 0.5),
           {4, 0.5, 0.5, 1, 0.5, 0.3, oracle::kHamsB_x_star, oracle::kHamsB_u_star,
            oracle::kHamsB_zeta_star, oracle::kHamsB_log_rho});
}

TEST(HamsAbOracle, HamsAGenericCase) {
  check_ab(HamsConfig::make_a(0.3, 0.4),
           {1.7, 0.3, 0.4, 0.8, -0.6, 1.1, oracle::kHamsA2_x_star, oracle::kHamsA2_u_star,
            oracle::kHamsA2_zeta_star, oracle::kHamsA2_log_rho});
}

TEST(HamsAbOracle, HamsBGenericCase) {
  check_ab(HamsConfig::make_b(0.3, 0.4),
           {1.7, 0.3, 0.4, 0.8, -0.6, 1.1, oracle::kHamsB2_x_star, oracle::kHamsB2_u_star,
            oracle::kHamsB2_zeta_star, oracle::kHamsB2_log_rho});
}

TEST(HamsGeneralOracle, HandComputedStep) {
  const auto t = isotropic_normal(1, 2.5);
  const auto cfg = HamsConfig::make_general(0.4, 0.1, 0.6, 0.2);
  const auto f = hams::GeneralNoiseFactor::of(cfg);
  const auto p = hams::hams_general_propose(at1(t, 0.7, -0.3), cfg, t, scalar(0.25), scalar(-0.4), f);
  EXPECT_NEAR(p.star.x[0], oracle::kGeneral_x_star, 1e-14);
  EXPECT_NEAR(p.star.u[0], oracle::kGeneral_u_star, 1e-14);
  EXPECT_NEAR(p.log_rho, oracle::kGeneral_log_rho, 1e-13);
}

TEST(HamsGeneral, NoiseFactorForDiagonalA) {
  // A = diag(0.5, 0.5): S = 0.75 I.
  const auto f = hams::GeneralNoiseFactor::of(HamsConfig::make_general(0.5, 0.0, 0.5, 0.0));
  EXPECT_NEAR(f.l11 * f.l11, 0.75, 1e-15);
  EXPECT_NEAR(f.l21, 0.0, 1e-15);
  EXPECT_NEAR(f.l22 * f.l22, 0.75, 1e-15);
  EXPECT_NEAR(f.i11, 1.0 / 0.75, 1e-14);
}

TEST(HamsGeneral, SingularNoiseIsRejectedWithPointer) {
  // A = [[1, 1], [1, 1]] has eigenvalues 0 and 2, so 2A - A^2 vanishes.
  try {
    hams::GeneralNoiseFactor::of(HamsConfig::make_general(1.0, 1.0, 1.0, 0.0));
    FAIL() << "expected ConfigError";
  } catch (const hams::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("HAMS-A"), std::string::npos);
  }
}

TEST(HamsAb, ZeroAKeepsPositionAndHasUnitRatio) {
  const auto t = quartic_chain(3);
  RngStream rng(4, 0);
  for (auto cfg : {HamsConfig::make_a(0.0, 0.7), HamsConfig::make_b(0.0, 0.7)}) {
    const auto s = CachedState::at(t, Vector{{0.3, -1.0, 2.0}}, Vector{{1.0, 0.5, -0.2}});
    const auto p = hams::hams_ab_propose(s, cfg, t, hams::standard_normal_vector(rng, 3));
    EXPECT_EQ(p.star.x, s.x);
    EXPECT_EQ(p.log_rho, 0.0);
  }
}

TEST(HamsAb, RejectionFreeOnStandardNormal) {
  const auto t = standard_normal(4);
  RngStream rng(8, 0);
  for (auto cfg : {HamsConfig::make_a(0.4, 0.9), HamsConfig::make_b(1.1, 0.3)}) {
    auto s = CachedState::at(t, Vector::Zero(4), Vector::Zero(4));
    for (int i = 0; i < 2000; ++i) {
      auto out = hams::hams_ab_step(s, cfg, t, rng);
      ASSERT_NEAR(out.log_rho, 0.0, 1e-10);
      ASSERT_TRUE(out.accepted);
      s = out.next;
    }
  }
}

TEST(HamsGeneral, RejectionFreeOnStandardNormal) {
  const auto t = standard_normal(3);
  const auto cfg = HamsConfig::make_general(0.3, 0.15, 0.6, 0.4);
  RngStream rng(9, 0);
  auto s = CachedState::at(t, Vector::Zero(3), Vector::Zero(3));
  for (int i = 0; i < 2000; ++i) {
    auto out = hams::hams_general_step(s, cfg, t, rng);
    ASSERT_NEAR(out.log_rho, 0.0, 1e-10);
    s = out.next;
  }
}

TEST(HamsAb, ProposalIsAnInvolutionUnderMomentumFlip) {
  const auto t = quartic_chain(5);
  RngStream rng(12, 0);
  for (auto cfg : {HamsConfig::make_a(0.35, 0.8), HamsConfig::make_b(0.6, 1.0)}) {
    for (int i = 0; i < 100; ++i) {
      const Vector x = hams::standard_normal_vector(rng, 5);
      const Vector u = hams::standard_normal_vector(rng, 5);
      const Vector z = hams::standard_normal_vector(rng, 5);
      const auto fwd = hams::hams_ab_propose(CachedState::at(t, x, u), cfg, t, z);
      const auto back = hams::hams_ab_propose(CachedState::at(t, fwd.star.x, -fwd.star.u), cfg, t,
                                              -fwd.zeta_star);
      EXPECT_LT((back.star.x - x).norm(), 1e-12 * std::max(1.0, x.norm()));
      EXPECT_LT((back.star.u + u).norm(), 1e-12 * std::max(1.0, u.norm()));
      EXPECT_LT((back.zeta_star + z).norm(), 1e-12 * std::max(1.0, z.norm()));
      EXPECT_NEAR(back.log_rho, -fwd.log_rho, 1e-10 * std::max(1.0, std::abs(fwd.log_rho)));
    }
  }
}

TEST(HamsAb, RejectionFlipsMomentum) {
  // A huge a on a stiff target makes acceptance essentially impossible.
  const auto t = isotropic_normal(2, 400.0);
  RngStream rng(3, 0);
  const auto s = CachedState::at(t, Vector{{0.05, -0.05}}, Vector{{1.0, 2.0}});
  const auto out = hams::hams_ab_step(s, HamsConfig::make_a(1.9, 0.05), t, rng);
  ASSERT_FALSE(out.accepted);
  EXPECT_EQ(out.next.x, s.x);
  EXPECT_EQ(out.next.u, -s.u);
}

TEST(HamsAb, GeneralVariantIsRejectedBySpecialisedSteps) {
  const auto t = standard_normal(1);
  RngStream rng(1, 0);
  const auto s = at1(t, 0, 0);
  EXPECT_THROW(hams::hams_ab_step(s, HamsConfig::make_general(0.3, 0.1, 0.3, 0), t, rng),
               hams::ConfigError);
  EXPECT_THROW(hams::hams_a_step(s, HamsConfig::make_b(0.3, 0.1), t, rng), hams::ConfigError);
  EXPECT_THROW(hams::hams_b_step(s, HamsConfig::make_a(0.3, 0.1), t, rng), hams::ConfigError);
}

TEST(HamsAb, DimensionMismatchIsContractViolation) {
  const auto t = standard_normal(2);
  const auto s = CachedState::at(t, Vector::Zero(2), Vector::Zero(2));
  EXPECT_THROW(hams::hams_ab_propose(s, HamsConfig::make_a(0.3, 0.3), t, Vector::Zero(3)),
               hams::ContractViolation);
}

TEST(Pmala, HandComputedProposal) {
  const auto t = standard_normal(1);
  BaselineConfig cfg{BaselineKind::pMALA, 0.5, 0.0, 1};
  CachedState star;
  const double lr = hams::grad_langevin_propose(at1(t, 1.0, 0.0), cfg, t, nullptr, scalar(0.0), star);
  EXPECT_NEAR(star.x[0], oracle::kPmala_x_star, 1e-15);
  EXPECT_NEAR(lr, oracle::kPmala_log_rho, 1e-15);
}

TEST(Rwm, AlwaysAcceptsOnFlatPotential) {
  hams::TargetModel flat(3, [](const Vector& x, Vector& g) {
    g = Vector::Zero(x.size());
    return 0.0;
  });
  RngStream rng(6, 0);
  auto s = CachedState::at(flat, Vector::Zero(3), Vector::Zero(3));
  for (int i = 0; i < 500; ++i) {
    auto out = hams::grad_langevin_step(s, {BaselineKind::RWM, 0.7, 0, 1}, flat, nullptr, rng);
    ASSERT_TRUE(out.accepted);
    s = out.next;
  }
}

TEST(PmalaStar, RejectionFreeOnStandardNormal) {
  const auto t = standard_normal(3);
  RngStream rng(7, 0);
  auto s = CachedState::at(t, Vector::Zero(3), Vector::Zero(3));
  for (int i = 0; i < 1000; ++i) {
    auto out = hams::grad_langevin_step(s, {BaselineKind::pMALAstar, 0.8, 0, 1}, t, nullptr, rng);
    ASSERT_NEAR(out.log_rho, 0.0, 1e-10);
    s = out.next;
  }
}

TEST(Pcnl, RejectionFreeOnItsGaussianPrior) {
  hams::Matrix C = hams::ar1_correlation(4, 0.6);
  const auto t = hams::MvnTarget(C).target();
  const hams::GaussianScale scale(C);
  RngStream rng(8, 0);
  auto s = CachedState::at(t, Vector::Zero(4), Vector::Zero(4));
  for (int i = 0; i < 1000; ++i) {
    auto out = hams::grad_langevin_step(s, {BaselineKind::pCNL, 0.6, 0, 1}, t, &scale, rng);
    ASSERT_NEAR(out.log_rho, 0.0, 1e-9);
    s = out.next;
  }
}

TEST(Pcnl, MissingCovarianceIsConfigError) {
  const auto t = standard_normal(1);
  RngStream rng(1, 0);
  EXPECT_THROW(hams::grad_langevin_step(at1(t, 0, 0), {BaselineKind::pCNL, 0.5, 0, 1}, t, nullptr, rng),
               hams::ConfigError);
  EXPECT_THROW(
      hams::grad_langevin_step(at1(t, 0, 0), {BaselineKind::pMALAstar, 1.2, 0, 1}, t, nullptr, rng),
      hams::ConfigError);
}

TEST(Leapfrog, FreeParticleMovesLinearly) {
  hams::TargetModel flat(2, [](const Vector& x, Vector& g) {
    g = Vector::Zero(x.size());
    return 0.0;
  });
  const auto out = hams::leapfrog({Vector{{1.0, 2.0}}, Vector{{0.5, -1.0}}}, 0.1, 10, flat);
  EXPECT_NEAR(out.x[0], 1.5, 1e-14);
  EXPECT_NEAR(out.x[1], 1.0, 1e-14);
  EXPECT_EQ(out.u, (Vector{{0.5, -1.0}}));
}

TEST(Leapfrog, HarmonicOscillatorOneStep) {
  const auto out = hams::leapfrog({scalar(1.0), scalar(0.0)}, 0.1, 1, standard_normal(1));
  EXPECT_NEAR(out.x[0], oracle::kLeapfrog_x, 1e-15);
  EXPECT_NEAR(out.u[0], oracle::kLeapfrog_u, 1e-15);
}

TEST(Leapfrog, EnergyDriftStaysSmall) {
  const auto t = standard_normal(1);
  hams::AugmentedState s{scalar(1.0), scalar(0.0)};
  const double h0 = hams::hamiltonian(s, t);
  for (int i = 0; i < 1000; ++i) {
    s = hams::leapfrog(s, 0.1, 1, t);
    ASSERT_LE(std::abs(hams::hamiltonian(s, t) - h0), 1e-2);
  }
}

TEST(Leapfrog, ZeroStepsIsContractViolation) {
  EXPECT_THROW(hams::leapfrog({scalar(1.0), scalar(0.0)}, 0.1, 0, standard_normal(1)),
               hams::ContractViolation);
}

TEST(Hmc, SmallStepsAcceptAlmostAlways) {
  const auto t = standard_normal(5);
  RngStream rng(21, 0);
  auto s = CachedState::at(t, Vector::Zero(5), Vector::Zero(5));
  int acc = 0;
  for (int i = 0; i < 1000; ++i) {
    auto out = hams::hmc_step(s, {BaselineKind::HMC, 0.1, 0, 10}, t, rng);
    acc += out.accepted;
    s = out.next;
  }
  EXPECT_GE(acc, 950);
}

TEST(Hmc, SingleLeapfrogMatchesUdlWithFullRefresh) {
  // HMC with one leapfrog step proposes exactly what UDL with c = 0 does
  // before its second refresh; both draw z1 first.
  const auto t = quartic_chain(3);
  RngStream r1(5, 1), r2(5, 1);
  const auto s = CachedState::at(t, Vector{{0.2, 0.1, -0.4}}, Vector{{1, 1, 1}});
  const auto h = hams::hmc_step(s, {BaselineKind::HMC, 0.3, 0, 1}, t, r1);
  const Vector z1 = hams::standard_normal_vector(r2, 3);
  const auto p = hams::udl_propose(s, 0.3, 0.0, t, z1, nullptr);
  EXPECT_LT((h.proposal.x - p.after_leapfrog.x).norm(), 1e-15);
  EXPECT_NEAR(h.log_rho, p.log_rho, 1e-14);
}

TEST(Hmc, RejectionReturnsNegatedRedrawnMomentum) {
  const auto t = isotropic_normal(2, 1e4);
  RngStream rng(2, 0), copy(2, 0);
  const auto s = CachedState::at(t, Vector{{0.01, 0.0}}, Vector{{5.0, 5.0}});
  const auto out = hams::hmc_step(s, {BaselineKind::HMC, 0.5, 0, 3}, t, rng);
  ASSERT_FALSE(out.accepted);
  EXPECT_EQ(out.next.x, s.x);
  EXPECT_EQ(out.next.u, -hams::standard_normal_vector(copy, 2));
}

TEST(Udl, FullCarryoverIsMetropolisedLeapfrog) {
  const auto t = quartic_chain(3);
  RngStream r1(5, 2), r2(5, 2);
  const auto s = CachedState::at(t, Vector{{0.2, 0.1, -0.4}}, Vector{{0.3, -1, 0.5}});
  const auto out = hams::udl_step(s, {BaselineKind::UDL, 0.25, 1.0, 1}, t, r1);
  const auto lf = hams::leapfrog({s.x, s.u}, 0.25, 1, t);
  EXPECT_LT((out.proposal.x - lf.x).norm(), 1e-15);
  EXPECT_LT((out.proposal.u - lf.u).norm(), 1e-15);
  EXPECT_EQ(out.accepted, hams::metropolis_accept(out.log_rho, r2));
}

TEST(Gmc, FullCarryoverMatchesUdl) {
  const auto t = quartic_chain(4);
  RngStream r1(31, 0), r2(31, 0);
  auto a = CachedState::at(t, Vector::Constant(4, 0.5), Vector::Constant(4, -0.5));
  auto b = a;
  for (int i = 0; i < 200; ++i) {
    a = hams::udl_step(a, {BaselineKind::UDL, 0.4, 1.0, 1}, t, r1).next;
    b = hams::gmc_step(b, {BaselineKind::GMC, 0.4, 1.0, 1}, t, r2).next;
    ASSERT_LT((a.x - b.x).norm(), 1e-13);
    ASSERT_LT((a.u - b.u).norm(), 1e-13);
  }
}

TEST(Gmc, RejectionNegatesRefreshedMomentum) {
  const auto t = isotropic_normal(1, 1e4);
  RngStream rng(3, 0), copy(3, 0);
  const double c = 0.3;
  const auto s = at1(t, 0.01, 4.0);
  const auto out = hams::gmc_step(s, {BaselineKind::GMC, 0.5, c, 1}, t, rng);
  ASSERT_FALSE(out.accepted);
  const double z = copy.normal();
  EXPECT_NEAR(out.next.u[0], -(std::sqrt(c) * 4.0 + std::sqrt(1 - c) * z), 1e-14);
}

TEST(Udl, RejectionNegatesOriginalMomentum) {
  const auto t = isotropic_normal(1, 1e4);
  RngStream rng(3, 0);
  const auto s = at1(t, 0.01, 4.0);
  const auto out = hams::udl_step(s, {BaselineKind::UDL, 0.5, 0.3, 1}, t, rng);
  ASSERT_FALSE(out.accepted);
  EXPECT_EQ(out.next.u[0], -4.0);
}

TEST(BaselineConfig, ValidationErrors) {
  EXPECT_THROW((BaselineConfig{BaselineKind::RWM, 0.0, 0, 1}).validate(), hams::ConfigError);
  EXPECT_THROW((BaselineConfig{BaselineKind::UDL, 0.1, 1.5, 1}).validate(), hams::ConfigError);
  EXPECT_THROW((BaselineConfig{BaselineKind::HMC, 0.1, 0, 0}).validate(), hams::ConfigError);
  EXPECT_NO_THROW((BaselineConfig{BaselineKind::GMC, 0.1, 1.0, 1}).validate());
}

TEST(LangevinDrift, NonLangevinKindsAreRejected) {
  EXPECT_THROW(hams::langevin_drift({BaselineKind::HMC, 0.1, 0, 1}), hams::ConfigError);
  EXPECT_DOUBLE_EQ(hams::langevin_drift({BaselineKind::pMALA, 0.2, 0, 1}), 0.02);
}
