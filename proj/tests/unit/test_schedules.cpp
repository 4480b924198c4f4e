#include <cmath>

#include <gtest/gtest.h>

#include "sgdclt/errors.hpp"
#include "sgdclt/schedules.hpp"

using namespace sgdclt;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

const ConditionRecord* find_record(const ScheduleCertificate& c, const std::string& name) {
  for (const auto& r : c.details)
    if (r.name == name) return &r;
  return nullptr;
}

}  // namespace

TEST(Schedule, PowerLawValues) {
  const auto s = Schedule::power_law(0.1, 0.5);
  EXPECT_DOUBLE_EQ(s.alpha_at(1), 0.1);
  EXPECT_NEAR(s.alpha_at(4), 0.05, 1e-15);
  EXPECT_NEAR(s.alpha_at(100), 0.01, 1e-15);
}

TEST(Schedule, RejectsBadParameters) {
  EXPECT_THROW(Schedule::power_law(-1.0, 0.5), Error);
  EXPECT_THROW(Schedule::power_law(0.1, 1.5), Error);
  EXPECT_THROW(Schedule::power_law(0.1, 0.5).alpha_at(0), Error);
}

TEST(Schedule, DecrementIsAccurate) {
  const auto s = Schedule::power_law(0.3, 0.7);
  for (std::int64_t k : {1, 10, 1000, 1000000}) {
    const long double exact = 0.3L * (std::pow(static_cast<long double>(k), -0.7L) -
                                      std::pow(static_cast<long double>(k + 1), -0.7L));
    EXPECT_NEAR(s.decrement(k), static_cast<double>(exact), 1e-12 * static_cast<double>(exact));
  }
}

TEST(Schedule, LogFactorClampedBelowE) {
  const auto s = Schedule::power_law_log(1.0, 0.5);
  EXPECT_GT(s.alpha_at(1), 0.0);
  EXPECT_NEAR(s.alpha_at(100), std::log(100.0) / 10.0, 1e-14);
}

TEST(SufficientDecrease, ExamplesFromTheTheory) {
  EXPECT_NEAR(estimate_d0(Schedule::power_law(0.1, 0.5), 1, 1'000'000), 0.0, 1e-3);
  EXPECT_NEAR(estimate_d0(Schedule::power_law(1.0, 0.25), 1, 1'000'000), 0.0, 1e-3);
  EXPECT_NEAR(estimate_d0(Schedule::power_law(0.1, 1.0), 1, 1'000'000), 10.0, 1e-3 * 10.0);
  EXPECT_NEAR(estimate_d0(Schedule::power_law(2.0, 1.0), 1, 1'000'000), 0.5, 1e-3);
  EXPECT_NEAR(estimate_d0(Schedule::power_law_log(1.0, 0.5), 1, 1'000'000, 1e-2, 1e-2), 0.0, 1e-2);
}

TEST(SufficientDecrease, GeometricDoesNotConverge) {
  EXPECT_EQ(code_of([] { estimate_d0(Schedule::geometric(0.1, 0.999), 1, 1'000'000); }),
            ErrorCode::NonConvergent);
}

TEST(SlowCondition, RatioIsOneOnTheDiagonal) {
  const auto s = Schedule::power_law(0.1, 0.5);
  EXPECT_DOUBLE_EQ(h0_slow_ratio(s, 0.3, 500, 500), 1.0);
}

TEST(SlowCondition, Examples) {
  EXPECT_TRUE(check_h0_slow(Schedule::power_law(0.1, 0.5), 0.1, 256, 1'000'000).passed);
  // alpha_n / alpha_m = m / n while the product decays like (m / n)^0.3.
  EXPECT_FALSE(check_h0_slow(Schedule::power_law(3.0, 1.0), 0.1, 256, 1'000'000).passed);
  EXPECT_TRUE(check_h0_slow(Schedule::power_law(3.0, 1.0), 0.5, 256, 1'000'000).passed);
}

TEST(SlowCondition, InvalidFactorOnTheTail) {
  EXPECT_EQ(code_of([] { check_h0_slow(Schedule::constant(0.5), 3.0, 64, 100000); }), ErrorCode::InvalidRange);
}

TEST(SlowCondition, MonotoneInH0) {
  for (const auto& s : {Schedule::power_law(0.1, 0.5), Schedule::power_law(3.0, 1.0), Schedule::power_law(0.1, 1.0)}) {
    bool seen_pass = false;
    for (double h0 : {0.05, 0.1, 0.2, 0.3, 0.34, 0.5, 1.0, 2.0, 5.0, 9.0, 11.0}) {
      bool passed = false;
      try {
        passed = check_h0_slow(s, h0, 256, 1'000'000).passed;
      } catch (const Error& e) {
        ASSERT_EQ(e.code(), ErrorCode::InvalidRange);
        continue;
      }
      if (seen_pass) EXPECT_TRUE(passed) << s.describe() << " h0=" << h0;
      seen_pass = seen_pass || passed;
    }
    EXPECT_TRUE(seen_pass) << s.describe();
  }
}

TEST(SlowCondition, ScalingByBoundedFactor) {
  // alpha_k eta_k with eta_k in [1/2, 3/2] is slow at h0 / (1/2).
  const auto base = Schedule::power_law(0.1, 0.5);
  const auto scaled = Schedule::custom(
      [](std::int64_t k) { return 0.1 * std::pow(static_cast<double>(k), -0.5) * (1.0 + 0.5 * std::sin(static_cast<double>(k))); },
      "eta-scaled");
  ASSERT_TRUE(check_h0_slow(base, 0.1, 256, 1'000'000).passed);
  EXPECT_TRUE(check_h0_slow(scaled, 0.2, 256, 1'000'000).passed);
}

TEST(Divergence, Examples) {
  EXPECT_TRUE(check_divergence(Schedule::power_law(0.1, 0.5), 1'000'000));
  EXPECT_TRUE(check_divergence(Schedule::power_law(0.1, 1.0), 1'000'000));
  EXPECT_FALSE(check_divergence(Schedule::geometric(0.1, 0.999), 1'000'000));
  EXPECT_FALSE(check_divergence(Schedule::constant(0.1), 1'000'000));
}

TEST(Certificate, PowerLawPasses) {
  const auto c = certify_schedule(Schedule::power_law(0.1, 0.5));
  EXPECT_TRUE(c.all_passed());
  EXPECT_NEAR(c.d0_estimate, 0.0, 1e-3);
  EXPECT_TRUE(c.divergence_ok);
  EXPECT_GT(c.Ks_witness, 0.0);
}

TEST(Certificate, InverseScheduleReportsD0) {
  const auto c = certify_schedule(Schedule::power_law(0.1, 1.0));
  EXPECT_NEAR(c.d0_estimate, 10.0, 1e-2);
  EXPECT_GT(c.h0_witness, c.d0_estimate);
  EXPECT_TRUE(c.divergence_ok);
}

TEST(Certificate, GeometricFailsDivergence) {
  const auto c = certify_schedule(Schedule::geometric(0.1, 0.999));
  EXPECT_FALSE(c.divergence_ok);
  EXPECT_FALSE(c.all_passed());
}

TEST(Damping, ValuesAndPartialSums) {
  const auto d = DampingSchedule::power_law(1.0, 0.15);
  EXPECT_DOUBLE_EQ(d.mu_at(1), 1.0);
  EXPECT_NEAR(d.mu_at(1000), std::pow(1000.0, -0.15), 1e-15);
  const auto s = Schedule::power_law(0.5, 0.75);
  const auto ips = DampingSchedule::inverse_partial_sum(2.0, s, 100);
  double sum = 0.0;
  for (std::int64_t k = 1; k <= 10; ++k) sum += s.alpha_at(k);
  EXPECT_NEAR(ips.mu_at(10), 2.0 / sum, 1e-14);
  EXPECT_THROW(DampingSchedule::power_law(1.0, 1.0), Error);
}

TEST(Damping, VanishingPairPasses) {
  const auto c = check_vanishing_damping(Schedule::power_law(0.5, 0.75), DampingSchedule::power_law(1.0, 0.15));
  for (const auto& r : c.details) EXPECT_TRUE(r.passed) << r.name << " = " << r.value << " " << r.note;
  EXPECT_TRUE(c.all_passed());
  ASSERT_TRUE(c.L_mu_estimate.has_value());
  EXPECT_NEAR(*c.L_mu_estimate, 0.0, 2e-2);
  EXPECT_NE(find_record(c, "beta_slow"), nullptr);
}

TEST(Damping, IncompatiblePairs) {
  // alpha_k / mu_k grows when the damping decays faster than the rate.
  EXPECT_EQ(code_of([] {
              check_vanishing_damping(Schedule::power_law(0.5, 0.3), DampingSchedule::power_law(1.0, 0.5));
            }),
            ErrorCode::IncompatiblePair);
  EXPECT_EQ(code_of([] {
              check_vanishing_damping(Schedule::power_law(0.5, 0.75), DampingSchedule::constant(0.2));
            }),
            ErrorCode::IncompatiblePair);
}
