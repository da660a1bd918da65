#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qpkam/regularization.hpp"

using namespace qpkam;
using namespace qpkam::testing;

namespace {

const Complex I(0.0, 1.0);
constexpr double kPi = std::numbers::pi;

// quadrature oracle for m2(phi) = (x-average of (1 + eps V2)^{-1/2})^{-2}
double m2_quadrature(const AnalyticField& V2, double eps, const std::vector<double>& phi, int n = 256) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = 2 * kPi * i / n;
    acc += std::pow(1.0 + eps * V2.evaluate(x, phi).real(), -0.5);
  }
  return std::pow(acc / n, -2.0);
}

SchrodingerInput constant_input(double eps, double c2, double c1, double c0) {
  Envelope env{1.0, 4.0, 32};
  Frequency om({1, 2}, {1.2360679774997896, 1.4142135623730951});
  auto c = [&](double v) { return AnalyticField::constant(env, 1.0, v, 1); };
  return SchrodingerInput::complete(env, om, eps, 1.0, c(c2), c(c1), c(c0));
}

}  // namespace

TEST(NormalForm, MuExamples) {
  const std::array<double, 4> lam{2.0, 0.5, 0.25, 3.0};
  EXPECT_EQ(normal_form_mu(lam, 0), 0.25);
  EXPECT_EQ(normal_form_mu(lam, 1), -2.0 + 0.5 + 0.25 - 3.0);
  EXPECT_EQ(normal_form_mu(lam, -2), -8.0 - 1.0 + 0.25 + 1.5);
  auto sym = normal_form_symbol(lam, 2);
  ASSERT_EQ(sym.size(), 5u);
  EXPECT_EQ(sym[3], I * normal_form_mu(lam, 1));
  EXPECT_EQ(schedule_width(1.0, 4), 0.75);
  EXPECT_EQ(schedule_width(2.0, 16), 0.0);
}

TEST(SkewDefect, Examples) {
  Envelope env{1.0, 4.0, 16};
  auto c = [&](Complex v) { return AnalyticField::constant(env, 1.0, v, 2); };
  EXPECT_EQ(skew_symbol_defect(c(I), c(0.0), c(0.0)), 0.0);
  EXPECT_EQ(skew_symbol_defect(c(0.0), c(1.0), c(I)), 0.0);  // d + i is skew
  EXPECT_NEAR(skew_symbol_defect(c(1.0), c(0.0), c(0.0)), 2.0, 1e-15);
  EXPECT_LT(reference_input(1e-3, 6).symmetry_defect(), 1e-13);
  EXPECT_LT(constant_input(0.1, 0.3, 0.2, 0.1).symmetry_defect(), 1e-13);
}

TEST(Regularize, TrivialPotential) {
  SchrodingerInput in = constant_input(1e-3, 0.0, 0.0, 0.0);
  RegularizedForm rf = regularize(in, {.J = 12, .pad = 4});
  EXPECT_NEAR(rf.lambdas[0], 1.0, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(rf.lambdas[i], 0.0, 1e-15);
  EXPECT_LT(rf.remainder().empty() ? 0.0 : rf.remainder().max_abs(), 1e-15);
}

TEST(Regularize, ConstantCoefficientsAreAlreadyNormal) {
  // i(1 + eps c2) d^2 - eps c1 d + i eps c0
  const double eps = 0.01;
  SchrodingerInput in = constant_input(eps, 0.3, 0.2, 0.1);
  RegularizedForm rf = regularize(in, {.J = 12, .pad = 4});
  EXPECT_NEAR(rf.lambdas[0], 1.0 + eps * 0.3, 1e-13);
  EXPECT_NEAR(rf.lambdas[1], -eps * 0.2, 1e-13);
  EXPECT_NEAR(rf.lambdas[2], eps * 0.1, 1e-13);
  EXPECT_EQ(rf.lambdas[3], 0.0);
  EXPECT_LT(rf.remainder().empty() ? 0.0 : rf.remainder().max_abs(), 1e-14);
}

TEST(Step1, M2MatchesQuadrature) {
  const double eps = 0.01;
  SchrodingerInput in = reference_input(eps, 6.0, 1.0, {1.2360679774997896});
  Step1Result s1 = step1_space_diffeo(in, 24);
  Random rng(3);
  for (int t = 0; t < 5; ++t) {
    std::vector<double> phi = rng.angles(1);
    EXPECT_NEAR(s1.m2.evaluate(0.0, phi).real(), m2_quadrature(in.V2, eps, phi), 1e-12);
  }
  // lambda2 is the phi-average of m2
  Step2Result s2 = step2_time_reparam(s1, in);
  double acc = 0.0;
  const int n = 128;
  for (int i = 0; i < n; ++i) acc += m2_quadrature(in.V2, eps, {2 * kPi * i / n});
  EXPECT_NEAR(s2.lambda2, acc / n, 1e-12);
  EXPECT_LT(s1.report.residual, 1e-11);
  EXPECT_LT(s2.report.residual, 1e-11);
}

// lambda2 does not see omega at all; lambda1 only through O(eps^2) corrections
TEST(Steps, LeadingCoefficientsAndOmega) {
  auto leading = [&](double eps, std::vector<double> om) {
    SchrodingerInput in = reference_input(eps, 6.0, 1.0, om);
    Step1Result s1 = step1_space_diffeo(in, 24);
    Step2Result s2 = step2_time_reparam(s1, in);
    Step4Result s4 = step4_translation(step3_first_order(s2, in), in);
    return std::make_pair(s2.lambda2, s4.lambda1);
  };
  const std::vector<double> om1{1.2360679774997896, 1.4142135623730951}, om2{1.1, 1.7320508075688772};
  auto a = leading(1e-3, om1), b = leading(1e-3, om2);
  auto ah = leading(5e-4, om1), bh = leading(5e-4, om2);
  EXPECT_NEAR(a.first, b.first, 1e-14);
  EXPECT_NEAR(ah.first, bh.first, 1e-14);
  const double r = (a.second - b.second) / (ah.second - bh.second);
  EXPECT_GT(r, 3.5);
  EXPECT_LT(r, 4.5);
}

TEST(Regularize, ReferenceStepsAndFirstOrderLambdas) {
  for (double eps : {1e-3, 5e-4}) {
    SchrodingerInput in = reference_input(eps, 6.0);
    RegularizedForm rf = regularize(in, {.J = 16, .pad = 6});
    for (const auto& r : rf.reports()) {
      EXPECT_LT(r.residual, 1e-11) << "step " << r.step << " eps " << eps;
      EXPECT_LT(r.skew_defect, 1e-11) << "step " << r.step << " eps " << eps;
      EXPECT_NEAR(r.sigma, schedule_width(1.0, r.step), 1e-15);
    }
    // first order: lambda2 - 1 ~ eps <V2>, lambda1 ~ -eps <w1>, lambda0 ~ eps <w0>
    EXPECT_NEAR(rf.lambdas[0] - 1.0, eps * 0.15, 50 * eps * eps);
    EXPECT_NEAR(rf.lambdas[1], -eps * 0.2, 50 * eps * eps);
    EXPECT_NEAR(rf.lambdas[2], eps * 0.25, 50 * eps * eps);
    EXPECT_EQ(rf.lambdas[3], 0.0);
    EXPECT_LT(rf.remainder().skew_defect(), 1e-11);
  }
}

TEST(Regularize, RemainderScalesLinearly) {
  RegularizedForm a = regularize(reference_input(1e-3, 6.0), {.J = 16, .pad = 6});
  RegularizedForm b = regularize(reference_input(5e-4, 6.0), {.J = 16, .pad = 6});
  const double r = b.remainder_ratio() / a.remainder_ratio();
  EXPECT_GT(r, 0.8);
  EXPECT_LT(r, 1.2);
}

TEST(Regularize, RejectsNegativeEpsilon) {
  SchrodingerInput in = constant_input(1e-3, 0.0, 0.0, 0.0);
  in.epsilon = -1.0;
  EXPECT_THROW(regularize(in), ContractViolation);
}
