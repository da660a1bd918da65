#pragma once

#include <array>
#include <string>
#include <vector>

#include "qpkam/fourier.hpp"
#include "qpkam/operator.hpp"

namespace qpkam {

// L_0 = i d_x^2 + i eps (V2 d_x^2 + V1 d_x + V0), V_i = V_i(x, phi)
struct SchrodingerInput {
  Envelope env;
  Frequency omega;
  double epsilon = 1e-3;
  double sigma_bar = 1.0;
  AnalyticField V2, V1, V0;

  // max coefficient defect of V2 real, V1 = 2 conj(dV2) - conj(V1), V0 = conj(V0) - conj(dV1) + conj(d^2 V2)
  double symmetry_defect() const;

  // Builds V1 = dV2 + i w1, V0 = w0 + (i/2) dw1 from real-valued V2, w1, w0 (each is symmetrized first).
  static SchrodingerInput complete(const Envelope& env, const Frequency& omega, double epsilon, double sigma_bar,
                                   const AnalyticField& V2, const AnalyticField& w1, const AnalyticField& w0);
};

// Defect of skew-adjointness of a2 d^2 + a1 d + a0 (max coefficient of the three symbol identities).
double skew_symbol_defect(const AnalyticField& a2, const AnalyticField& a1, const AnalyticField& a0);

inline double schedule_width(double sigma_bar, int k) { return sigma_bar * (1.0 - k / 16.0); }

struct RegularizationOptions {
  int J = 32;           // spatial cut of the output remainder
  int pad = 8;          // extra modes carried through steps 5-7
  double exp_delta = 0.1;
};

struct StepReport {
  int step = 0;
  std::string name;
  double sigma = 0.0;
  double residual = 0.0;          // structural identity of the step
  double skew_defect = 0.0;       // of the transformed operator
  std::vector<std::pair<std::string, double>> quantities;
};

struct Step1Result {
  AnalyticField m2;                // scalar
  AnalyticField beta, beta_inv;    // x -> x + beta and its inverse
  AnalyticField a2, a1, a0;
  double sigma = 0.0;
  StepReport report;
};
struct Step2Result {
  double lambda2 = 0.0;
  AnalyticField alpha, alpha_inv;  // scalars; phi -> phi + omega alpha
  AnalyticField b1, b0;
  double sigma = 0.0;
  StepReport report;
};
struct Step3Result {
  double lambda2 = 0.0;
  AnalyticField m1;                // scalar, real
  AnalyticField p, exp_ip;
  AnalyticField c0;
  double sigma = 0.0;
  StepReport report;
};
struct Step4Result {
  double lambda1 = 0.0;
  AnalyticField q;                 // scalar; x -> x + q(phi)
  AnalyticField d0;
  double sigma = 0.0;
  StepReport report;
};
struct Step5Result {
  AnalyticField v, e_m1, d0_avg;
  QPOperator V, expV, expV_inv;    // on the padded cut
  QPOperator R5;
  double sigma = 0.0;
  StepReport report;
};
struct Step6Result {
  AnalyticField g, e_avg;
  QPOperator G, expG, expG_inv;
  QPOperator R6;
  double sigma = 0.0;
  StepReport report;
};
struct Step7Result {
  double lambda0 = 0.0, lambda_m1 = 0.0;
  AnalyticField f0, f_m1;
  QPOperator expF, expF_inv;
  QPOperator R7;                   // restricted to the output cut
  double sigma = 0.0;
  StepReport report;
};

// Normal form i lambda2 d^2 + lambda1 d + i lambda0 + lambda_{-1} d^{-1} acts on e^{ikx} as i mu_k with
// mu_k = -lambda2 k^2 + lambda1 k + lambda0 - lambda_{-1}/k (the last term absent at k = 0).
double normal_form_mu(const std::array<double, 4>& lambdas, int k);
// i mu_k for |k| <= J
std::vector<Complex> normal_form_symbol(const std::array<double, 4>& lambdas, int J);

struct RegularizedForm {
  SchrodingerInput input;
  int J = 0, Jwork = 0;
  std::array<double, 4> lambdas{};  // lambda2, lambda1, lambda0, lambda_{-1}
  Step1Result s1;
  Step2Result s2;
  Step3Result s3;
  Step4Result s4;
  Step5Result s5;
  Step6Result s6;
  Step7Result s7;

  const QPOperator& remainder() const { return s7.R7; }
  std::vector<StepReport> reports() const { return {s1.report, s2.report, s3.report, s4.report, s5.report, s6.report, s7.report}; }
  // |R7|_{sigma_7, -2} / eps
  double remainder_ratio() const;
};

Step1Result step1_space_diffeo(const SchrodingerInput& in, int kcut);
Step2Result step2_time_reparam(const Step1Result& s1, const SchrodingerInput& in);
Step3Result step3_first_order(const Step2Result& s2, const SchrodingerInput& in);
Step4Result step4_translation(const Step3Result& s3, const SchrodingerInput& in);
Step5Result step5_order_zero(const Step4Result& s4, double lambda2, const SchrodingerInput& in, int Jwork,
                             double delta);
Step6Result step6_order_minus_one(const Step5Result& s5, const std::array<double, 2>& lambda21,
                                  const SchrodingerInput& in, int Jwork, double delta);
Step7Result step7_averages(const Step6Result& s6, const Step5Result& s5, const SchrodingerInput& in, int J);

RegularizedForm regularize(const SchrodingerInput& in, const RegularizationOptions& opt = {});

}  // namespace qpkam
