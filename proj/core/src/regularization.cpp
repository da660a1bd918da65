#include "qpkam/regularization.hpp"

#include <algorithm>
#include <cmath>

namespace qpkam {

namespace {

const Complex I(0.0, 1.0);

AnalyticField cst(const Envelope& env, double s, Complex c, int K = 0) { return AnalyticField::constant(env, s, c, K); }

// u minus its x-average
AnalyticField x_dependent(const AnalyticField& u) { return u - x_average(u); }

// u minus its (x, phi)-average
AnalyticField drop_mean(AnalyticField u) {
  if (u.row(MultiIndex{})) u.row_mut(MultiIndex{})[static_cast<std::size_t>(u.kcut())] = 0.0;
  return u;
}

double max_abs_of(std::initializer_list<double> xs) {
  double m = 0.0;
  for (double x : xs) m = std::max(m, x);
  return m;
}

double norm_or_zero(const AnalyticField& u) { return u.empty() ? 0.0 : u.norm(); }

}  // namespace

double skew_symbol_defect(const AnalyticField& a2, const AnalyticField& a1, const AnalyticField& a0) {
  AnalyticField c2 = a2.conj(), c1 = a1.conj(), c0 = a0.conj();
  AnalyticField e2 = c2 + a2;
  AnalyticField e1 = spatial_derivative(c2, 1) * Complex(2.0) - c1 + a1;
  AnalyticField e0 = spatial_derivative(c2, 2) - spatial_derivative(c1, 1) + c0 + a0;
  return max_abs_of({e2.max_abs(), e1.max_abs(), e0.max_abs()});
}

double SchrodingerInput::symmetry_defect() const {
  // L_0 is skew exactly when i(1 + eps V2), i eps V1, i eps V0 satisfy the skew symbol identities
  AnalyticField a2 = (cst(env, sigma_bar, 1.0) + V2 * Complex(epsilon)) * I;
  return skew_symbol_defect(a2, V1 * (I * epsilon), V0 * (I * epsilon)) / std::max(epsilon, 1e-300);
}

SchrodingerInput SchrodingerInput::complete(const Envelope& env, const Frequency& omega, double epsilon,
                                            double sigma_bar, const AnalyticField& V2, const AnalyticField& w1,
                                            const AnalyticField& w0) {
  auto realify = [](const AnalyticField& u) { return (u + u.conj()) * Complex(0.5); };
  SchrodingerInput in;
  in.env = env;
  in.omega = omega;
  in.epsilon = epsilon;
  in.sigma_bar = sigma_bar;
  in.V2 = realify(V2).with_sigma(sigma_bar);
  AnalyticField rw1 = realify(w1).with_sigma(sigma_bar);
  AnalyticField rw0 = realify(w0).with_sigma(sigma_bar);
  in.V1 = spatial_derivative(in.V2, 1) + rw1 * I;
  in.V0 = rw0 + spatial_derivative(rw1, 1) * (0.5 * I);
  return in;
}

double normal_form_mu(const std::array<double, 4>& lam, int k) {
  double kk = k;
  double mu = -lam[0] * kk * kk + lam[1] * kk + lam[2];
  if (k != 0) mu -= lam[3] / kk;
  return mu;
}

std::vector<Complex> normal_form_symbol(const std::array<double, 4>& lam, int J) {
  std::vector<Complex> d(static_cast<std::size_t>(2 * J + 1));
  for (int k = -J; k <= J; ++k) d[static_cast<std::size_t>(k + J)] = I * normal_form_mu(lam, k);
  return d;
}

// ----- step 1: x -> x + beta(x, phi) flattens the second-order coefficient -----

Step1Result step1_space_diffeo(const SchrodingerInput& in, int K) {
  const Envelope& env = in.env;
  const double s0 = in.sigma_bar, s1 = schedule_width(in.sigma_bar, 1);
  const double eps = in.epsilon;
  Step1Result r;
  r.sigma = s1;

  AnalyticField V2 = in.V2.with_kcut(K).with_sigma(s0);
  AnalyticField V1 = in.V1.with_kcut(K).with_sigma(s0);
  AnalyticField V0 = in.V0.with_kcut(K).with_sigma(s0);
  AnalyticField one = cst(env, s0, 1.0, K);

  AnalyticField w = compose_analytic(PowerSeries::binomial(-0.5), V2 * Complex(eps));  // (1 + eps V2)^{-1/2}
  AnalyticField wa = x_average(w);
  AnalyticField sqrt_m2 = compose_analytic(PowerSeries::binomial(-1.0), wa - cst(env, s0, 1.0));
  r.m2 = sqrt_m2 * sqrt_m2;
  AnalyticField bx = sqrt_m2 * w - one;  // 1 + beta_x = sqrt(m2) w has unit x-average
  bx = x_dependent(bx);
  r.beta = spatial_derivative(bx, -1);
  AnalyticField bxx = spatial_derivative(bx, 1);

  AnalyticField A = (one + V2 * Complex(eps)) * I;
  AnalyticField B = V1 * (I * eps);
  AnalyticField C = V0 * (I * eps);
  AnalyticField opb = one + bx;
  AnalyticField s = compose_analytic(PowerSeries::binomial(0.5), bx);
  AnalyticField s_inv = compose_analytic(PowerSeries::binomial(-0.5), bx);
  AnalyticField opb_inv = compose_analytic(PowerSeries::binomial(-1.0), bx);
  AnalyticField wdb = omega_derivative(r.beta, in.omega);

  AnalyticField a2 = A * opb * opb;
  AnalyticField a1 = A * bxx * Complex(2.0) + B * opb - wdb;
  AnalyticField a0 = A * spatial_derivative(s, 2) * s_inv + B * bxx * opb_inv * Complex(0.5) + C -
                     omega_derivative(bx, in.omega) * opb_inv * Complex(0.5);

  const double rho = s0 - s1;
  TorusDiffeo diffeo = TorusDiffeo::spatial(r.beta, rho);
  TorusDiffeo inv = invert_diffeo(diffeo);
  r.beta_inv = inv.shift;
  r.a2 = compose_x_shift(a2, r.beta_inv).with_sigma(s1);
  r.a1 = compose_x_shift(a1, r.beta_inv).with_sigma(s1);
  r.a0 = compose_x_shift(a0, r.beta_inv).with_sigma(s1);
  r.beta = r.beta.with_sigma(s0);
  r.m2 = r.m2.with_sigma(s1);

  auto& rep = r.report;
  rep.step = 1;
  rep.name = "space_diffeo";
  rep.sigma = s1;
  rep.residual = std::max(x_dependent(r.a2).max_abs(), (r.a2 - r.m2 * I).max_abs());
  rep.skew_defect = skew_symbol_defect(r.a2, r.a1, r.a0);
  rep.quantities = {{"beta_norm", r.beta.norm()},
                    {"contraction", diffeo.contraction},
                    {"m2_mean", r.m2.coeff(MultiIndex{}).real()}};
  return r;
}

// ----- step 2: time reparametrization makes the leading coefficient constant -----

Step2Result step2_time_reparam(const Step1Result& s1, const SchrodingerInput& in) {
  const Envelope& env = in.env;
  const double sig = schedule_width(in.sigma_bar, 2);
  const double rho = s1.sigma - sig;
  Step2Result r;
  r.sigma = sig;
  r.lambda2 = s1.m2.coeff(MultiIndex{}).real();
  AnalyticField h = drop_mean(s1.m2 * Complex(1.0 / r.lambda2) - cst(env, s1.sigma, 1.0));
  r.alpha = solve_homological_scalar(h, in.omega);
  AnalyticField inv_rho = compose_analytic(PowerSeries::binomial(-1.0), omega_derivative(r.alpha, in.omega));
  TorusDiffeo d = TorusDiffeo::scalar_angle(r.alpha, in.omega, rho);
  TorusDiffeo inv = invert_diffeo(d);
  r.alpha_inv = inv.shift;
  TorusDiffeo shift = TorusDiffeo::scalar_angle(r.alpha_inv, in.omega, 0.0);
  AnalyticField b2 = compose_angle_shift(s1.a2 * inv_rho, shift).with_sigma(sig);
  r.b1 = compose_angle_shift(s1.a1 * inv_rho, shift).with_sigma(sig);
  r.b0 = compose_angle_shift(s1.a0 * inv_rho, shift).with_sigma(sig);

  auto& rep = r.report;
  rep.step = 2;
  rep.name = "time_reparam";
  rep.sigma = sig;
  rep.residual = (b2 - cst(env, sig, I * r.lambda2)).max_abs();
  rep.skew_defect = skew_symbol_defect(cst(env, sig, I * r.lambda2), r.b1, r.b0);
  rep.quantities = {{"lambda2", r.lambda2}, {"alpha_norm", norm_or_zero(r.alpha)}, {"contraction", d.contraction}};
  return r;
}

// ----- step 3: multiplication by e^{ip} removes the x-dependence at order one -----

Step3Result step3_first_order(const Step2Result& s2, const SchrodingerInput& in) {
  const Envelope& env = in.env;
  const double sig = schedule_width(in.sigma_bar, 3);
  const double l2 = s2.lambda2;
  Step3Result r;
  r.sigma = sig;
  r.lambda2 = l2;
  r.m1 = x_average(s2.b1).with_sigma(sig);
  r.p = (spatial_derivative(s2.b1 - r.m1, -1) * Complex(1.0 / (2.0 * l2))).with_sigma(s2.sigma);
  AnalyticField px = spatial_derivative(r.p, 1);
  AnalyticField pxx = spatial_derivative(r.p, 2);
  AnalyticField c1 = s2.b1 - px * Complex(2.0 * l2);
  r.c0 = (pxx * Complex(-l2) - px * px * (I * l2) + s2.b1 * px * I + s2.b0 - omega_derivative(r.p, in.omega) * I)
             .with_sigma(sig);
  r.exp_ip = compose_analytic(PowerSeries::exp(), r.p * I);

  auto& rep = r.report;
  rep.step = 3;
  rep.name = "first_order";
  rep.sigma = sig;
  rep.residual = std::max((c1 - r.m1).max_abs(), r.m1.reality_defect());
  rep.skew_defect = skew_symbol_defect(cst(env, sig, I * l2), r.m1, r.c0);
  rep.quantities = {{"p_norm", norm_or_zero(r.p)}, {"m1_mean", r.m1.coeff(MultiIndex{}).real()}};
  return r;
}

// ----- step 4: phi-dependent translation makes the first-order coefficient constant -----

Step4Result step4_translation(const Step3Result& s3, const SchrodingerInput& in) {
  const Envelope& env = in.env;
  const double sig = schedule_width(in.sigma_bar, 4);
  Step4Result r;
  r.sigma = sig;
  r.lambda1 = s3.m1.coeff(MultiIndex{}).real();
  AnalyticField h = drop_mean(s3.m1 - cst(env, s3.sigma, r.lambda1));
  r.q = solve_homological_scalar(h, in.omega);
  r.d0 = compose_x_shift(s3.c0, -r.q).with_sigma(sig);
  AnalyticField first = s3.m1 - omega_derivative(r.q, in.omega);

  auto& rep = r.report;
  rep.step = 4;
  rep.name = "translation";
  rep.sigma = sig;
  rep.residual = (first - cst(env, sig, r.lambda1)).max_abs();
  rep.skew_defect = skew_symbol_defect(cst(env, sig, I * s3.lambda2), cst(env, sig, r.lambda1),
                                       r.d0);
  rep.quantities = {{"lambda1", r.lambda1}, {"q_norm", norm_or_zero(r.q)}};
  return r;
}

// ----- step 5: order-zero x-dependence via exp(V), V = (v d^{-1} + d^{-1} v) / 2 -----

Step5Result step5_order_zero(const Step4Result& s4, double lambda2, const SchrodingerInput& in, int Jw,
                             double delta) {
  const Envelope& env = in.env;
  const double sig = schedule_width(in.sigma_bar, 5);
  const double rho_exp = 0.5 * s4.sigma;
  Step5Result r;
  r.sigma = sig;
  r.d0_avg = x_average(s4.d0);
  r.v = spatial_derivative(r.d0_avg - s4.d0, -1) * Complex(1.0 / (2.0 * lambda2) * (1.0 / I));
  AnalyticField vx = spatial_derivative(r.v, 1);
  r.e_m1 = vx * Complex(s4.lambda1) - omega_derivative(r.v, in.omega);

  QPOperator Dm1 = QPOperator::derivative(env, s4.sigma, Jw, -1);
  QPOperator Mv = multiplication_operator(r.v, Jw);
  r.V = (op_compose(Mv, Dm1) + op_compose(Dm1, Mv)) * Complex(0.5);
  r.V.set_sigma(s4.sigma);
  r.V.set_order(-1.0);
  auto ev = op_exponential(r.V, rho_exp, delta);
  r.expV = ev.phi;
  r.expV_inv = op_exponential(r.V * Complex(-1.0), rho_exp, delta).phi;

  std::vector<Complex> diag = normal_form_symbol({lambda2, s4.lambda1, 0.0, 0.0}, Jw);
  QPOperator Md0 = multiplication_operator(s4.d0, Jw);
  QPOperator inc = lie_increment(diag, Md0, r.V, in.omega);
  r.R5 = Md0 + inc;
  r.R5 -= multiplication_operator(r.d0_avg.with_kcut(s4.d0.kcut()), Jw);
  r.R5 -= op_compose(multiplication_operator(r.e_m1, Jw), Dm1);
  r.R5.set_sigma(sig);
  r.R5.set_order(-2.0);
  r.R5.prune(operator_tolerances().prune);

  auto& rep = r.report;
  rep.step = 5;
  rep.name = "order_zero";
  rep.sigma = sig;
  rep.residual = x_dependent(s4.d0 + vx * (2.0 * I * lambda2)).max_abs();
  rep.skew_defect = (r.R5 + multiplication_operator(r.d0_avg, Jw) +
                     op_compose(multiplication_operator(r.e_m1, Jw), Dm1)).skew_defect();
  rep.quantities = {{"v_norm", norm_or_zero(r.v)},
                    {"exp_smallness", ev.smallness},
                    {"exp_terms", ev.terms},
                    {"R5_norm_m2", r.R5.decay_norm(sig, -2.0)}};
  return r;
}

// ----- step 6: order minus one via exp(G), G = (i/2)(g d^{-2} + d^{-2} g) -----

Step6Result step6_order_minus_one(const Step5Result& s5, const std::array<double, 2>& lambda21,
                                  const SchrodingerInput& in, int Jw, double delta) {
  const Envelope& env = in.env;
  const double sig = schedule_width(in.sigma_bar, 6);
  const double rho_exp = 0.5 * s5.sigma;
  const double l2 = lambda21[0];
  Step6Result r;
  r.sigma = sig;
  r.e_avg = x_average(s5.e_m1);
  r.g = spatial_derivative(s5.e_m1 - r.e_avg, -1) * Complex(1.0 / (2.0 * l2));

  QPOperator Dm1 = QPOperator::derivative(env, s5.sigma, Jw, -1);
  QPOperator Dm2 = QPOperator::derivative(env, s5.sigma, Jw, -2);
  QPOperator Mg = multiplication_operator(r.g, Jw);
  r.G = (op_compose(Mg, Dm2) + op_compose(Dm2, Mg)) * (0.5 * I);
  r.G.set_sigma(s5.sigma);
  r.G.set_order(-2.0);
  auto eg = op_exponential(r.G, rho_exp, delta);
  r.expG = eg.phi;
  r.expG_inv = op_exponential(r.G * Complex(-1.0), rho_exp, delta).phi;

  QPOperator Me = op_compose(multiplication_operator(s5.e_m1, Jw), Dm1);
  QPOperator rest = multiplication_operator(s5.d0_avg, Jw) + Me + s5.R5;
  rest.set_sigma(s5.sigma);
  std::vector<Complex> diag = normal_form_symbol({l2, lambda21[1], 0.0, 0.0}, Jw);
  QPOperator inc = lie_increment(diag, rest, r.G, in.omega);
  r.R6 = s5.R5 + Me + inc;
  r.R6 -= op_compose(multiplication_operator(r.e_avg, Jw), Dm1);
  r.R6.set_sigma(sig);
  r.R6.set_order(-2.0);
  r.R6.prune(operator_tolerances().prune);

  AnalyticField gx = spatial_derivative(r.g, 1);
  auto& rep = r.report;
  rep.step = 6;
  rep.name = "order_minus_one";
  rep.sigma = sig;
  rep.residual = x_dependent(s5.e_m1 - gx * Complex(2.0 * l2)).max_abs();
  rep.skew_defect = (r.R6 + multiplication_operator(s5.d0_avg, Jw) +
                     op_compose(multiplication_operator(r.e_avg, Jw), Dm1)).skew_defect();
  rep.quantities = {{"g_norm", norm_or_zero(r.g)},
                    {"exp_smallness", eg.smallness},
                    {"exp_terms", eg.terms},
                    {"R6_norm_m2", r.R6.decay_norm(sig, -2.0)}};
  return r;
}

// ----- step 7: remove the phi-dependence of the averaged symbols -----

Step7Result step7_averages(const Step6Result& s6, const Step5Result& s5, const SchrodingerInput& in, int J) {
  const Envelope& env = in.env;
  const double sig = schedule_width(in.sigma_bar, 7);
  const int Jw = s6.R6.J();
  Step7Result r;
  r.sigma = sig;
  const Complex m0 = full_average(s5.d0_avg);
  const Complex mm1 = full_average(s6.e_avg);
  r.lambda0 = (m0 / I).real();
  r.lambda_m1 = mm1.real();
  r.f0 = solve_homological_scalar(drop_mean(s5.d0_avg), in.omega);
  r.f_m1 = solve_homological_scalar(drop_mean(s6.e_avg), in.omega);

  // exp(+-F) is diagonal in k with entries exp(+-(f0 + f_{-1}/(ik)))
  r.expF = QPOperator(env, s6.sigma, Jw, 0.0);
  r.expF_inv = QPOperator(env, s6.sigma, Jw, 0.0);
  for (int k = -Jw; k <= Jw; ++k) {
    AnalyticField h = r.f0;
    if (k != 0) h += r.f_m1 * (1.0 / (I * static_cast<double>(k)));
    for (int sgn : {1, -1}) {
      AnalyticField e = compose_analytic(PowerSeries::exp(), h * Complex(sgn));
      QPOperator& dst = sgn > 0 ? r.expF : r.expF_inv;
      for (const auto& [l, row] : e.table()) {
        MatrixOperator* M = nullptr;
        if (auto* found = dst.find(l)) M = const_cast<MatrixOperator*>(found);
        if (!M) {
          dst.at(l) = MatrixOperator(Jw);
          M = &dst.at(l);
        }
        (*M)(k, k) = row[static_cast<std::size_t>(e.kcut())];
      }
    }
  }
  QPOperator R7w = op_compose(r.expF_inv, op_compose(s6.R6, r.expF));
  R7w.prune(operator_tolerances().prune);
  r.R7 = restrict_to(R7w, J);
  r.R7.set_sigma(sig);
  r.R7.set_order(-2.0);

  AnalyticField res0 = s5.d0_avg - omega_derivative(r.f0, in.omega) - cst(env, s5.d0_avg.sigma(), I * r.lambda0);
  AnalyticField res1 = s6.e_avg - omega_derivative(r.f_m1, in.omega) - cst(env, s6.e_avg.sigma(), r.lambda_m1);
  auto& rep = r.report;
  rep.step = 7;
  rep.name = "averages";
  rep.sigma = sig;
  rep.residual = std::max({res0.max_abs(), res1.max_abs(), std::abs(m0.real()), std::abs(mm1.imag())});
  rep.skew_defect = r.R7.skew_defect();
  rep.quantities = {{"lambda0", r.lambda0},
                    {"lambda_m1", r.lambda_m1},
                    {"f0_norm", norm_or_zero(r.f0)},
                    {"f_m1_norm", norm_or_zero(r.f_m1)},
                    {"R7_norm_m2", r.R7.decay_norm(sig, -2.0)}};
  return r;
}

double RegularizedForm::remainder_ratio() const {
  return s7.R7.decay_norm(s7.sigma, -2.0) / input.epsilon;
}

RegularizedForm regularize(const SchrodingerInput& in, const RegularizationOptions& opt) {
  if (in.epsilon < 0.0) throw ContractViolation("negative epsilon");
  RegularizedForm out;
  out.input = in;
  out.J = opt.J;
  out.Jwork = opt.J + opt.pad;
  const int Kf = 2 * out.Jwork;
  out.s1 = step1_space_diffeo(in, Kf);
  out.s2 = step2_time_reparam(out.s1, in);
  out.s3 = step3_first_order(out.s2, in);
  out.s4 = step4_translation(out.s3, in);
  out.s5 = step5_order_zero(out.s4, out.s2.lambda2, in, out.Jwork, opt.exp_delta);
  out.s6 = step6_order_minus_one(out.s5, {out.s2.lambda2, out.s4.lambda1}, in, out.Jwork, opt.exp_delta);
  out.s7 = step7_averages(out.s6, out.s5, in, out.J);
  out.lambdas = {out.s2.lambda2, out.s4.lambda1, out.s7.lambda0, out.s7.lambda_m1};
  return out;
}

}  // namespace qpkam
