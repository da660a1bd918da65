// Acceptance gate: one PASS/FAIL line per criterion. Tolerances and runtime limits are pinned below.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "qpkam/config.hpp"
#include "qpkam/diophantine.hpp"
#include "qpkam/evolution.hpp"
#include "qpkam/kam.hpp"
#include "qpkam/pipeline.hpp"

using namespace qpkam;
using namespace qpkam::testing;

namespace {

// ----- pinned tolerances -----
constexpr double kHomologicalRel = 1e-11;
constexpr double kHomologicalSeconds = 10;
constexpr int kNormInstances = 500;
constexpr double kNormSeconds = 30;
constexpr double kRoundTripSup = 1e-10;
constexpr double kGridOracle = 1e-8;
constexpr double kStepResidual = 1e-11;
constexpr double kRatioStability = 0.25;
constexpr double kExponentLo = 1.2, kExponentHi = 2.0;
constexpr double kKamResidualRel = 1e-9;
constexpr double kUnitarity = 1e-9;
constexpr double kKamSeconds = 300;
constexpr double kSlopeMax = -2.0 + 0.3;
constexpr double kLinearFitRel = 0.2;
constexpr double kExactSigmas = 3.0;
constexpr double kMeasureSeconds = 120;
constexpr double kSeriesFrom = 4.0;
constexpr double kWConstantMax = 2.0;
constexpr double kFreeDrift = 1e-10;

const Complex I(0.0, 1.0);
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::set<int> failed;

void report(int n, const char* name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  if (!o.pass) failed.insert(n);
  std::printf("criterion %2d %s  %s: %s (%.1f s)\n", n, o.pass ? "PASS" : "FAIL", name, o.detail.c_str(),
              seconds_since(t0));
  std::fflush(stdout);
}

Frequency random_frequency(Random& rng, int d) {
  std::vector<int> sites;
  std::vector<double> w;
  for (int s = 1; s <= d; ++s) {
    sites.push_back(s);
    w.push_back(rng.uniform(1.0, 2.0));
  }
  return Frequency(sites, w);
}

// ----- reference problem shared by criteria 4, 5, 6, 9 -----

struct Reference {
  RunConfig cfg;
  SchrodingerInput in;
  RegularizedForm rf;
  KamInput ki;
  KamResult kam;
  ConjugationCheck cc;
  double kam_seconds = 0.0;
};

Reference& reference() {
  static Reference ref;
  return ref;
}

std::vector<double> normal_form_spectrum(const std::array<double, 4>& lam, int J) {
  std::vector<double> mu;
  for (int k = -J; k <= J; ++k) mu.push_back(normal_form_mu(lam, k));
  return mu;
}

RegularizedForm regularize_config(const RunConfig& cfg, SchrodingerInput* in_out = nullptr) {
  BuiltInput b = build_input(cfg);
  if (in_out) *in_out = b.input;
  return regularize(b.input, {.J = cfg.jmax, .pad = cfg.pad});
}

KamOptions kam_options(const RunConfig& cfg) {
  KamOptions ko;
  ko.chi = cfg.chi;
  ko.N0 = cfg.N0;
  ko.stop = cfg.stop;
  ko.n_max = cfg.n_max;
  ko.gamma = cfg.gamma_value();
  return ko;
}

// ----- criteria -----

Outcome homological_round_trips() {
  const auto t0 = Clock::now();
  Random rng(101);
  double worst_scalar = 0.0, worst_block = 0.0;
  for (int t = 0; t < 100; ++t) {
    const int d = rng.integer(1, 4);
    const Envelope env{1.0, 6.0, 16};
    Frequency om = random_frequency(rng, d);
    AnalyticField f = rng.field(env, 0.5, rng.integer(0, 3), d, 8, 1.0, 2);
    if (f.row(MultiIndex{})) f.row_mut(MultiIndex{}).assign(f.row(MultiIndex{})->size(), Complex{});
    if (f.empty()) continue;
    AnalyticField back = omega_derivative(solve_homological_scalar(f, om), om);
    worst_scalar = std::max(worst_scalar, (back - f).max_abs() / f.max_abs());
  }
  for (int t = 0; t < 100; ++t) {
    const int d = rng.integer(1, 4), J = rng.integer(2, 16);
    const Envelope env{1.0, 6.0, 16};
    Frequency om = random_frequency(rng, d);
    BlockDiag D(J);
    D[0] = Block::diag(0, rng.uniform(-0.1, 0.1), 0.0);
    for (int j = 1; j <= J; ++j) {
      Block b(j, j);
      b(0, 0) = -j * j + rng.uniform(-0.1, 0.1);
      b(1, 1) = -j * j + rng.uniform(-0.1, 0.1);
      b(0, 1) = rng.complex(0.05);
      b(1, 0) = std::conj(b(0, 1));
      D[j] = b;
    }
    QPOperator R = rng.op(env, 0.5, J, d, 4, 1e-3);
    QPOperator P = R - R.adjoint();
    if (P.empty()) continue;
    const double N = rng.uniform(1.0, 6.0);
    QPOperator F = solve_homological_block(D, P, om, N);
    auto [low, high] = project_ultraviolet(P, N);
    QPOperator Z = diagonal_blocks_over_i(P).to_operator(env, 0.5) * I;
    QPOperator res = commutator(D.to_operator(env, 0.5) * I, F) - op_omega_derivative(F, om) + low - Z;
    worst_block = std::max(worst_block, res.empty() ? 0.0 : res.max_abs() / P.max_abs());
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(worst_scalar < kHomologicalRel, "scalar rel " + fmt(worst_scalar) + " < " + fmt(kHomologicalRel));
  o.require(worst_block < kHomologicalRel, "block rel " + fmt(worst_block) + " < " + fmt(kHomologicalRel));
  o.require(secs < kHomologicalSeconds, "runtime " + fmt(secs) + " s < " + fmt(kHomologicalSeconds) + " s");
  return o;
}

Outcome norm_inequalities() {
  const auto t0 = Clock::now();
  const Envelope env{1.0, 12.0, 32};
  Random rng(202);
  int sub = 0, tail = 0, cauchy = 0, comp = 0;
  for (int t = 0; t < kNormInstances; ++t) {
    AnalyticField u = rng.field(env, 0.8, 3, 3, 6, 1.0), v = rng.field(env, 0.8, 3, 3, 6, 1.0);
    const double s = rng.uniform(0.0, 0.8);
    sub += (u * v).norm(s) > u.norm(s) * v.norm(s) * (1 + 1e-13);
  }
  for (int t = 0; t < kNormInstances; ++t) {
    AnalyticField u = rng.field(env, 1.0, 0, 3, 10, 1.0, 3);
    const double N = rng.uniform(0.0, 6.0), rho = rng.uniform(0.05, 0.5), s = rng.uniform(0.0, 1.0 - rho);
    auto [lo, hi] = project_ultraviolet(u, N);
    tail += hi.norm(s) > std::exp(-rho * N) * u.norm(s + rho) * (1 + 1e-13);
  }
  for (int t = 0; t < kNormInstances; ++t) {
    Frequency om = random_frequency(rng, 3);
    AnalyticField u = rng.field(env, 1.0, 0, 3, 8, 1.0, 3);
    const double rho = rng.uniform(0.05, 0.5), s = rng.uniform(0.0, 1.0 - rho);
    const double C = om.sup_norm() / (std::numbers::e * rho);
    cauchy += omega_derivative(u, om).norm(s) > C * u.norm(s + rho) * (1 + 1e-13);
  }
  const Envelope openv{1.0, 6.0, 16};
  for (int t = 0; t < kNormInstances; ++t) {
    QPOperator R = rng.op(openv, 0.8, 6, 2, 2, 1.0), Q = rng.op(openv, 0.8, 6, 2, 2, 1.0);
    const double m = rng.integer(-2, 2), mp = rng.integer(-2, 2);
    const double rho = rng.uniform(0.1, 0.4), s = rng.uniform(0.0, 0.8 - rho);
    const double C = m == 0 ? 1.0 : std::pow(std::abs(m) / (std::numbers::e * rho), std::abs(m));
    comp += op_compose(R, Q).decay_norm(s, m + mp) > C * R.decay_norm(s, m) * Q.decay_norm(s + rho, mp) * (1 + 1e-12);
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(sub == 0, "submultiplicativity violations " + std::to_string(sub) + "/" + std::to_string(kNormInstances));
  o.require(tail == 0, "tail e^{-rho N} violations " + std::to_string(tail));
  o.require(cauchy == 0, "Cauchy violations " + std::to_string(cauchy));
  o.require(comp == 0, "composition violations " + std::to_string(comp));
  o.require(secs < kNormSeconds, "runtime " + fmt(secs) + " s < " + fmt(kNormSeconds) + " s");
  return o;
}

Outcome diffeo_inversion() {
  Random rng(303);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const Envelope env{1.0, 16.0, 8};
    AnalyticField u = rng.field(env, 0.9, t % 2 ? 2 : 0, 2, 4, 1.0, 1);
    AnalyticField back;
    if (t % 2 == 0) {
      AnalyticField a = rng.real_field(env, 0.6, 0, 2, 3, 0.005, 1);
      auto d = TorusDiffeo::vector_angle({{1, a}, {2, a * Complex(rng.uniform(-1, 1))}}, 0.3);
      back = compose_angle_shift(compose_angle_shift(u, d), invert_diffeo(d));
    } else {
      // x-shifts spread spatial modes, so the shift, its inverse and u live on a wider cut
      AnalyticField b = rng.real_field(env, 0.6, 2, 2, 3, 0.001, 1).with_kcut(16);
      auto d = TorusDiffeo::spatial(b, 0.3);
      AnalyticField wide = u.with_kcut(16);
      back = compose_x_shift(compose_x_shift(wide, b), invert_diffeo(d).shift);
      u = wide;
    }
    // sup over the real torus is bounded by the sigma = 0 norm
    worst = std::max(worst, (back - u).with_sigma(0.0).norm(0.0));
  }

  // 1-angle oracle: phi + 0.05 sin(phi) inverted by Newton on a grid, then a DFT
  const Envelope env{1.0, 24.0, 8};
  AnalyticField a(env, 0.5, 0);
  a.add(MultiIndex::unit(1), 0, -0.025 * I);
  a.add(MultiIndex::unit(1, -1), 0, 0.025 * I);
  TorusDiffeo inv = invert_diffeo(TorusDiffeo::vector_angle({{1, a}}, 0.3));
  const AnalyticField& at = inv.sites.at(1);
  const int N = 64;
  std::vector<Complex> coef(N);
  for (int m = 0; m < N; ++m) {
    const double th = 2.0 * std::numbers::pi * m / N;
    double phi = th;
    for (int it = 0; it < 50; ++it) phi -= (phi + 0.05 * std::sin(phi) - th) / (1.0 + 0.05 * std::cos(phi));
    for (int l = 0; l < N; ++l) coef[static_cast<std::size_t>(l)] += (phi - th) * std::polar(1.0, -l * th) / double(N);
  }
  double grid = 0.0;
  for (int l = -10; l <= 10; ++l) {
    const Complex got = l == 0 ? at.coeff(MultiIndex{}) : at.coeff(MultiIndex::unit(1, l));
    grid = std::max(grid, std::abs(got - coef[static_cast<std::size_t>((l + N) % N)]));
  }
  Outcome o;
  o.require(worst < kRoundTripSup, "round trip sup " + fmt(worst) + " < " + fmt(kRoundTripSup));
  o.require(grid < kGridOracle, "grid oracle " + fmt(grid) + " < " + fmt(kGridOracle));
  return o;
}

Outcome regularization_structure() {
  Reference& ref = reference();
  ref.cfg = load_config(std::string(QPKAM_SOURCE_DIR) + "/configs/reference.json");
  Outcome o;
  o.require(ref.cfg.d == 2 && ref.cfg.epsilon == 1e-3 && std::abs(ref.cfg.gamma_value() - std::sqrt(1e-3)) < 1e-15,
            "reference config d=2 eps=1e-3 gamma=eps^0.5");
  for (const auto* t : {&ref.cfg.potential.V2, &ref.cfg.potential.W1, &ref.cfg.potential.W0})
    o.require(t->size() <= 5, "table with " + std::to_string(t->size()) + " modes");
  ref.rf = regularize_config(ref.cfg, &ref.in);
  double worst = 0.0;
  for (const auto& s : ref.rf.reports()) worst = std::max(worst, s.residual);
  o.require(ref.rf.reports().size() == 7 && worst < kStepResidual,
            "7 step residuals max " + fmt(worst) + " < " + fmt(kStepResidual));

  const double base = ref.rf.remainder_ratio();
  RunConfig half = ref.cfg;
  half.epsilon /= 2;
  half.gamma = ref.cfg.gamma_value();
  const double r_half = regularize_config(half).remainder_ratio();
  RunConfig wide = ref.cfg;
  wide.jmax = 64;
  const double r_wide = regularize_config(wide).remainder_ratio();
  const double d_half = std::abs(r_half / base - 1), d_wide = std::abs(r_wide / base - 1);
  o.require(d_half <= kRatioStability, "|R7|/eps " + fmt(base) + " vs eps/2 " + fmt(r_half) + " (" + fmt(100 * d_half) + "%)");
  o.require(d_wide <= kRatioStability, "vs J=64 " + fmt(r_wide) + " (" + fmt(100 * d_wide) + "%)");
  return o;
}

Outcome kam_contraction() {
  Reference& ref = reference();
  const auto t0 = Clock::now();
  const int J = ref.cfg.jmax;
  ref.ki = KamInput{normal_form_blocks(normal_form_spectrum(ref.rf.lambdas, J), J), ref.rf.remainder(),
                    ref.in.omega, 0.5 * ref.cfg.sigma_bar};
  ref.kam = kam_iterate(ref.ki, kam_options(ref.cfg));
  ref.cc = check_conjugation(ref.ki, ref.kam);
  ref.kam_seconds = seconds_since(t0);

  // the rate fit needs iterates past the default stopping tolerance
  KamOptions fit_opt = kam_options(ref.cfg);
  fit_opt.stop = 0.0;
  fit_opt.n_max = 7;
  KamResult full = kam_iterate(ref.ki, fit_opt);
  const double kappa = convergence_exponent(full.log, 2, 6);
  std::string norms;
  for (const auto& it : full.log) norms += (norms.empty() ? "" : ",") + fmt(it.P_norm);

  const double secs = seconds_since(t0);
  Outcome o;
  o.require(kappa > kExponentLo && kappa < kExponentHi,
            "exponent " + fmt(kappa) + " in (" + fmt(kExponentLo) + ", " + fmt(kExponentHi) + ") |P_n|=" + norms);
  const double rel = ref.cc.residual_offdiag / ref.cc.initial_offdiag;
  o.require(rel < kKamResidualRel, "offdiag residual rel " + fmt(rel) + " < " + fmt(kKamResidualRel));
  o.require(ref.cc.unitarity < kUnitarity, "unitarity " + fmt(ref.cc.unitarity) + " < " + fmt(kUnitarity));
  o.require(secs < kKamSeconds, "runtime " + fmt(secs) + " s < " + fmt(kKamSeconds) + " s");
  return o;
}

Outcome eigenvalue_asymptotics() {
  const Reference& ref = reference();
  auto rows = block_spectrum(ref.kam.D_inf);
  // primary route: residual against the regularization's normal form
  std::vector<double> lj, lr;
  double scaled_lo = 0.0, scaled_hi = 0.0;
  for (const auto& r : rows) {
    if (r.j < 8 || r.j > 32) continue;
    const double res = std::max(std::abs(r.mu_plus - normal_form_mu(ref.rf.lambdas, r.j)),
                                std::abs(r.mu_minus - normal_form_mu(ref.rf.lambdas, -r.j)));
    const double scaled = double(r.j) * r.j * res;
    (r.j <= 20 ? scaled_lo : scaled_hi) = std::max(r.j <= 20 ? scaled_lo : scaled_hi, scaled);
    lj.push_back(std::log(double(r.j)));
    lr.push_back(std::log(std::max(res, 1e-300)));
  }
  const double n = double(lj.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lj.size(); ++i) {
    mx += lj[i] / n;
    my += lr[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < lj.size(); ++i) {
    sxy += (lj[i] - mx) * (lr[i] - my);
    sxx += (lj[i] - mx) * (lj[i] - mx);
  }
  const double slope = sxy / sxx;
  // second route: a least-squares fit of the spectrum must reproduce lambda2, lambda1
  SpectrumFit fit = fit_spectrum(rows, 16, 32);
  const double eps = ref.cfg.epsilon;
  const double d2 = std::abs(fit.lambdas[0] - ref.rf.lambdas[0]), d1 = std::abs(fit.lambdas[1] - ref.rf.lambdas[1]);

  Outcome o;
  o.require(lj.size() == 25, "j in [8, 32]");
  o.require(scaled_hi <= scaled_lo, "j^2 residual bounded: max over (20,32] " + fmt(scaled_hi) + " <= max over [8,20] " +
                                        fmt(scaled_lo));
  o.require(slope <= kSlopeMax, "log-log slope " + fmt(slope) + " <= " + fmt(kSlopeMax));
  o.require(d2 <= eps * eps && d1 <= eps * eps,
            "fit cross-check |dl2|=" + fmt(d2) + " |dl1|=" + fmt(d1) + " <= eps^2");
  return o;
}

Outcome measure_law() {
  const auto t0 = Clock::now();
  const std::vector<double> gammas{0.1, 0.05, 0.025};
  MeasureOptions opt;
  opt.d = 3;
  opt.L = 4.0;
  opt.samples = 10000;
  opt.seed = 20240611;
  auto rows = measure_monte_carlo(gammas, opt);
  double sfg = 0, sgg = 0;
  for (const auto& r : rows) {
    sfg += r.fraction * r.gamma;
    sgg += r.gamma * r.gamma;
  }
  const double C = sfg / sgg;
  double worst_fit = 0.0;
  std::string fr;
  for (const auto& r : rows) {
    worst_fit = std::max(worst_fit, std::abs(r.fraction - C * r.gamma) / (C * r.gamma));
    fr += (fr.empty() ? "" : ",") + fmt(r.fraction);
  }

  MeasureOptions one = opt;
  one.d = 1;
  auto rows1 = measure_monte_carlo(gammas, one);
  double worst_sigma = 0.0;
  for (const auto& r : rows1) {
    const double exact = measure_exact_1d(r.gamma, one.L, one.mu, true);
    worst_sigma = std::max(worst_sigma, std::abs(r.fraction - exact) / std::max(r.stderr_, 1.0 / one.samples));
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.require(worst_fit <= kLinearFitRel, "d=3 fractions " + fr + " fit C=" + fmt(C) + ", max rel dev " + fmt(worst_fit) +
                                            " <= " + fmt(kLinearFitRel));
  o.require(worst_sigma <= kExactSigmas, "d=1 vs exact " + fmt(worst_sigma) + " se <= " + fmt(kExactSigmas));
  o.require(secs < kMeasureSeconds, "runtime " + fmt(secs) + " s < " + fmt(kMeasureSeconds) + " s");
  return o;
}

Outcome small_divisor_bounds() {
  const std::vector<int> sites{1, 2, 3};
  const std::vector<double> rhos{0.05, 0.1, 0.2, 0.4};
  const double mu = 4.0, L = 8.0;
  const double tau = calibrate_tau(mu, mu, L, sites, 1.0, rhos);
  Outcome o;
  double worst = 0.0;
  for (double r : rhos) {
    auto s = small_divisor_sup(r, mu, mu, L, sites, tau);
    worst = std::max(worst, std::log(s.measured) / std::log(s.bound));
  }
  o.require(worst <= 1.0, "tau=" + fmt(tau) + ", max log(sup)/log(bound) " + fmt(worst) + " <= 1");
  // doubling shells: the first two grow combinatorially, so monotonicity is checked from L = kSeriesFrom on
  auto partial = series_convergence_check(mu, mu, {1, 2, 4, 8, 16, 32});
  bool cauchy = true;
  std::string inc;
  for (std::size_t i = 0; i < partial.size(); ++i) {
    inc += (inc.empty() ? "" : ",") + fmt(partial[i].increment);
    cauchy = cauchy && partial[i].increment >= 0.0;
    if (i > 0 && partial[i - 1].L >= kSeriesFrom) cauchy = cauchy && partial[i].increment < partial[i - 1].increment;
  }
  o.require(cauchy, "increments |S_2L - S_L| " + inc + " decreasing from L=" + fmt(kSeriesFrom));
  return o;
}

Outcome dynamics() {
  const Reference& ref = reference();
  EvolutionOptions eo;
  eo.T = 10.0;
  eo.dt = ref.cfg.dt;
  eo.sample_dt = ref.cfg.sample_dt;
  eo.analytic_sigma = ref.cfg.analytic_sigma;
  EvolutionReport er = evolve_compare(ref.in, ref.rf, ref.kam, default_initial_datum(ref.cfg.jmax), eo,
                                      ref.cc.residual_offdiag + ref.cc.residual_diag);
  const double drift = free_flow_drift(ref.cfg.jmax, 10.0, ref.cfg.dt);
  Outcome o;
  o.require(er.discrepancy_l2 <= er.budget, "L2 discrepancy " + fmt(er.discrepancy_l2) + " <= budget " + fmt(er.budget));
  o.require(er.max_h1_ratio <= er.C_W_h1, "H1 ratio " + fmt(er.max_h1_ratio) + " <= C_W " + fmt(er.C_W_h1));
  o.require(er.max_analytic_ratio <= er.C_W_analytic,
            "analytic ratio " + fmt(er.max_analytic_ratio) + " <= C " + fmt(er.C_W_analytic));
  o.require(er.C_W_h1 < kWConstantMax && er.C_W_l2 < kWConstantMax, "C_W < " + fmt(kWConstantMax));
  o.require(drift <= kFreeDrift, "free drift " + fmt(drift) + " <= " + fmt(kFreeDrift));
  return o;
}

std::map<std::string, std::string> read_dir(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::ifstream f(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Outcome determinism() {
  RunConfig cfg = load_config(std::string(QPKAM_SOURCE_DIR) + "/configs/reference.json");
  const auto base = std::filesystem::temp_directory_path() / "qpkam_acceptance";
  std::filesystem::remove_all(base);
  std::vector<std::map<std::string, std::string>> bundles;
  int code = 0;
  for (int run = 0; run < 2; ++run) {
    PipelineOptions opt;
    opt.stage = Stage::All;
    PipelineResult r = run_pipeline(cfg, opt);
    code = std::max(code, r.exit_code);
    const auto dir = base / ("run" + std::to_string(run));
    write_bundle(dir.string(), r);
    bundles.push_back(read_dir(dir));
  }
  std::filesystem::remove_all(base);
  Outcome o;
  o.require(code == kExitOk, "both runs exit 0");
  o.require(bundles[0].size() >= 5, std::to_string(bundles[0].size()) + " bundle files");
  o.require(bundles[0] == bundles[1], "bundles byte-identical");
  return o;
}

}  // namespace

// --expect-fail n[,m...] makes the exit status accept exactly these failures; the lines still print FAIL
int main(int argc, char** argv) {
  std::set<int> expected;
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--expect-fail") {
      std::stringstream ss(argv[i + 1]);
      for (std::string item; std::getline(ss, item, ',');) expected.insert(std::stoi(item));
    }
  report(1, "homological round trips", homological_round_trips);
  report(2, "norm inequalities", norm_inequalities);
  report(3, "diffeo inversion", diffeo_inversion);
  report(4, "regularization structure", regularization_structure);
  report(5, "KAM contraction", kam_contraction);
  report(6, "eigenvalue asymptotics", eigenvalue_asymptotics);
  report(7, "measure law", measure_law);
  report(8, "small-divisor bounds", small_divisor_bounds);
  report(9, "dynamics", dynamics);
  report(10, "determinism", determinism);
  std::printf("%zu of 10 criteria failed\n", failed.size());
  if (!expected.empty()) std::printf("expected failures: %zu\n", expected.size());
  return failed == expected ? 0 : 1;
}
