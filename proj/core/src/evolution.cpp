#include "qpkam/evolution.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace qpkam {

namespace {

const Complex I(0.0, 1.0);

std::size_t ix(int k, int J) { return static_cast<std::size_t>(k + J); }

// spatial coefficients of u(., phi), index k + kcut
std::vector<Complex> spatial_coeffs(const AnalyticField& u, const std::vector<double>& phi) {
  const int K = u.kcut();
  std::vector<Complex> c(static_cast<std::size_t>(2 * K + 1));
  for (const auto& [l, row] : u.table()) {
    double arg = 0.0;
    for (int i = 0; i < l.support_size(); ++i) {
      const int s = l.site_at(i);
      if (s - 1 < static_cast<int>(phi.size())) arg += l.value_at(i) * phi[static_cast<std::size_t>(s - 1)];
    }
    const Complex e = std::polar(1.0, arg);
    for (std::size_t k = 0; k < row.size(); ++k) c[k] += row[k] * e;
  }
  return c;
}

Complex coeff_at(const std::vector<Complex>& c, int k) {
  const int K = (static_cast<int>(c.size()) - 1) / 2;
  return std::abs(k) > K ? Complex{} : c[static_cast<std::size_t>(k + K)];
}

MatrixOperator restrict_matrix(const MatrixOperator& A, int J) {
  MatrixOperator out(J);
  for (int k = -J; k <= J; ++k)
    for (int kp = -J; kp <= J; ++kp) out(k, kp) = A(k, kp);
  return out;
}

MatrixOperator diag_matrix(const std::vector<Complex>& d) {
  const int J = (static_cast<int>(d.size()) - 1) / 2;
  MatrixOperator m(J);
  for (int k = -J; k <= J; ++k) m(k, k) = d[ix(k, J)];
  return m;
}

}  // namespace

double l2_norm(const ModeVector& u) {
  double s = 0.0;
  for (const auto& v : u) s += std::norm(v);
  return std::sqrt(s);
}

double sobolev_norm(const ModeVector& u, double s) {
  const int J = (static_cast<int>(u.size()) - 1) / 2;
  double acc = 0.0;
  for (int k = -J; k <= J; ++k) acc += std::pow(japanese(k), 2.0 * s) * std::norm(u[ix(k, J)]);
  return std::sqrt(acc);
}

double analytic_norm(const ModeVector& u, double sigma) {
  const int J = (static_cast<int>(u.size()) - 1) / 2;
  double acc = 0.0;
  for (int k = -J; k <= J; ++k) acc += std::exp(sigma * std::abs(k)) * std::abs(u[ix(k, J)]);
  return acc;
}

ModeVector apply_matrix(const MatrixOperator& A, const ModeVector& u) {
  const int n = A.dim();
  ModeVector out(static_cast<std::size_t>(n));
  const auto& a = A.data();
  for (int r = 0; r < n; ++r) {
    Complex s{};
    for (int c = 0; c < n; ++c) s += a[static_cast<std::size_t>(r * n + c)] * u[static_cast<std::size_t>(c)];
    out[static_cast<std::size_t>(r)] = s;
  }
  return out;
}

MatrixOperator matmul(const MatrixOperator& A, const MatrixOperator& B) {
  MatrixOperator C(A.J());
  MatrixOperator::multiply_add(A, A.dim(), B, B.dim(), C);
  return C;
}

double hs_weighted_bound(const MatrixOperator& A, double s) {
  const int J = A.J();
  std::vector<double> rows(static_cast<std::size_t>(A.dim())), cols(static_cast<std::size_t>(A.dim()));
  for (int k = -J; k <= J; ++k)
    for (int kp = -J; kp <= J; ++kp) {
      double w = std::abs(A(k, kp)) * std::pow(japanese(k) / japanese(kp), s);
      rows[ix(k, J)] += w;
      cols[ix(kp, J)] += w;
    }
  double r = 0.0, c = 0.0;
  for (double v : rows) r = std::max(r, v);
  for (double v : cols) c = std::max(c, v);
  return std::sqrt(r * c);
}

double analytic_operator_norm(const MatrixOperator& A, double sigma) {
  const int J = A.J();
  double best = 0.0;
  for (int kp = -J; kp <= J; ++kp) {
    double col = 0.0;
    for (int k = -J; k <= J; ++k) col += std::exp(sigma * (std::abs(k) - std::abs(kp))) * std::abs(A(k, kp));
    best = std::max(best, col);
  }
  return best;
}

MatrixOperator space_diffeo_matrix(const AnalyticField& beta, const std::vector<double>& phi, int J, int grid) {
  const int M = grid > 0 ? grid : 4 * (2 * J + 1);
  auto b = spatial_coeffs(beta, phi);
  const int K = beta.kcut();
  std::vector<double> bval(static_cast<std::size_t>(M)), sval(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m) {
    const double x = 2.0 * std::numbers::pi * m / M;
    Complex v{}, vx{};
    for (int k = -K; k <= K; ++k) {
      const Complex c = b[static_cast<std::size_t>(k + K)];
      if (c == Complex{}) continue;
      const Complex e = std::polar(1.0, k * x);
      v += c * e;
      vx += c * e * Complex(0.0, k);
    }
    bval[static_cast<std::size_t>(m)] = v.real();
    sval[static_cast<std::size_t>(m)] = std::sqrt(1.0 + vx.real());
  }
  MatrixOperator A(J);
  std::vector<Complex> g(static_cast<std::size_t>(M));
  for (int kp = -J; kp <= J; ++kp) {
    for (int m = 0; m < M; ++m) {
      const double x = 2.0 * std::numbers::pi * m / M;
      g[static_cast<std::size_t>(m)] = sval[static_cast<std::size_t>(m)] * std::polar(1.0, kp * (x + bval[static_cast<std::size_t>(m)]));
    }
    for (int k = -J; k <= J; ++k) {
      Complex s{};
      for (int m = 0; m < M; ++m) s += g[static_cast<std::size_t>(m)] * std::polar(1.0, -2.0 * std::numbers::pi * k * m / M);
      A(k, kp) = s / static_cast<double>(M);
    }
  }
  return A;
}

// ----- direct evolution -----

DirectEvolver::DirectEvolver(const SchrodingerInput& in, int J) : in_(in), J_(J) {}

MatrixOperator DirectEvolver::perturbation(const std::vector<double>& phi) const {
  auto v2 = spatial_coeffs(in_.V2, phi), v1 = spatial_coeffs(in_.V1, phi), v0 = spatial_coeffs(in_.V0, phi);
  MatrixOperator A(J_);
  for (int k = -J_; k <= J_; ++k)
    for (int kp = -J_; kp <= J_; ++kp) {
      const int d = k - kp;
      const Complex ik(0.0, kp);
      A(k, kp) = I * in_.epsilon * (coeff_at(v2, d) * ik * ik + coeff_at(v1, d) * ik + coeff_at(v0, d));
    }
  return A;
}

ModeVector DirectEvolver::run(const ModeVector& u0, double t0, double t1, double dt) const {
  const long steps = std::max(1L, std::lround((t1 - t0) / dt));
  const double h = (t1 - t0) / static_cast<double>(steps);
  ModeVector u = u0;
  std::vector<Complex> half(u.size());
  for (int k = -J_; k <= J_; ++k) half[ix(k, J_)] = std::polar(1.0, -0.5 * h * k * k);
  const bool free = in_.epsilon == 0.0;
  for (long n = 0; n < steps; ++n) {
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= half[i];
    if (!free) {
      const double tm = t0 + (static_cast<double>(n) + 0.5) * h;
      std::vector<double> phi;
      for (double w : in_.omega.values()) phi.push_back(w * tm);
      MatrixOperator A = perturbation(phi);
      // exp(h A) u by Taylor series
      ModeVector term = u, acc = u;
      const double base = l2_norm(u);
      for (int m = 1; m <= 30; ++m) {
        term = apply_matrix(A, term);
        for (auto& v : term) v *= h / m;
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
        if (l2_norm(term) <= 1e-18 * base) break;
      }
      u = std::move(acc);
    }
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= half[i];
  }
  return u;
}

// ----- reduced flow -----

ReducedFlow::ReducedFlow(const RegularizedForm& rf, const KamResult& kam, int grid)
    : rf_(&rf), kam_(&kam), J_(rf.J), grid_(grid) {
  Mexp_ip_ = multiplication_operator(rf.s3.exp_ip, J_);
  Mexp_mip_ = multiplication_operator(rf.s3.exp_ip.conj(), J_);
}

std::vector<double> ReducedFlow::angles(double s) const {
  std::vector<double> phi;
  const auto& om = rf_->input.omega;
  int maxsite = 0;
  for (int site : om.sites()) maxsite = std::max(maxsite, site);
  phi.assign(static_cast<std::size_t>(maxsite), 0.0);
  for (std::size_t i = 0; i < om.sites().size(); ++i)
    phi[static_cast<std::size_t>(om.sites()[i] - 1)] = om.values()[i] * s;
  return phi;
}

double ReducedFlow::tau(double t) const {
  if (rf_->s2.alpha.empty()) return t;
  return t + rf_->s2.alpha.evaluate(0.0, angles(t)).real();
}

MatrixOperator ReducedFlow::phi1(double t) const { return space_diffeo_matrix(rf_->s1.beta, angles(t), J_, grid_); }
MatrixOperator ReducedFlow::phi1_inverse(double t) const {
  return space_diffeo_matrix(rf_->s1.beta_inv, angles(t), J_, grid_);
}

MatrixOperator ReducedFlow::chain(const std::vector<double>& th) const {
  const double q = rf_->s4.q.empty() ? 0.0 : rf_->s4.q.evaluate(0.0, th).real();
  std::vector<Complex> d(static_cast<std::size_t>(2 * J_ + 1));
  for (int k = -J_; k <= J_; ++k) d[ix(k, J_)] = std::polar(1.0, k * q);
  MatrixOperator pad = matmul(matmul(rf_->s5.expV.evaluate(th), rf_->s6.expG.evaluate(th)), rf_->s7.expF.evaluate(th));
  MatrixOperator W = matmul(Mexp_ip_.evaluate(th), diag_matrix(d));
  W = matmul(W, restrict_matrix(pad, J_));
  return matmul(W, kam_->Psi.evaluate(th));
}

MatrixOperator ReducedFlow::chain_inverse(const std::vector<double>& th) const {
  const double q = rf_->s4.q.empty() ? 0.0 : rf_->s4.q.evaluate(0.0, th).real();
  std::vector<Complex> d(static_cast<std::size_t>(2 * J_ + 1));
  for (int k = -J_; k <= J_; ++k) d[ix(k, J_)] = std::polar(1.0, -k * q);
  MatrixOperator pad =
      matmul(matmul(rf_->s7.expF_inv.evaluate(th), rf_->s6.expG_inv.evaluate(th)), rf_->s5.expV_inv.evaluate(th));
  MatrixOperator W = matmul(kam_->Psi_inv.evaluate(th), restrict_matrix(pad, J_));
  W = matmul(W, diag_matrix(d));
  return matmul(W, Mexp_mip_.evaluate(th));
}

MatrixOperator ReducedFlow::W(double t) const { return matmul(phi1(t), chain(angles(tau(t)))); }
MatrixOperator ReducedFlow::W_inverse(double t) const { return matmul(chain_inverse(angles(tau(t))), phi1_inverse(t)); }

MatrixOperator ReducedFlow::block_flow(double s) const {
  MatrixOperator E(J_);
  for (int j = 0; j <= J_; ++j) {
    const Block& b = kam_->D_inf[j];
    Block out(j, j);
    if (b.rows == 1) {
      out(0, 0) = std::polar(1.0, s * b(0, 0).real());
    } else {
      BlockEigen e = block_eigensystem(b);
      for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 2; ++c) {
          Complex acc{};
          for (int a = 0; a < 2; ++a)
            acc += e.vectors[static_cast<std::size_t>(2 * r + a)] * std::polar(1.0, s * e.values[static_cast<std::size_t>(a)]) *
                   std::conj(e.vectors[static_cast<std::size_t>(2 * c + a)]);
          out(r, c) = acc;
        }
    }
    E.set_block(out);
  }
  return E;
}

ModeVector ReducedFlow::initial_reduced(const ModeVector& u0) const { return apply_matrix(W_inverse(0.0), u0); }

ModeVector ReducedFlow::solution(const ModeVector& z0, double t) const {
  return apply_matrix(W(t), apply_matrix(block_flow(tau(t) - tau(0.0)), z0));
}

// ----- comparison -----

ModeVector default_initial_datum(int J) {
  ModeVector u(static_cast<std::size_t>(2 * J + 1));
  for (int k = -J; k <= J; ++k) u[ix(k, J)] = std::polar(std::exp(-0.5 * std::abs(k)), 0.7 * k + 0.3 * k * k);
  const double n = l2_norm(u);
  for (auto& v : u) v /= n;
  return u;
}

EvolutionReport evolve_compare(const SchrodingerInput& in, const RegularizedForm& rf, const KamResult& kam,
                               const ModeVector& u0, const EvolutionOptions& opt, double generator_residual) {
  EvolutionReport rep;
  const int J = rf.J;
  DirectEvolver direct(in, J);
  ReducedFlow red(rf, kam);
  const ModeVector z0 = red.initial_reduced(u0);
  {
    ModeVector back = apply_matrix(red.W(0.0), z0);
    double d = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) d += std::norm(back[i] - u0[i]);
    rep.roundtrip = std::sqrt(d);
  }
  const double a0 = analytic_norm(u0, opt.analytic_sigma);
  const double h10 = sobolev_norm(u0, 1.0);
  double supW2 = 0.0, supWi2 = 0.0, supW1 = 0.0, supWi1 = 0.0, supWa = 0.0, supWia = 0.0;
  ModeVector u = u0;
  const long samples = std::max(1L, std::lround(opt.T / opt.sample_dt));
  const double tau0 = red.tau(0.0);
  for (long s = 0; s <= samples; ++s) {
    const double t = opt.T * static_cast<double>(s) / static_cast<double>(samples);
    if (s > 0) u = direct.run(u, opt.T * static_cast<double>(s - 1) / static_cast<double>(samples), t, opt.dt);
    MatrixOperator Wt = red.W(t), Wi = red.W_inverse(t);
    ModeVector ur = apply_matrix(Wt, apply_matrix(red.block_flow(red.tau(t) - tau0), z0));
    double d = 0.0;
    for (std::size_t i = 0; i < ur.size(); ++i) d += std::norm(ur[i] - u[i]);
    rep.discrepancy_l2 = std::max(rep.discrepancy_l2, std::sqrt(d));
    supW2 = std::max(supW2, hs_weighted_bound(Wt, 0.0));
    supWi2 = std::max(supWi2, hs_weighted_bound(Wi, 0.0));
    supW1 = std::max(supW1, hs_weighted_bound(Wt, 1.0));
    supWi1 = std::max(supWi1, hs_weighted_bound(Wi, 1.0));
    supWa = std::max(supWa, analytic_operator_norm(Wt, opt.analytic_sigma));
    supWia = std::max(supWia, analytic_operator_norm(Wi, opt.analytic_sigma));
    rep.block_flow_l1 =
        std::max(rep.block_flow_l1, analytic_operator_norm(red.block_flow(red.tau(t) - tau0), opt.analytic_sigma));
    double tail = 0.0;
    for (int k = -J; k <= J; ++k)
      if (std::abs(k) >= J - 3) tail += std::norm(u[ix(k, J)]);
    rep.tail = std::max(rep.tail, std::sqrt(tail));

    TraceRow row;
    row.t = t;
    row.l2 = l2_norm(u);
    row.h1 = sobolev_norm(u, 1.0);
    row.h2 = sobolev_norm(u, 2.0);
    row.analytic = analytic_norm(u, opt.analytic_sigma);
    row.ratio = row.analytic / a0;
    rep.trace.push_back(row);
    rep.max_h1_ratio = std::max(rep.max_h1_ratio, row.h1 / h10);
    rep.max_analytic_ratio = std::max(rep.max_analytic_ratio, row.ratio);
  }
  rep.C_W_l2 = supW2 * supWi2;
  rep.C_W_h1 = supW1 * supWi1;
  rep.C_W_analytic = supWa * supWia * rep.block_flow_l1;
  if (opt.richardson) {
    ModeVector a = direct.run(u0, 0.0, opt.T, opt.dt);
    ModeVector b = direct.run(u0, 0.0, opt.T, 0.5 * opt.dt);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::norm(a[i] - b[i]);
    rep.richardson = std::sqrt(d) * 4.0 / 3.0;
  }
  rep.generator_term = rep.C_W_l2 * opt.T * generator_residual;
  rep.budget = rep.generator_term + rep.C_W_l2 * rep.roundtrip + rep.richardson + rep.tail;
  return rep;
}

double free_flow_drift(int J, double T, double dt) {
  SchrodingerInput in;
  in.epsilon = 0.0;
  in.omega = Frequency({1}, {1.5});
  DirectEvolver ev(in, J);
  ModeVector u0 = default_initial_datum(J);
  ModeVector u = ev.run(u0, 0.0, T, dt);
  double d = 0.0;
  d = std::max(d, std::abs(l2_norm(u) / l2_norm(u0) - 1.0));
  d = std::max(d, std::abs(sobolev_norm(u, 1.0) / sobolev_norm(u0, 1.0) - 1.0));
  d = std::max(d, std::abs(analytic_norm(u, 0.2) / analytic_norm(u0, 0.2) - 1.0));
  return d;
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << "t,l2,h1,h2,analytic_sigma,ratio\n";
  for (const auto& r : rows)
    os << format_double(r.t) << ',' << format_double(r.l2) << ',' << format_double(r.h1) << ',' << format_double(r.h2)
       << ',' << format_double(r.analytic) << ',' << format_double(r.ratio) << '\n';
  return os.str();
}

}  // namespace qpkam
