#include "qpkam/kam.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

#include "qpkam/diophantine.hpp"

namespace qpkam {

namespace {

const Complex I(0.0, 1.0);

// U^H B V for 2x2 (or smaller) blocks with eigenvectors stored column-wise
Block rotate(const BlockEigen& left, const Block& B, const BlockEigen& right, bool inverse) {
  Block out(B.j, B.jp);
  auto L = [&](int r, int c) { return left.vectors[static_cast<std::size_t>(2 * r + c)]; };
  auto R = [&](int r, int c) { return right.vectors[static_cast<std::size_t>(2 * r + c)]; };
  for (int a = 0; a < B.rows; ++a)
    for (int b = 0; b < B.cols; ++b) {
      Complex s{};
      for (int r = 0; r < B.rows; ++r)
        for (int c = 0; c < B.cols; ++c) {
          if (!inverse)
            s += std::conj(L(r, a)) * B(r, c) * R(c, b);  // (U^H B V)_ab
          else
            s += L(a, r) * B(r, c) * std::conj(R(b, c));  // (U B V^H)_ab
        }
      out(a, b) = s;
    }
  return out;
}

BlockEigen eigen_of(const Block& b) {
  if (b.rows == 1) {
    BlockEigen e;
    e.values[0] = b(0, 0).real();
    e.vectors[0] = 1.0;
    return e;
  }
  return block_eigensystem(b);
}

}  // namespace

double kam_width(double sigma0, int n) {
  double s = 0.0;
  for (int j = 1; j <= n; ++j) s += 1.0 / (static_cast<double>(j) * j);
  return sigma0 * (1.0 - s / (4.0 * std::numbers::pi));
}

double kam_cutoff(const KamOptions& opt, int n) {
  double jn = japanese(n);
  return jn * jn * jn * std::pow(opt.chi, n) * opt.N0;
}

MelnikovReport melnikov_check(const BlockDiag& D, const QPOperator& P, const Frequency& omega, double N,
                              double gamma) {
  MelnikovReport rep;
  const int J = D.J();
  std::vector<BlockEigen> eig;
  for (int j = 0; j <= J; ++j) eig.push_back(eigen_of(D[j]));
  for (const auto& [l, M] : P.table()) {
    if (l.weight(P.envelope().eta) > N) continue;
    const double wl = omega.dot(l);
    const double dl = melnikov_weight(l);
    for (int j = 0; j <= J; ++j)
      for (int jp = 0; jp <= J; ++jp) {
        if (l.is_zero() && j == jp) continue;
        if (M.block(j, jp).hs_norm() == 0.0) continue;
        double mn = std::numeric_limits<double>::infinity();
        for (int a = 0; a < eig[j].n; ++a)
          for (int b = 0; b < eig[jp].n; ++b)
            mn = std::min(mn, std::abs(wl - eig[j].values[a] + eig[jp].values[b]));
        const double inv = mn > 0.0 ? 1.0 / mn : std::numeric_limits<double>::infinity();
        const double bound = j == jp ? dl * japanese(j) * japanese(j) / gamma : dl / gamma;
        const double ratio = inv / bound;
        if (ratio > rep.worst_ratio) {
          rep.worst_ratio = ratio;
          rep.l = l;
          rep.j = j;
          rep.jp = jp;
          rep.inverse_norm = inv;
          rep.bound = bound;
        }
      }
  }
  rep.pass = rep.worst_ratio <= 1.0;
  return rep;
}

QPOperator solve_homological_block(const BlockDiag& D, const QPOperator& P, const Frequency& omega, double N) {
  const int J = D.J();
  if (P.J() != J) throw ContractViolation("block-diagonal part and remainder use different cuts");
  std::vector<BlockEigen> eig;
  for (int j = 0; j <= J; ++j) eig.push_back(eigen_of(D[j]));
  QPOperator F(P.envelope(), P.sigma(), J, 0.0);
  for (const auto& [l, M] : P.table()) {
    if (l.weight(P.envelope().eta) > N) continue;
    const double wl = omega.dot(l);
    MatrixOperator out(J);
    bool any = false;
    for (int j = 0; j <= J; ++j)
      for (int jp = 0; jp <= J; ++jp) {
        if (l.is_zero() && j == jp) continue;
        Block B = M.block(j, jp);
        if (B.hs_norm() == 0.0) continue;
        Block Bp = rotate(eig[j], B, eig[jp], false);
        for (int a = 0; a < Bp.rows; ++a)
          for (int b = 0; b < Bp.cols; ++b) {
            const double den = wl - eig[j].values[a] + eig[jp].values[b];
            if (den == 0.0) throw MelnikovFailure(l, j, jp, std::numeric_limits<double>::infinity(), 0.0);
            Bp(a, b) = -I * Bp(a, b) / den;
          }
        out.set_block(rotate(eig[j], Bp, eig[jp], true));
        any = true;
      }
    if (any) F.at(l) = std::move(out);
  }
  return F;
}

BlockDiag diagonal_blocks_over_i(const QPOperator& P) {
  BlockDiag D(P.J());
  if (const MatrixOperator* M = P.find(MultiIndex{}))
    for (int j = 0; j <= P.J(); ++j) {
      Block b = M->block(j, j) * (-I);
      // symmetrize against roundoff
      D[j] = (b + b.adjoint()) * Complex(0.5);
    }
  return D;
}

QPOperator off_block_diagonal(const QPOperator& P) {
  QPOperator out = P;
  if (out.find(MultiIndex{})) {
    MatrixOperator& M = out.at(MultiIndex{});
    for (int j = 0; j <= P.J(); ++j) M.set_block(Block(j, j));
  }
  out.erase_zeros();
  return out;
}

BlockDiag normal_form_blocks(const std::vector<double>& mu, int J) {
  if (static_cast<int>(mu.size()) != 2 * J + 1) throw ContractViolation("eigenvalue table does not match the cut");
  BlockDiag D(J);
  for (int j = 0; j <= J; ++j)
    D[j] = Block::diag(j, mu[static_cast<std::size_t>(j + J)], mu[static_cast<std::size_t>(-j + J)]);
  return D;
}

KamResult kam_iterate(const KamInput& in, const KamOptions& opt) {
  using clock = std::chrono::steady_clock;
  const int J = in.D0.J();
  const Envelope& env = in.P0.envelope();
  KamResult res;
  BlockDiag D = in.D0;
  QPOperator P = in.P0;
  P.set_sigma(in.sigma0);
  res.Psi = QPOperator::identity(env, in.sigma0, J);
  res.Psi_inv = res.Psi;
  const double p0 = P.decay_norm(in.sigma0, -2.0);

  for (int n = 0;; ++n) {
    auto t0 = clock::now();
    KamIterate it;
    it.n = n;
    it.sigma_n = kam_width(in.sigma0, n);
    it.N_n = kam_cutoff(opt, n);
    P.set_sigma(it.sigma_n);
    it.P_norm = P.decay_norm(it.sigma_n, -2.0);
    const bool done = (opt.stop > 0.0 && it.P_norm <= opt.stop * p0) || n >= opt.n_max || P.empty();
    if (done) {
      it.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
      res.log.push_back(it);
      res.converged = opt.stop > 0.0 ? it.P_norm <= opt.stop * p0 || P.empty() : true;
      break;
    }
    if (opt.check_melnikov) {
      MelnikovReport mr = melnikov_check(D, P, in.omega, it.N_n, opt.gamma);
      it.worst_melnikov = mr.worst_ratio;
      if (!mr.pass) throw MelnikovFailure(mr.l, mr.j, mr.jp, mr.inverse_norm, mr.bound);
    }
    QPOperator F = solve_homological_block(D, P, in.omega, it.N_n);
    F.set_sigma(it.sigma_n);
    it.F_norm = F.decay_norm(it.sigma_n, 0.0);

    // L_{n+1} = iD + [P(0)] + Pi_perp P + sum_{m>=1} ad^m Y / (m+1)! + ad^m P / m!,  Y = [P(0)] - Pi_N P
    auto [low, high] = project_ultraviolet(P, it.N_n);
    BlockDiag Pd = diagonal_blocks_over_i(P);
    QPOperator Pd_op = Pd.to_operator(env, it.sigma_n) * I;
    QPOperator Y = Pd_op - low;
    QPOperator next = high;
    QPOperator adY = Y, adP = P;
    double fact = 1.0;
    const double base = std::max(it.P_norm, 1e-300);
    for (int m = 1; m <= operator_tolerances().max_lie_terms; ++m) {
      fact *= m;
      adY = commutator(adY, F);
      adP = commutator(adP, F);
      QPOperator inc = adY * Complex(1.0 / (fact * (m + 1))) + adP * Complex(1.0 / fact);
      double in_norm = inc.decay_norm(it.sigma_n, -2.0);
      next += inc;
      if ((adY.empty() && adP.empty()) || in_norm < operator_tolerances().series * 1e-3 * base) break;
    }
    next.set_order(-2.0);
    next.prune(operator_tolerances().prune);

    double shift = 0.0;
    for (int j = 0; j <= J; ++j) {
      shift = std::max(shift, Pd[j].hs_norm());
      D[j] = D[j] + Pd[j];
    }
    it.D_shift_max = shift;

    const double rho = opt.exp_rho_factor * it.sigma_n;
    auto ef = op_exponential(F, rho, opt.exp_delta);
    auto ef_inv = op_exponential(F * Complex(-1.0), rho, opt.exp_delta);
    it.exp_terms = ef.terms;
    res.Psi = op_compose(res.Psi, ef.phi);
    res.Psi_inv = op_compose(ef_inv.phi, res.Psi_inv);
    res.generators.push_back(F);

    P = std::move(next);
    it.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    res.log.push_back(it);
    res.steps = n + 1;
  }
  res.D_inf = D;
  res.P_final = P;
  return res;
}

ConjugationCheck check_conjugation(const KamInput& in, const KamResult& res) {
  ConjugationCheck c;
  const int J = in.D0.J();
  const Envelope& env = in.P0.envelope();
  const double s = in.sigma0;
  c.initial_offdiag = off_block_diagonal(in.P0).decay_norm(s, 0.0);

  std::vector<Complex> d0(static_cast<std::size_t>(2 * J + 1));
  for (int j = 0; j <= J; ++j) {
    d0[static_cast<std::size_t>(j + J)] = I * in.D0[j](0, 0).real();
    if (j > 0) d0[static_cast<std::size_t>(-j + J)] = I * in.D0[j](1, 1).real();
  }
  // roundoff-safe form: i(D_0 - D_inf) + Psi^-1 ([iD_0, Psi] + P_0 Psi - omega.dPsi)
  QPOperator inner = diag_commutator(d0, res.Psi);
  inner += op_compose(in.P0, res.Psi);
  inner -= op_omega_derivative(res.Psi, in.omega);
  QPOperator R = op_compose(res.Psi_inv, inner);
  BlockDiag diff(J);
  for (int j = 0; j <= J; ++j) diff[j] = in.D0[j] - res.D_inf[j];
  R += diff.to_operator(env, s) * I;
  R.set_sigma(s);
  QPOperator off = off_block_diagonal(R);
  c.residual_offdiag = off.decay_norm(s, 0.0);
  c.residual_diag = (R - off).decay_norm(s, 0.0);

  QPOperator id = QPOperator::identity(env, s, J);
  QPOperator u = op_compose(res.Psi.adjoint(), res.Psi) - id;
  c.unitarity = u.empty() ? 0.0 : u.decay_norm(s, 0.0);
  QPOperator v = op_compose(res.Psi_inv, res.Psi) - id;
  c.inverse_defect = v.empty() ? 0.0 : v.decay_norm(s, 0.0);
  return c;
}

std::vector<SpectrumRow> block_spectrum(const BlockDiag& D) {
  std::vector<SpectrumRow> rows;
  for (int j = 0; j <= D.J(); ++j) {
    SpectrumRow r;
    r.j = j;
    BlockEigen e = eigen_of(D[j]);
    if (e.n == 1) {
      r.mu_plus = r.mu_minus = e.values[0];
    } else {
      // eigenvector c has components (vectors[c], vectors[2 + c]); '+' is the one leaning on k = +j
      const double w0 = std::abs(e.vectors[0]);
      const double w1 = std::abs(e.vectors[1]);
      if (w0 >= w1) {
        r.mu_plus = e.values[0];
        r.mu_minus = e.values[1];
      } else {
        r.mu_plus = e.values[1];
        r.mu_minus = e.values[0];
      }
    }
    rows.push_back(r);
  }
  return rows;
}

double convergence_exponent(const std::vector<KamIterate>& log, int n_lo, int n_hi) {
  double acc = 0.0;
  int cnt = 0;
  for (int n = n_lo; n < n_hi; ++n) {
    if (n + 1 >= static_cast<int>(log.size())) break;
    const double a = log[static_cast<std::size_t>(n)].P_norm, b = log[static_cast<std::size_t>(n + 1)].P_norm;
    if (!(a > 0.0 && b > 0.0 && a < 1.0)) continue;
    acc += std::log(std::log(b) / std::log(a));
    ++cnt;
  }
  return cnt ? std::exp(acc / cnt) : std::numeric_limits<double>::quiet_NaN();
}

std::string kam_log_json_line(const KamIterate& it, bool with_timing) {
  std::ostringstream os;
  os << "{\"n\":" << it.n << ",\"sigma_n\":" << format_double(it.sigma_n) << ",\"N_n\":" << format_double(it.N_n)
     << ",\"P_norm\":" << format_double(it.P_norm) << ",\"D_shift_max\":" << format_double(it.D_shift_max);
  if (with_timing) os << ",\"wall_ms\":" << format_double(it.wall_ms);
  os << "}";
  return os.str();
}

}  // namespace qpkam

namespace qpkam {

SpectrumFit fit_spectrum(const std::vector<SpectrumRow>& rows, int j_lo, int j_hi) {
  if (j_lo < 1 || j_hi < j_lo) throw ContractViolation("fit_spectrum: need 1 <= j_lo <= j_hi");
  auto basis = [](int jj, int sign) {
    const double x = jj;
    return std::array<double, 4>{-x * x, sign * x, 1.0, -sign / x};
  };
  // rows of the design matrix, columns scaled to unit norm, then modified Gram-Schmidt
  std::vector<std::array<double, 4>> A;
  std::vector<double> y;
  for (const auto& r : rows) {
    if (r.j < j_lo || r.j > j_hi) continue;
    A.push_back(basis(r.j, 1));
    y.push_back(r.mu_plus);
    A.push_back(basis(r.j, -1));
    y.push_back(r.mu_minus);
  }
  if (A.size() < 4) throw ContractViolation("fit_spectrum: fewer than four data points");
  const std::size_t m = A.size();
  std::array<double, 4> scale{};
  for (std::size_t c = 0; c < 4; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += A[i][c] * A[i][c];
    scale[c] = std::sqrt(s);
    for (std::size_t i = 0; i < m; ++i) A[i][c] /= scale[c];
  }
  std::array<std::array<double, 4>, 4> R{};
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t p = 0; p < c; ++p) {
      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) dot += A[i][p] * A[i][c];
      R[p][c] = dot;
      for (std::size_t i = 0; i < m; ++i) A[i][c] -= dot * A[i][p];
    }
    double nrm = 0.0;
    for (std::size_t i = 0; i < m; ++i) nrm += A[i][c] * A[i][c];
    nrm = std::sqrt(nrm);
    R[c][c] = nrm;
    for (std::size_t i = 0; i < m; ++i) A[i][c] /= nrm;
  }
  std::array<double, 4> qty{};
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < m; ++i) qty[c] += A[i][c] * y[i];
  std::array<double, 4> x{};
  for (int c = 3; c >= 0; --c) {
    double s = qty[static_cast<std::size_t>(c)];
    for (int p = c + 1; p < 4; ++p) s -= R[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)] * x[static_cast<std::size_t>(p)];
    x[static_cast<std::size_t>(c)] = s / R[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
  }
  SpectrumFit fit;
  for (std::size_t c = 0; c < 4; ++c) fit.lambdas[c] = x[c] / scale[c];
  for (const auto& r : rows) {
    if (r.j < 1) continue;
    auto model = [&](int sign) {
      const auto b = basis(r.j, sign);
      return b[0] * fit.lambdas[0] + b[1] * fit.lambdas[1] + b[2] * fit.lambdas[2] + b[3] * fit.lambdas[3];
    };
    fit.j.push_back(r.j);
    fit.residual_plus.push_back(r.mu_plus - model(1));
    fit.residual_minus.push_back(r.mu_minus - model(-1));
  }
  return fit;
}

}  // namespace qpkam
