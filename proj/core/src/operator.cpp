#include "qpkam/operator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace qpkam {

OperatorTolerances& operator_tolerances() {
  static OperatorTolerances tol;
  return tol;
}

// ----- Block -----

Block::Block(int j_, int jp_) : j(j_), jp(jp_), rows(j_ == 0 ? 1 : 2), cols(jp_ == 0 ? 1 : 2) {}

Block Block::diag(int j, double a, double b) {
  Block B(j, j);
  B(0, 0) = a;
  if (j != 0) B(1, 1) = b;
  return B;
}

double Block::hs_norm() const {
  double s = 0.0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) s += std::norm((*this)(r, c));
  return std::sqrt(s);
}

Block Block::adjoint() const {
  Block B(jp, j);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) B(c, r) = std::conj((*this)(r, c));
  return B;
}

Complex Block::trace() const {
  Complex t{};
  for (int r = 0; r < std::min(rows, cols); ++r) t += (*this)(r, r);
  return t;
}

bool Block::is_hermitian(double tol) const {
  if (j != jp) return false;
  double scale = std::max(hs_norm(), 1.0);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      if (std::abs((*this)(r, c) - std::conj((*this)(c, r))) > tol * scale) return false;
  return true;
}

Block Block::operator*(const Block& o) const {
  if (cols != o.rows) throw ContractViolation("block shapes do not chain");
  Block B(j, o.jp);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < o.cols; ++c) {
      Complex s{};
      for (int t = 0; t < cols; ++t) s += (*this)(r, t) * o(t, c);
      B(r, c) = s;
    }
  return B;
}

Block Block::operator+(const Block& o) const {
  Block B = *this;
  for (std::size_t i = 0; i < 4; ++i) B.e[i] += o.e[i];
  return B;
}

Block Block::operator-(const Block& o) const {
  Block B = *this;
  for (std::size_t i = 0; i < 4; ++i) B.e[i] -= o.e[i];
  return B;
}

Block Block::operator*(Complex c) const {
  Block B = *this;
  for (auto& v : B.e) v *= c;
  return B;
}

BlockEigen block_eigensystem(const Block& A) {
  if (!A.is_hermitian(1e-10)) throw ContractViolation("block eigenproblem needs a hermitian block");
  BlockEigen out;
  if (A.rows == 1) {
    out.n = 1;
    out.values[0] = A(0, 0).real();
    out.vectors[0] = 1.0;
    return out;
  }
  out.n = 2;
  const double a = A(0, 0).real(), d = A(1, 1).real();
  const Complex b = 0.5 * (A(0, 1) + std::conj(A(1, 0)));
  const double h = 0.5 * (a - d);
  const double r = std::hypot(h, std::abs(b));
  const double mid = 0.5 * (a + d);
  out.values = {mid - r, mid + r};
  if (std::abs(b) == 0.0) {
    // already diagonal
    if (a <= d) {
      out.vectors = {1.0, 0.0, 0.0, 1.0};
    } else {
      out.vectors = {0.0, 1.0, 1.0, 0.0};
    }
    out.values = {std::min(a, d), std::max(a, d)};
    return out;
  }
  // Stable rotation: tan(2t) = |b| / h with phase of b carried on the second component.
  const double theta = 0.5 * std::atan2(std::abs(b), h);
  const Complex ph = b / std::abs(b);
  const double c = std::cos(theta), s = std::sin(theta);
  // upper eigenvector (c, conj(ph) s), lower eigenvector (-ph s, c) expressed in basis components
  // v_plus = (c, s * conj(ph)), v_minus = (-s * ph, c)
  out.vectors[0] = -s * ph;            // component 0 of v_minus
  out.vectors[2] = c;                  // component 1 of v_minus
  out.vectors[1] = c;                  // component 0 of v_plus
  out.vectors[3] = s * std::conj(ph);  // component 1 of v_plus
  return out;
}

std::vector<double> block_eigs(const Block& a) {
  auto e = block_eigensystem(a);
  return std::vector<double>(e.values.begin(), e.values.begin() + e.n);
}

std::optional<double> melnikov_inverse_norm(double w, const Block& dj, const Block& djp) {
  auto lam = block_eigs(dj);
  auto mu = block_eigs(djp);
  double mn = std::numeric_limits<double>::infinity();
  for (double l : lam)
    for (double m : mu) mn = std::min(mn, std::abs(w + l - m));
  if (mn == 0.0) return std::nullopt;
  return 1.0 / mn;
}

// ----- MatrixOperator -----

MatrixOperator::MatrixOperator(int J) : J_(J), a_(static_cast<std::size_t>((2 * J + 1) * (2 * J + 1))) {}

MatrixOperator MatrixOperator::identity(int J) {
  MatrixOperator m(J);
  for (int k = -J; k <= J; ++k) m(k, k) = 1.0;
  return m;
}

Block MatrixOperator::block(int j, int jp) const {
  Block B(j, jp);
  int rk[2] = {j, -j}, ck[2] = {jp, -jp};
  for (int r = 0; r < B.rows; ++r)
    for (int c = 0; c < B.cols; ++c) B(r, c) = (*this)(rk[r], ck[c]);
  return B;
}

void MatrixOperator::set_block(const Block& B) {
  int rk[2] = {B.j, -B.j}, ck[2] = {B.jp, -B.jp};
  for (int r = 0; r < B.rows; ++r)
    for (int c = 0; c < B.cols; ++c) (*this)(rk[r], ck[c]) = B(r, c);
}

void MatrixOperator::add_block(const Block& B) {
  int rk[2] = {B.j, -B.j}, ck[2] = {B.jp, -B.jp};
  for (int r = 0; r < B.rows; ++r)
    for (int c = 0; c < B.cols; ++c) (*this)(rk[r], ck[c]) += B(r, c);
}

double MatrixOperator::hs_norm() const {
  double s = 0.0;
  for (const auto& v : a_) s += std::norm(v);
  return std::sqrt(s);
}

double MatrixOperator::mass() const {
  double s = 0.0;
  for (const auto& v : a_) s += std::abs(v);
  return s;
}

double MatrixOperator::max_abs() const {
  double s = 0.0;
  for (const auto& v : a_) s = std::max(s, std::abs(v));
  return s;
}

bool MatrixOperator::is_zero() const {
  for (const auto& v : a_)
    if (v != Complex{}) return false;
  return true;
}

int MatrixOperator::bandwidth() const {
  int b = -1;
  const int n = dim();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (a_[static_cast<std::size_t>(r * n + c)] != Complex{}) b = std::max(b, std::abs(r - c));
  return b;
}

MatrixOperator MatrixOperator::adjoint() const {
  MatrixOperator m(J_);
  for (int k = -J_; k <= J_; ++k)
    for (int kp = -J_; kp <= J_; ++kp) m(kp, k) = std::conj((*this)(k, kp));
  return m;
}

MatrixOperator& MatrixOperator::operator+=(const MatrixOperator& o) {
  if (o.J_ != J_) throw ContractViolation("matrix operators with different spatial cuts");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
  return *this;
}

MatrixOperator& MatrixOperator::operator-=(const MatrixOperator& o) {
  if (o.J_ != J_) throw ContractViolation("matrix operators with different spatial cuts");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
  return *this;
}

MatrixOperator& MatrixOperator::operator*=(Complex c) {
  for (auto& v : a_) v *= c;
  return *this;
}

void MatrixOperator::multiply_add(const MatrixOperator& A, int bA, const MatrixOperator& B, int bB, MatrixOperator& C,
                                  Complex scale) {
  if (bA < 0 || bB < 0) return;
  const int n = A.dim();
  const Complex* a = A.a_.data();
  const Complex* b = B.a_.data();
  Complex* c = C.a_.data();
  for (int i = 0; i < n; ++i) {
    const int plo = std::max(0, i - bA), phi = std::min(n - 1, i + bA);
    Complex* crow = c + static_cast<std::ptrdiff_t>(i) * n;
    for (int p = plo; p <= phi; ++p) {
      const Complex av = a[i * n + p];
      if (av == Complex{}) continue;
      const Complex s = av * scale;
      const int qlo = std::max(0, p - bB), qhi = std::min(n - 1, p + bB);
      const Complex* brow = b + static_cast<std::ptrdiff_t>(p) * n;
      for (int q = qlo; q <= qhi; ++q) crow[q] += s * brow[q];
    }
  }
}

double bsm_norm(const MatrixOperator& R, double s, double m) {
  double best = 0.0;
  const int J = R.J();
  for (int jp = 0; jp <= J; ++jp) {
    double col = 0.0;
    for (int j = 0; j <= J; ++j) {
      double h = R.block(j, jp).hs_norm();
      if (h != 0.0) col += std::exp(s * std::abs(j - jp)) * h;
    }
    best = std::max(best, col * std::pow(japanese(jp), -m));
  }
  return best;
}

// ----- QPOperator -----

QPOperator::QPOperator(const Envelope& env, double sigma, int J, double order)
    : env_(env), sigma_(sigma), J_(J), order_(order) {}

QPOperator QPOperator::identity(const Envelope& env, double sigma, int J) {
  QPOperator R(env, sigma, J, 0.0);
  R.table_.emplace(MultiIndex{}, MatrixOperator::identity(J));
  return R;
}

QPOperator QPOperator::derivative(const Envelope& env, double sigma, int J, int m) {
  QPOperator R(env, sigma, J, m);
  MatrixOperator D(J);
  for (int k = -J; k <= J; ++k) {
    if (k == 0) {
      D(0, 0) = m == 0 ? 1.0 : 0.0;
      continue;
    }
    D(k, k) = std::pow(Complex(0.0, static_cast<double>(k)), m);
  }
  R.table_.emplace(MultiIndex{}, std::move(D));
  return R;
}

QPOperator QPOperator::constant(const MatrixOperator& m, const Envelope& env, double sigma) {
  QPOperator R(env, sigma, m.J(), 0.0);
  if (!m.is_zero()) R.table_.emplace(MultiIndex{}, m);
  return R;
}

const MatrixOperator* QPOperator::find(const MultiIndex& l) const {
  auto it = table_.find(l);
  return it == table_.end() ? nullptr : &it->second;
}

MatrixOperator& QPOperator::at(const MultiIndex& l) {
  auto it = table_.find(l);
  if (it != table_.end()) return it->second;
  if (!env_.admits(l)) throw EnvelopeViolation("operator label " + l.to_string() + " outside envelope");
  return table_.emplace(l, MatrixOperator(J_)).first->second;
}

void QPOperator::erase_zeros() {
  for (auto it = table_.begin(); it != table_.end();) it = it->second.is_zero() ? table_.erase(it) : std::next(it);
}

void QPOperator::prune(double rel) {
  double cut = rel * max_abs();
  for (auto& [l, m] : table_)
    for (auto& v : m.data())
      if (std::abs(v) < cut) v = {};
  erase_zeros();
}

double QPOperator::decay_norm(double s, double m) const {
  double total = 0.0;
  for (const auto& [l, M] : table_) total += std::exp(s * l.weight(env_.eta)) * bsm_norm(M, s, m);
  return total;
}

double QPOperator::max_abs() const {
  double m = 0.0;
  for (const auto& [l, M] : table_) m = std::max(m, M.max_abs());
  return m;
}

QPOperator QPOperator::adjoint() const {
  QPOperator R(env_, sigma_, J_, order_);
  for (const auto& [l, M] : table_) R.table_.emplace(-l, M.adjoint());
  return R;
}

double QPOperator::skew_defect() const {
  double d = 0.0;
  auto check = [&](const MultiIndex& l) {
    const MatrixOperator* a = find(l);
    const MatrixOperator* b = find(-l);
    MatrixOperator s(J_);
    if (a) s += a->adjoint();
    if (b) s += *b;
    d = std::max(d, s.hs_norm());
  };
  for (const auto& [l, M] : table_) check(l);
  return d;
}

double QPOperator::self_adjoint_defect() const {
  double d = 0.0;
  for (const auto& [l, M] : table_) {
    MatrixOperator s = M.adjoint();
    if (const MatrixOperator* b = find(-l)) s -= *b;
    d = std::max(d, s.hs_norm());
  }
  for (const auto& [l, M] : table_)
    if (!find(-l)) d = std::max(d, M.hs_norm());
  return d;
}

MatrixOperator QPOperator::evaluate(const std::vector<double>& phi) const {
  MatrixOperator out(J_);
  for (const auto& [l, M] : table_) {
    double arg = 0.0;
    for (int i = 0; i < l.support_size(); ++i) {
      auto site = static_cast<std::size_t>(l.site_at(i));
      if (site <= phi.size()) arg += l.value_at(i) * phi[site - 1];
    }
    MatrixOperator t = M;
    t *= std::polar(1.0, arg);
    out += t;
  }
  return out;
}

void QPOperator::check_compatible(const QPOperator& o) const {
  if (!(env_ == o.env_)) throw ContractViolation("operators on different envelopes");
  if (J_ != o.J_) throw ContractViolation("operators with different spatial cuts");
}

QPOperator& QPOperator::operator+=(const QPOperator& o) {
  check_compatible(o);
  sigma_ = std::min(sigma_, o.sigma_);
  order_ = std::max(order_, o.order_);
  for (const auto& [l, M] : o.table_) at(l) += M;
  erase_zeros();
  return *this;
}

QPOperator& QPOperator::operator-=(const QPOperator& o) {
  check_compatible(o);
  sigma_ = std::min(sigma_, o.sigma_);
  order_ = std::max(order_, o.order_);
  for (const auto& [l, M] : o.table_) at(l) -= M;
  erase_zeros();
  return *this;
}

QPOperator& QPOperator::operator*=(Complex c) {
  if (c == Complex{}) {
    table_.clear();
    return *this;
  }
  for (auto& [l, M] : table_) M *= c;
  return *this;
}

QPOperator op_compose(const QPOperator& R, const QPOperator& Q) {
  if (!(R.envelope() == Q.envelope()) || R.J() != Q.J())
    throw ContractViolation("operators on different envelopes or spatial cuts");
  QPOperator out(R.envelope(), std::min(R.sigma(), Q.sigma()), R.J(), R.order() + Q.order());
  if (R.empty() || Q.empty()) return out;
  struct Item {
    const MultiIndex* l;
    const MatrixOperator* m;
    double mass;
    int band;
  };
  auto gather = [](const QPOperator& X, double& mx) {
    std::vector<Item> v;
    for (const auto& [l, M] : X.table()) {
      double ms = M.mass();
      if (ms == 0.0) continue;
      v.push_back({&l, &M, ms, M.bandwidth()});
      mx = std::max(mx, ms);
    }
    return v;
  };
  double mr = 0.0, mq = 0.0;
  auto ir = gather(R, mr);
  auto iq = gather(Q, mq);
  const double skip = operator_tolerances().pair_skip * mr * mq;
  const Envelope& env = R.envelope();
  for (const auto& a : ir)
    for (const auto& b : iq) {
      if (a.mass * b.mass < skip) continue;
      MultiIndex l = *a.l + *b.l;
      if (!env.admits(l)) continue;
      MatrixOperator::multiply_add(*a.m, a.band, *b.m, b.band, out.at(l));
    }
  out.prune(operator_tolerances().prune);
  return out;
}

QPOperator operator*(const QPOperator& R, const QPOperator& Q) { return op_compose(R, Q); }

QPOperator commutator(const QPOperator& A, const QPOperator& B) {
  QPOperator c = op_compose(A, B);
  c -= op_compose(B, A);
  c.set_order(A.order() + B.order());
  return c;
}

QPOperator op_omega_derivative(const QPOperator& R, const Frequency& omega) {
  QPOperator out(R.envelope(), R.sigma(), R.J(), R.order());
  for (const auto& [l, M] : R.table()) {
    if (l.is_zero()) continue;
    MatrixOperator t = M;
    t *= Complex(0.0, omega.dot(l));
    out.at(l) = std::move(t);
  }
  return out;
}

std::pair<QPOperator, QPOperator> project_ultraviolet(const QPOperator& R, double N) {
  QPOperator lo(R.envelope(), R.sigma(), R.J(), R.order()), hi = lo;
  for (const auto& [l, M] : R.table()) (l.weight(R.envelope().eta) <= N ? lo : hi).at(l) = M;
  return {lo, hi};
}

QPOperator block_diagonal_part(const QPOperator& R) {
  QPOperator out(R.envelope(), R.sigma(), R.J(), R.order());
  const MatrixOperator* M = R.find(MultiIndex{});
  if (!M) return out;
  MatrixOperator D(R.J());
  for (int j = 0; j <= R.J(); ++j) D.set_block(M->block(j, j));
  if (!D.is_zero()) out.at(MultiIndex{}) = std::move(D);
  return out;
}

QPOperator multiplication_operator(const AnalyticField& a, int J) {
  QPOperator out(a.envelope(), a.sigma(), J, 0.0);
  const int K = a.kcut();
  for (const auto& [l, row] : a.table()) {
    MatrixOperator M(J);
    bool any = false;
    for (int k = -J; k <= J; ++k)
      for (int kp = -J; kp <= J; ++kp) {
        int d = k - kp;
        if (std::abs(d) > K) continue;
        const Complex& c = row[static_cast<std::size_t>(d + K)];
        if (c == Complex{}) continue;
        M(k, kp) = c;
        any = true;
      }
    if (any) out.at(l) = std::move(M);
  }
  return out;
}

AnalyticField apply(const QPOperator& R, const AnalyticField& u) {
  const int J = R.J();
  AnalyticField out(u.envelope(), std::min(R.sigma(), u.sigma()), J);
  const int K = u.kcut();
  for (const auto& [l1, M] : R.table())
    for (const auto& [l2, row] : u.table()) {
      MultiIndex l = l1 + l2;
      if (!u.envelope().admits(l)) continue;
      AnalyticField::Row acc(static_cast<std::size_t>(2 * J + 1));
      bool any = false;
      for (int kp = -std::min(J, K); kp <= std::min(J, K); ++kp) {
        const Complex c = row[static_cast<std::size_t>(kp + K)];
        if (c == Complex{}) continue;
        for (int k = -J; k <= J; ++k) acc[static_cast<std::size_t>(k + J)] += M(k, kp) * c;
        any = true;
      }
      if (!any) continue;
      auto& dst = out.row_mut(l);
      for (std::size_t i = 0; i < acc.size(); ++i) dst[i] += acc[i];
    }
  return out;
}

// ----- pseudo-differential expansions -----

double pdo_coefficient(int i, int m) {
  double c = 1.0;
  for (int t = 0; t < i; ++t) c *= static_cast<double>(m - t) / (t + 1);
  return c;
}

QPOperator PdoExpansion::assemble(int J) const {
  QPOperator out;
  bool first = true;
  for (const auto& [sym, p] : terms) {
    const auto& env = sym.envelope();
    QPOperator t = op_compose(multiplication_operator(sym, J), QPOperator::derivative(env, sym.sigma(), J, p));
    if (first) {
      out = t;
      first = false;
    } else {
      out += t;
    }
  }
  return out;
}

PdoExpansion pdo(const AnalyticField& a, int m, int mp, int N, int J) {
  if (N < 1) throw ContractViolation("pdo expansion needs N >= 1");
  const auto& env = a.envelope();
  const double s = a.sigma();
  PdoExpansion ex;
  ex.full = op_compose(op_compose(QPOperator::derivative(env, s, J, m), multiplication_operator(a, J)),
                       QPOperator::derivative(env, s, J, mp));
  for (int i = 0; i < N; ++i) {
    double c = pdo_coefficient(i, m);
    if (c == 0.0) continue;
    ex.terms.emplace_back(spatial_derivative(a, i) * Complex(c, 0.0), m + mp - i);
  }
  ex.remainder = ex.full;
  if (!ex.terms.empty()) ex.remainder -= ex.assemble(J);
  ex.remainder.set_order(m + mp - N);
  return ex;
}

PdoExpansion commutator_expand(const AnalyticField& a, int m, const AnalyticField& b, int mp, int N, int J) {
  if (N < 1) throw ContractViolation("commutator expansion needs N >= 1");
  const auto& env = a.envelope();
  const double s = std::min(a.sigma(), b.sigma());
  PdoExpansion ex;
  QPOperator A = op_compose(multiplication_operator(a, J), QPOperator::derivative(env, s, J, m));
  QPOperator B = op_compose(multiplication_operator(b, J), QPOperator::derivative(env, s, J, mp));
  ex.full = commutator(A, B);
  for (int i = 1; i < N; ++i) {
    AnalyticField sym = product(a, spatial_derivative(b, i)) * Complex(pdo_coefficient(i, m), 0.0) -
                        product(b, spatial_derivative(a, i)) * Complex(pdo_coefficient(i, mp), 0.0);
    if (!sym.empty()) ex.terms.emplace_back(std::move(sym), m + mp - i);
  }
  ex.remainder = ex.full;
  if (!ex.terms.empty()) ex.remainder -= ex.assemble(J);
  ex.remainder.set_order(m + mp - N);
  return ex;
}

// ----- exponentials and pushforwards -----

ExponentialResult op_exponential(const QPOperator& F, double rho, double delta) {
  const auto& tol = operator_tolerances();
  ExponentialResult res;
  res.smallness = F.decay_norm(F.sigma(), 0.0) / (rho * rho);
  if (res.smallness > delta)
    throw SmallnessViolation("exponential map smallness rho^-2 |F| = " + format_double(res.smallness) +
                             " exceeds delta = " + format_double(delta));
  QPOperator sum = QPOperator::identity(F.envelope(), F.sigma(), F.J());
  QPOperator term = sum;
  for (int n = 1; n <= tol.max_lie_terms; ++n) {
    term = op_compose(term, F) * Complex(1.0 / n, 0.0);
    sum += term;
    res.terms = n;
    if (term.empty() || term.decay_norm(F.sigma(), 0.0) < tol.series * sum.decay_norm(F.sigma(), 0.0)) break;
  }
  sum.set_order(0.0);
  res.phi = std::move(sum);
  return res;
}

QPOperator conjugate_pushforward(const QPOperator& L, const QPOperator& phi, const QPOperator& phi_inv,
                                 const Frequency& omega) {
  QPOperator inner = op_compose(L, phi);
  inner -= op_omega_derivative(phi, omega);
  QPOperator out = op_compose(phi_inv, inner);
  out.set_order(L.order());
  return out;
}

QPOperator lie_pushforward(const QPOperator& L, const QPOperator& G, const Frequency& omega) {
  const auto& tol = operator_tolerances();
  QPOperator out = L;
  QPOperator X = L;
  QPOperator Y = op_omega_derivative(G, omega);
  double fact = 1.0;  // k!
  out -= Y;
  double base = std::max(out.decay_norm(out.sigma(), 0.0), 1e-300);
  for (int k = 1; k <= tol.max_lie_terms; ++k) {
    fact *= k;
    X = commutator(X, G);
    Y = commutator(Y, G);
    QPOperator tx = X * Complex(1.0 / fact, 0.0);
    QPOperator ty = Y * Complex(1.0 / (fact * (k + 1)), 0.0);
    out += tx;
    out -= ty;
    double inc = tx.decay_norm(tx.sigma(), 0.0) + ty.decay_norm(ty.sigma(), 0.0);
    if ((X.empty() && Y.empty()) || inc < tol.series * base) break;
  }
  out.set_order(L.order());
  return out;
}

QPOperator diag_commutator(const std::vector<Complex>& d, const QPOperator& X) {
  const int J = X.J();
  if (static_cast<int>(d.size()) != 2 * J + 1) throw ContractViolation("diagonal size does not match the cut");
  QPOperator out(X.envelope(), X.sigma(), J, X.order());
  for (const auto& [l, M] : X.table()) {
    MatrixOperator C(J);
    for (int k = -J; k <= J; ++k)
      for (int kp = -J; kp <= J; ++kp) {
        const Complex& x = M(k, kp);
        if (x != Complex{}) C(k, kp) = (d[static_cast<std::size_t>(k + J)] - d[static_cast<std::size_t>(kp + J)]) * x;
      }
    if (!C.is_zero()) out.at(l) = std::move(C);
  }
  return out;
}

QPOperator lie_increment(const std::vector<Complex>& diag, const QPOperator& rest, const QPOperator& G,
                         const Frequency& omega) {
  const auto& tol = operator_tolerances();
  QPOperator X = diag_commutator(diag, G);
  X += commutator(rest, G);
  QPOperator Y = op_omega_derivative(G, omega);
  QPOperator out = X;
  out -= Y;
  double base = std::max(out.decay_norm(out.sigma(), 0.0), 1e-300);
  double fact = 1.0;  // k!
  for (int k = 1; k <= tol.max_lie_terms; ++k) {
    fact *= k;
    X = commutator(X, G);             // ad^{k+1} L
    Y = commutator(Y, G);             // ad^k (omega.dG)
    QPOperator tx = X * Complex(1.0 / (fact * (k + 1)), 0.0);
    QPOperator ty = Y * Complex(1.0 / (fact * (k + 1)), 0.0);
    out += tx;
    out -= ty;
    double inc = tx.decay_norm(tx.sigma(), 0.0) + ty.decay_norm(ty.sigma(), 0.0);
    if ((X.empty() && Y.empty()) || inc < tol.series * base) break;
  }
  out.set_order(rest.order());
  return out;
}

QPOperator restrict_to(const QPOperator& R, int J) {
  if (J > R.J()) throw ContractViolation("restriction to a larger cut");
  QPOperator out(R.envelope(), R.sigma(), J, R.order());
  for (const auto& [l, M] : R.table()) {
    MatrixOperator S(J);
    for (int k = -J; k <= J; ++k)
      for (int kp = -J; kp <= J; ++kp) S(k, kp) = M(k, kp);
    if (!S.is_zero()) out.at(l) = std::move(S);
  }
  return out;
}

QPOperator diagonal_operator(const std::vector<Complex>& d, const Envelope& env, double sigma) {
  const int J = (static_cast<int>(d.size()) - 1) / 2;
  MatrixOperator M(J);
  for (int k = -J; k <= J; ++k) M(k, k) = d[static_cast<std::size_t>(k + J)];
  return QPOperator::constant(M, env, sigma);
}

// ----- BlockDiag -----

BlockDiag::BlockDiag(int J) {
  blocks_.reserve(static_cast<std::size_t>(J + 1));
  for (int j = 0; j <= J; ++j) blocks_.emplace_back(j, j);
}

MatrixOperator BlockDiag::to_matrix() const {
  MatrixOperator m(J());
  for (const auto& b : blocks_) m.set_block(b);
  return m;
}

QPOperator BlockDiag::to_operator(const Envelope& env, double sigma) const {
  return QPOperator::constant(to_matrix(), env, sigma);
}

BlockDiag BlockDiag::from_matrix(const MatrixOperator& m) {
  BlockDiag d(m.J());
  for (int j = 0; j <= m.J(); ++j) d[j] = m.block(j, j);
  return d;
}

double BlockDiag::max_hermitian_defect() const {
  double d = 0.0;
  for (const auto& b : blocks_) d = std::max(d, (b - b.adjoint()).hs_norm());
  return d;
}

std::string dump_operator(const QPOperator& R) {
  std::ostringstream os;
  os << "# qpkam-operator sigma=" << format_double(R.sigma()) << " m=" << format_double(R.order())
     << " eta=" << format_double(R.envelope().eta) << " jmax=" << R.J() << '\n';
  for (const auto& [l, M] : R.table())
    for (int j = 0; j <= R.J(); ++j)
      for (int jp = 0; jp <= R.J(); ++jp) {
        Block b = M.block(j, jp);
        if (b.hs_norm() == 0.0) continue;
        os << l.to_string() << " | " << j << " | " << jp << " |";
        for (const auto& c : b.e) os << ' ' << format_double(c.real()) << ' ' << format_double(c.imag());
        os << '\n';
      }
  return os.str();
}

}  // namespace qpkam
