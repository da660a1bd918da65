#include "qpkam/fourier.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace qpkam {

FourierTolerances& default_tolerances() {
  static FourierTolerances tol;
  return tol;
}

namespace {

double row_mass(const AnalyticField::Row& r) {
  double s = 0.0;
  for (const auto& c : r) s += std::abs(c);
  return s;
}

// first/last nonzero positions, or lo > hi when the row is zero
std::pair<int, int> support(const AnalyticField::Row& r) {
  int lo = 0, hi = static_cast<int>(r.size()) - 1;
  while (lo <= hi && r[static_cast<std::size_t>(lo)] == Complex{}) ++lo;
  while (hi >= lo && r[static_cast<std::size_t>(hi)] == Complex{}) --hi;
  return {lo, hi};
}

bool row_zero(const AnalyticField::Row& r) {
  for (const auto& c : r)
    if (c != Complex{}) return false;
  return true;
}

}  // namespace

AnalyticField::AnalyticField(const Envelope& env, double sigma, int kcut) : env_(env), sigma_(sigma), kcut_(kcut) {
  if (kcut < 0) throw ContractViolation("negative spatial cut");
  if (!(sigma >= 0.0)) throw WidthViolation("negative analyticity width");
}

AnalyticField AnalyticField::constant(const Envelope& env, double sigma, Complex c, int kcut) {
  AnalyticField u(env, sigma, kcut);
  if (c != Complex{}) u.set(MultiIndex{}, 0, c);
  return u;
}

AnalyticField AnalyticField::monomial(const Envelope& env, double sigma, const MultiIndex& l, int k, Complex c,
                                      int kcut) {
  AnalyticField u(env, sigma, std::max(kcut, std::abs(k)));
  u.set(l, k, c);
  return u;
}

Complex AnalyticField::coeff(const MultiIndex& l, int k) const {
  if (std::abs(k) > kcut_) return {};
  auto it = table_.find(l);
  if (it == table_.end()) return {};
  return it->second[static_cast<std::size_t>(idx(k))];
}

const AnalyticField::Row* AnalyticField::row(const MultiIndex& l) const {
  auto it = table_.find(l);
  return it == table_.end() ? nullptr : &it->second;
}

AnalyticField::Row& AnalyticField::row_mut(const MultiIndex& l) {
  auto it = table_.find(l);
  if (it != table_.end()) return it->second;
  return table_.emplace(l, Row(static_cast<std::size_t>(2 * kcut_ + 1))).first->second;
}

void AnalyticField::add(const MultiIndex& l, int k, Complex c) {
  if (std::abs(k) > kcut_) throw EnvelopeViolation("spatial mode " + std::to_string(k) + " beyond cut");
  if (!env_.admits(l)) throw EnvelopeViolation("multi-index " + l.to_string() + " outside |l|_eta <= lmax");
  row_mut(l)[static_cast<std::size_t>(idx(k))] += c;
}

void AnalyticField::set(const MultiIndex& l, int k, Complex c) {
  if (std::abs(k) > kcut_) throw EnvelopeViolation("spatial mode " + std::to_string(k) + " beyond cut");
  if (!env_.admits(l)) throw EnvelopeViolation("multi-index " + l.to_string() + " outside |l|_eta <= lmax");
  row_mut(l)[static_cast<std::size_t>(idx(k))] = c;
}

AnalyticField AnalyticField::with_sigma(double s) const {
  AnalyticField r = *this;
  if (!(s >= 0.0)) throw WidthViolation("negative analyticity width");
  r.sigma_ = s;
  return r;
}

AnalyticField AnalyticField::with_kcut(int k) const {
  AnalyticField r(env_, sigma_, k);
  for (const auto& [l, row] : table_) {
    Row nr(static_cast<std::size_t>(2 * k + 1));
    bool any = false;
    for (int q = -std::min(k, kcut_); q <= std::min(k, kcut_); ++q) {
      nr[static_cast<std::size_t>(q + k)] = row[static_cast<std::size_t>(q + kcut_)];
      any = any || nr[static_cast<std::size_t>(q + k)] != Complex{};
    }
    if (any) r.table_.emplace(l, std::move(nr));
  }
  return r;
}

double AnalyticField::norm(double s) const {
  if (s > sigma_ * (1.0 + 1e-12) + 1e-15)
    throw WidthViolation("norm requested at width " + format_double(s) + " beyond declared width " +
                         format_double(sigma_));
  double total = 0.0;
  for (const auto& [l, row] : table_) {
    double wl = s * l.weight(env_.eta);
    for (int k = -kcut_; k <= kcut_; ++k) {
      const Complex& c = row[static_cast<std::size_t>(idx(k))];
      if (c != Complex{}) total += std::exp(wl + s * std::abs(k)) * std::abs(c);
    }
  }
  return total;
}

double AnalyticField::max_abs() const {
  double m = 0.0;
  for (const auto& [l, row] : table_)
    for (const auto& c : row) m = std::max(m, std::abs(c));
  return m;
}

double AnalyticField::reality_defect() const {
  double d = 0.0;
  for (const auto& [l, row] : table_) {
    for (int k = -kcut_; k <= kcut_; ++k)
      d = std::max(d, std::abs(row[static_cast<std::size_t>(idx(k))] - std::conj(coeff(-l, -k))));
  }
  return d;
}

bool AnalyticField::is_real(double tol) const { return reality_defect() <= tol * std::max(max_abs(), 1e-300); }

AnalyticField AnalyticField::conj() const {
  AnalyticField r(env_, sigma_, kcut_);
  for (const auto& [l, row] : table_) {
    Row nr(row.size());
    for (int k = -kcut_; k <= kcut_; ++k) nr[static_cast<std::size_t>(idx(-k))] = std::conj(row[static_cast<std::size_t>(idx(k))]);
    r.table_.emplace(-l, std::move(nr));
  }
  return r;
}

Complex AnalyticField::evaluate(double x, const std::vector<double>& phi) const {
  Complex total{};
  for (const auto& [l, row] : table_) {
    double arg = 0.0;
    for (int i = 0; i < l.support_size(); ++i) {
      auto site = static_cast<std::size_t>(l.site_at(i));
      if (site <= phi.size()) arg += l.value_at(i) * phi[site - 1];
    }
    Complex el = std::polar(1.0, arg);
    Complex s{};
    for (int k = -kcut_; k <= kcut_; ++k) {
      const Complex& c = row[static_cast<std::size_t>(idx(k))];
      if (c != Complex{}) s += c * std::polar(1.0, k * x);
    }
    total += el * s;
  }
  return total;
}

void AnalyticField::prune(double rel) {
  double n = norm(sigma_);
  double cut = rel * n;
  for (auto it = table_.begin(); it != table_.end();) {
    double wl = sigma_ * it->first.weight(env_.eta);
    bool any = false;
    for (int k = -kcut_; k <= kcut_; ++k) {
      Complex& c = it->second[static_cast<std::size_t>(idx(k))];
      if (c == Complex{}) continue;
      if (std::abs(c) * std::exp(wl + sigma_ * std::abs(k)) < cut)
        c = {};
      else
        any = true;
    }
    it = any ? std::next(it) : table_.erase(it);
  }
}

void AnalyticField::check_compatible(const AnalyticField& o) const {
  if (!(env_ == o.env_)) throw ContractViolation("fields built on different envelopes");
}

AnalyticField& AnalyticField::operator+=(const AnalyticField& o) {
  check_compatible(o);
  if (o.kcut_ > kcut_) *this = with_kcut(o.kcut_);
  sigma_ = std::min(sigma_, o.sigma_);
  for (const auto& [l, row] : o.table_) {
    Row& dst = row_mut(l);
    for (int k = -o.kcut_; k <= o.kcut_; ++k) dst[static_cast<std::size_t>(idx(k))] += row[static_cast<std::size_t>(k + o.kcut_)];
  }
  for (auto it = table_.begin(); it != table_.end();) it = row_zero(it->second) ? table_.erase(it) : std::next(it);
  return *this;
}

AnalyticField& AnalyticField::operator-=(const AnalyticField& o) { return *this += (-o); }

AnalyticField& AnalyticField::operator*=(Complex c) {
  if (c == Complex{}) {
    table_.clear();
    return *this;
  }
  for (auto& [l, row] : table_)
    for (auto& v : row) v *= c;
  return *this;
}

AnalyticField AnalyticField::operator-() const {
  AnalyticField r = *this;
  for (auto& [l, row] : r.table_)
    for (auto& v : row) v = -v;
  return r;
}

double norm_sigma(const AnalyticField& u, double s) { return u.norm(s); }

AnalyticField product(const AnalyticField& a, const AnalyticField& b) {
  if (!(a.envelope() == b.envelope())) throw ContractViolation("fields built on different envelopes");
  const Envelope& env = a.envelope();
  const int K = std::max(a.kcut(), b.kcut());
  AnalyticField r(env, std::min(a.sigma(), b.sigma()), K);
  if (a.empty() || b.empty()) return r;

  struct Entry {
    const MultiIndex* l;
    const AnalyticField::Row* row;
    double mass;
    int lo, hi;  // support as spatial modes
  };
  auto collect = [](const AnalyticField& u) {
    std::vector<Entry> out;
    double mx = 0.0;
    for (const auto& [l, row] : u.table()) {
      auto [lo, hi] = support(row);
      if (lo > hi) continue;
      double m = row_mass(row);
      out.push_back({&l, &row, m, lo - u.kcut(), hi - u.kcut()});
      mx = std::max(mx, m);
    }
    return std::make_pair(out, mx);
  };
  auto [ea, ma] = collect(a);
  auto [eb, mb] = collect(b);
  const double skip = default_tolerances().pair_skip * ma * mb;
  const int ka = a.kcut(), kb = b.kcut();

  for (const auto& x : ea) {
    for (const auto& y : eb) {
      if (x.mass * y.mass < skip) continue;
      MultiIndex l = *x.l + *y.l;
      if (!env.admits(l)) continue;
      AnalyticField::Row* dst = nullptr;
      for (int p = x.lo; p <= x.hi; ++p) {
        const Complex cp = (*x.row)[static_cast<std::size_t>(p + ka)];
        if (cp == Complex{}) continue;
        int qlo = std::max(y.lo, -K - p), qhi = std::min(y.hi, K - p);
        for (int q = qlo; q <= qhi; ++q) {
          const Complex cq = (*y.row)[static_cast<std::size_t>(q + kb)];
          if (cq == Complex{}) continue;
          if (!dst) dst = &r.row_mut(l);
          (*dst)[static_cast<std::size_t>(p + q + K)] += cp * cq;
        }
      }
    }
  }
  return r;
}

AnalyticField operator*(const AnalyticField& a, const AnalyticField& b) { return product(a, b); }

std::pair<AnalyticField, AnalyticField> project_ultraviolet(const AnalyticField& u, double N) {
  if (N < 0) throw ContractViolation("negative ultraviolet cutoff");
  AnalyticField lo(u.envelope(), u.sigma(), u.kcut()), hi(u.envelope(), u.sigma(), u.kcut());
  for (const auto& [l, row] : u.table()) {
    AnalyticField& dst = l.weight(u.envelope().eta) <= N ? lo : hi;
    dst.row_mut(l) = row;
  }
  return {lo, hi};
}

AnalyticField omega_derivative(const AnalyticField& u, const Frequency& omega) {
  AnalyticField r(u.envelope(), u.sigma(), u.kcut());
  for (const auto& [l, row] : u.table()) {
    if (l.is_zero()) continue;
    Complex f(0.0, omega.dot(l));
    auto& dst = r.row_mut(l);
    for (std::size_t i = 0; i < row.size(); ++i) dst[i] = f * row[i];
  }
  return r;
}

AnalyticField solve_homological_scalar(const AnalyticField& f, const Frequency& omega) {
  AnalyticField r(f.envelope(), f.sigma(), f.kcut());
  const double scale = std::max(f.max_abs(), 1e-300);
  for (const auto& [l, row] : f.table()) {
    if (l.is_zero()) {
      for (const auto& c : row)
        if (std::abs(c) > 1e-14 * scale)
          throw ContractViolation("homological equation needs zero phi-average, found |f(0)| = " +
                                  format_double(std::abs(c)));
      continue;
    }
    double w = omega.dot(l);
    double floor = omega.diophantine_floor(l);
    if (!(std::abs(w) > floor)) throw SmallDivisorError(l, std::abs(w), floor);
    Complex inv = 1.0 / Complex(0.0, w);
    auto& dst = r.row_mut(l);
    for (std::size_t i = 0; i < row.size(); ++i) dst[i] = row[i] * inv;
  }
  return r;
}

AnalyticField spatial_derivative(const AnalyticField& u, int m) {
  AnalyticField r(u.envelope(), u.sigma(), u.kcut());
  if (m == 0) return u;
  const int K = u.kcut();
  for (const auto& [l, row] : u.table()) {
    AnalyticField::Row nr(row.size());
    bool any = false;
    for (int k = -K; k <= K; ++k) {
      if (k == 0) continue;
      Complex f = std::pow(Complex(0.0, static_cast<double>(k)), m);
      nr[static_cast<std::size_t>(k + K)] = f * row[static_cast<std::size_t>(k + K)];
      any = any || nr[static_cast<std::size_t>(k + K)] != Complex{};
    }
    if (any) r.row_mut(l) = std::move(nr);
  }
  return r;
}

AnalyticField x_average(const AnalyticField& u) {
  AnalyticField r(u.envelope(), u.sigma(), 0);
  for (const auto& [l, row] : u.table()) {
    Complex c = row[static_cast<std::size_t>(u.kcut())];
    if (c != Complex{}) r.set(l, 0, c);
  }
  return r;
}

AnalyticField phi_average(const AnalyticField& u) {
  AnalyticField r(u.envelope(), u.sigma(), u.kcut());
  if (const auto* row = u.row(MultiIndex{})) r.row_mut(MultiIndex{}) = *row;
  return r;
}

Complex full_average(const AnalyticField& u) { return u.coeff(MultiIndex{}, 0); }

PowerSeries PowerSeries::exp() {
  PowerSeries s;
  s.coeff = [](int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f /= i;
    return Complex(f, 0.0);
  };
  s.entire = true;
  s.radius = std::numeric_limits<double>::infinity();
  s.name = "exp";
  return s;
}

PowerSeries PowerSeries::binomial(double p) {
  PowerSeries s;
  s.coeff = [p](int n) {
    double c = 1.0;
    for (int i = 0; i < n; ++i) c *= (p - i) / (i + 1);
    return Complex(c, 0.0);
  };
  // |binom(p, n)| <= max(1, |p|)^? ; for the exponents used here (|p| <= 1) the bound 1 holds
  s.bound_scale = std::max(1.0, std::abs(p));
  s.radius = 1.0;
  s.name = "binomial";
  return s;
}

AnalyticField compose_analytic(const PowerSeries& f, const AnalyticField& u) {
  const auto& tol = default_tolerances();
  const double r = u.norm();
  if (!f.entire && r >= f.radius)
    throw DivergenceError("series argument norm " + format_double(r) + " reaches radius " + format_double(f.radius));

  AnalyticField result = AnalyticField::constant(u.envelope(), u.sigma(), f.coeff(0), u.kcut());
  AnalyticField power = AnalyticField::constant(u.envelope(), u.sigma(), 1.0, u.kcut());
  double rn = 1.0;  // r^n
  double fact = 1.0;
  for (int n = 1; n <= tol.max_terms; ++n) {
    power = product(power, u);
    rn *= r;
    fact *= n;
    Complex a = f.coeff(n);
    if (a != Complex{}) result += power * a;
    // tail bound on sum_{m > n} |a_m| r^m
    double tail;
    if (f.entire) {
      tail = rn * r / (fact * (n + 1)) * std::exp(r);
    } else {
      double q = r / f.radius;
      tail = f.bound_scale * std::pow(q, n + 1) / (1.0 - q);
    }
    if (tail < tol.series * std::max(result.norm(), 1e-300) || power.empty()) {
      result.prune(tol.prune);
      return result;
    }
  }
  throw DivergenceError("power series did not reach tolerance within " + std::to_string(tol.max_terms) + " terms");
}

// ----- diffeomorphisms -----

namespace {

double shift_norm(const TorusDiffeo& d) {
  switch (d.kind) {
    case TorusDiffeo::Kind::ScalarAngle:
      return d.omega.sup_norm() * d.shift.norm();
    case TorusDiffeo::Kind::Spatial:
      return d.shift.norm();
    case TorusDiffeo::Kind::VectorAngle: {
      double m = 0.0;
      for (const auto& [s, a] : d.sites) m = std::max(m, a.norm());
      return m;
    }
  }
  return 0.0;
}

// Taylor sum of sum_n s^n/n! * D^n u, stopping on a relative increment test
template <class Deriv>
AnalyticField taylor_shift(const AnalyticField& u, const AnalyticField& s, Deriv deriv) {
  const auto& tol = default_tolerances();
  AnalyticField result = u;
  AnalyticField du = u;
  AnalyticField pw = AnalyticField::constant(u.envelope(), s.sigma(), 1.0, s.kcut());
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= tol.max_terms; ++n) {
    du = deriv(du);
    pw = product(pw, s) * Complex(1.0 / n, 0.0);
    if (du.empty() || pw.empty()) break;
    AnalyticField term = product(pw, du);
    result += term;
    double tn = term.norm(std::min(term.sigma(), result.sigma()));
    double rn = result.norm();
    if (tn <= tol.compose * std::max(rn, 1e-300) && prev <= tol.compose * 1e3 * std::max(rn, 1e-300)) break;
    if (n > 8 && tn > prev && tn > rn) throw DivergenceError("shift expansion increments grow; shift too large");
    prev = tn;
    if (n == tol.max_terms) throw DivergenceError("shift expansion did not converge");
  }
  result.prune(tol.prune);
  return result;
}

}  // namespace

double TorusDiffeo::contraction_estimate() const {
  if (rho <= 0.0) return std::numeric_limits<double>::infinity();
  return 2.0 * shift_norm(*this) / (std::numbers::e * rho);
}

TorusDiffeo TorusDiffeo::scalar_angle(AnalyticField alpha, const Frequency& omega, double rho) {
  TorusDiffeo d;
  d.kind = Kind::ScalarAngle;
  d.shift = std::move(alpha);
  d.omega = omega;
  d.rho = rho;
  d.contraction = d.contraction_estimate();
  return d;
}

TorusDiffeo TorusDiffeo::vector_angle(std::map<int, AnalyticField> shifts, double rho) {
  TorusDiffeo d;
  d.kind = Kind::VectorAngle;
  d.sites = std::move(shifts);
  d.rho = rho;
  d.contraction = d.contraction_estimate();
  return d;
}

TorusDiffeo TorusDiffeo::spatial(AnalyticField beta, double rho) {
  TorusDiffeo d;
  d.kind = Kind::Spatial;
  d.shift = std::move(beta);
  d.rho = rho;
  d.contraction = d.contraction_estimate();
  return d;
}

AnalyticField compose_x_shift(const AnalyticField& u, const AnalyticField& beta) {
  if (beta.empty()) return u;
  int K = std::max(u.kcut(), beta.kcut());
  AnalyticField uu = u.with_kcut(K);
  return taylor_shift(uu, beta, [](const AnalyticField& v) { return spatial_derivative(v, 1); });
}

AnalyticField compose_angle_shift(const AnalyticField& u, const TorusDiffeo& d) {
  if (d.rho > 0.0 && shift_norm(d) > d.rho * (1.0 + 1e-12))
    throw InversionFailure("angle shift norm " + format_double(shift_norm(d)) + " exceeds width loss " +
                           format_double(d.rho));
  AnalyticField out(u.envelope(), u.sigma(), u.kcut());
  switch (d.kind) {
    case TorusDiffeo::Kind::ScalarAngle: {
      if (d.shift.empty()) {
        out = u;
        break;
      }
      const Frequency& w = d.omega;
      out = taylor_shift(u, d.shift, [&w](const AnalyticField& v) { return omega_derivative(v, w); });
      break;
    }
    case TorusDiffeo::Kind::Spatial:
      out = compose_x_shift(u, d.shift);
      break;
    case TorusDiffeo::Kind::VectorAngle: {
      // sum_l u(l) e^{i l.phi} exp(i l.alpha(phi))
      bool trivial = true;
      for (const auto& [s, a] : d.sites) trivial = trivial && a.empty();
      if (trivial) {
        out = u;
        break;
      }
      for (const auto& [l, row] : u.table()) {
        AnalyticField g(u.envelope(), u.sigma(), 0);
        for (int i = 0; i < l.support_size(); ++i) {
          auto it = d.sites.find(l.site_at(i));
          if (it != d.sites.end()) g += it->second.with_kcut(0) * Complex(0.0, l.value_at(i));
        }
        AnalyticField e = compose_analytic(PowerSeries::exp(), g);
        AnalyticField base(u.envelope(), u.sigma(), u.kcut());
        base.row_mut(l) = row;
        out += product(e, base);
      }
      out.prune(default_tolerances().prune);
      break;
    }
  }
  if (d.rho > 0.0) out = out.with_sigma(std::max(u.sigma() - d.rho, 0.0));
  return out;
}

TorusDiffeo invert_diffeo(const TorusDiffeo& d) {
  const auto& tol = default_tolerances();
  if (!d.certified())
    throw InversionFailure("diffeomorphism contraction estimate " + format_double(d.contraction) +
                           " exceeds 1/2");
  TorusDiffeo inv = d;
  auto apply = [&](const TorusDiffeo& guess) {
    TorusDiffeo g = guess;
    g.rho = 0.0;  // the width loss is tracked on the result, not per iterate
    TorusDiffeo next = d;
    switch (d.kind) {
      case TorusDiffeo::Kind::ScalarAngle:
      case TorusDiffeo::Kind::Spatial:
        next.shift = -compose_angle_shift(d.shift, g);
        break;
      case TorusDiffeo::Kind::VectorAngle:
        for (auto& [s, a] : next.sites) a = -compose_angle_shift(d.sites.at(s), g);
        break;
    }
    return next;
  };
  auto diff = [&](const TorusDiffeo& a, const TorusDiffeo& b) {
    if (d.kind == TorusDiffeo::Kind::VectorAngle) {
      double m = 0.0;
      for (const auto& [s, x] : a.sites) m = std::max(m, (x - b.sites.at(s)).norm());
      return m;
    }
    return (a.shift - b.shift).norm();
  };
  double scale = shift_norm(d);
  if (scale == 0.0) return d;
  // start from -shift
  if (d.kind == TorusDiffeo::Kind::VectorAngle)
    for (auto& [s, a] : inv.sites) a = -a;
  else
    inv.shift = -inv.shift;
  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    TorusDiffeo next = apply(inv);
    double dn = diff(next, inv);
    inv = next;
    if (dn <= tol.fp * scale) {
      inv.contraction = inv.contraction_estimate();
      return inv;
    }
    if (it >= 3 && dn > prev) throw InversionFailure("fixed-point iterates for the inverse diffeomorphism diverge");
    prev = dn;
  }
  throw InversionFailure("fixed-point iteration for the inverse diffeomorphism did not converge");
}

// ----- serialization -----

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  if (b < e && *b == '+') ++b;
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc{} || res.ptr != e) throw ParseError("not a number: '" + s + "'");
  return v;
}

std::string serialize(const AnalyticField& u) {
  std::ostringstream os;
  const auto& env = u.envelope();
  os << "# qpkam-field eta=" << format_double(env.eta) << " sigma=" << format_double(u.sigma())
     << " kcut=" << u.kcut() << " lmax=" << format_double(env.lmax) << " jmax=" << env.jmax << '\n';
  for (const auto& [l, row] : u.table()) {
    for (int k = -u.kcut(); k <= u.kcut(); ++k) {
      const Complex& c = row[static_cast<std::size_t>(k + u.kcut())];
      if (c == Complex{}) continue;
      os << l.to_string() << " | " << k << " | " << format_double(c.real()) << " | " << format_double(c.imag())
         << '\n';
    }
  }
  return os.str();
}

AnalyticField deserialize_field(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line.rfind("# qpkam-field", 0) != 0) throw ParseError("missing field header");
  Envelope env;
  double sigma = 0.0;
  int kcut = 0;
  std::istringstream hs(line.substr(13));
  std::string kv;
  while (hs >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ParseError("bad header token '" + kv + "'");
    std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    if (key == "eta") env.eta = parse_double(val);
    else if (key == "sigma") sigma = parse_double(val);
    else if (key == "kcut") kcut = std::stoi(val);
    else if (key == "lmax") env.lmax = parse_double(val);
    else if (key == "jmax") env.jmax = std::stoi(val);
    else throw ParseError("unknown header key '" + key + "'");
  }
  AnalyticField u(env, sigma, kcut);
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string p;
    while (std::getline(ss, p, '|')) parts.push_back(p);
    if (parts.size() != 4) throw ParseError("line " + std::to_string(lineno) + ": expected 4 fields");
    MultiIndex l = MultiIndex::parse(parts[0]);
    int k = static_cast<int>(parse_double(parts[1]));
    u.set(l, k, Complex(parse_double(parts[2]), parse_double(parts[3])));
  }
  return u;
}

}  // namespace qpkam
