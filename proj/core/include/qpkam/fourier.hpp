#pragma once

#include <complex>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qpkam/errors.hpp"
#include "qpkam/multi_index.hpp"

namespace qpkam {

using Complex = std::complex<double>;

struct FourierTolerances {
  double prune = 1e-16;     // relative, weighted
  double pair_skip = 1e-18; // relative, product of row masses
  double compose = 1e-14;
  double series = 1e-14;
  double fp = 1e-13;
  int max_terms = 400;
};

FourierTolerances& default_tolerances();

// Function of (x, phi) stored as l -> dense spatial row over k in [-kcut, kcut].
// kcut == 0 is a function of phi alone; AnalyticScalar is that special case.
class AnalyticField {
 public:
  using Row = std::vector<Complex>;
  using Table = std::map<MultiIndex, Row>;

  AnalyticField() = default;
  AnalyticField(const Envelope& env, double sigma, int kcut = 0);

  static AnalyticField constant(const Envelope& env, double sigma, Complex c, int kcut = 0);
  static AnalyticField monomial(const Envelope& env, double sigma, const MultiIndex& l, int k, Complex c,
                                int kcut = 0);

  const Envelope& envelope() const { return env_; }
  double sigma() const { return sigma_; }
  int kcut() const { return kcut_; }
  bool is_scalar() const { return kcut_ == 0; }
  const Table& table() const { return table_; }
  bool empty() const { return table_.empty(); }
  std::size_t size() const { return table_.size(); }

  Complex coeff(const MultiIndex& l, int k = 0) const;
  void add(const MultiIndex& l, int k, Complex c);
  void set(const MultiIndex& l, int k, Complex c);
  const Row* row(const MultiIndex& l) const;
  Row& row_mut(const MultiIndex& l);

  AnalyticField with_sigma(double s) const;
  AnalyticField with_kcut(int k) const;

  // sum_{l,k} e^{s(|l|_eta + |k|)} |u_k(l)|
  double norm(double s) const;
  double norm() const { return norm(sigma_); }
  double max_abs() const;

  // u_{-k}(-l) = conj(u_k(l)) up to tol * max_abs
  bool is_real(double tol = 1e-13) const;
  double reality_defect() const;
  // coefficients of conj(u(x, phi)) for real arguments
  AnalyticField conj() const;

  // phi indexed by site - 1; missing sites read as 0
  Complex evaluate(double x, const std::vector<double>& phi) const;

  void prune(double rel);

  AnalyticField& operator+=(const AnalyticField& o);
  AnalyticField& operator-=(const AnalyticField& o);
  AnalyticField& operator*=(Complex c);

  friend AnalyticField operator+(AnalyticField a, const AnalyticField& b) { return a += b; }
  friend AnalyticField operator-(AnalyticField a, const AnalyticField& b) { return a -= b; }
  friend AnalyticField operator*(AnalyticField a, Complex c) { return a *= c; }
  friend AnalyticField operator*(Complex c, AnalyticField a) { return a *= c; }
  AnalyticField operator-() const;

 private:
  void check_compatible(const AnalyticField& o) const;
  int idx(int k) const { return k + kcut_; }

  Envelope env_;
  double sigma_ = 1.0;
  int kcut_ = 0;
  Table table_;
};

using AnalyticScalar = AnalyticField;

double norm_sigma(const AnalyticField& u, double s);

AnalyticField product(const AnalyticField& a, const AnalyticField& b);
AnalyticField operator*(const AnalyticField& a, const AnalyticField& b);

std::pair<AnalyticField, AnalyticField> project_ultraviolet(const AnalyticField& u, double N);

AnalyticField omega_derivative(const AnalyticField& u, const Frequency& omega);

// (omega . d_phi)^{-1}; every l = 0 coefficient must vanish
AnalyticField solve_homological_scalar(const AnalyticField& f, const Frequency& omega);

AnalyticField spatial_derivative(const AnalyticField& u, int m);

// x-average (k = 0 row) as a scalar; phi-average (l = 0) as a field
AnalyticField x_average(const AnalyticField& u);
AnalyticField phi_average(const AnalyticField& u);
Complex full_average(const AnalyticField& u);

// ----- analytic functions of a series -----

struct PowerSeries {
  std::function<Complex(int)> coeff;
  double radius = 1.0;
  // |a_n| <= bound_scale * radius^{-n}; for entire functions bound_scale is unused
  double bound_scale = 1.0;
  bool entire = false;
  std::string name;

  static PowerSeries exp();
  // (1 + z)^p about 0
  static PowerSeries binomial(double p);
  static PowerSeries inv_one_plus() { return binomial(-1.0); }
};

AnalyticField compose_analytic(const PowerSeries& f, const AnalyticField& u);

// ----- diffeomorphisms of the torus -----

struct TorusDiffeo {
  enum class Kind {
    ScalarAngle,  // phi -> phi + omega * alpha(phi), alpha a scalar
    VectorAngle,  // phi_n -> phi_n + alpha_n(phi)
    Spatial       // x -> x + beta(x, phi)
  };
  Kind kind = Kind::ScalarAngle;
  AnalyticField shift;                 // alpha or beta
  std::map<int, AnalyticField> sites;  // VectorAngle components
  Frequency omega;                     // ScalarAngle only
  double rho = 0.0;                    // width loss budgeted at construction
  double contraction = 0.0;            // certificate computed at construction

  static TorusDiffeo scalar_angle(AnalyticField alpha, const Frequency& omega, double rho);
  static TorusDiffeo vector_angle(std::map<int, AnalyticField> shifts, double rho);
  static TorusDiffeo spatial(AnalyticField beta, double rho);

  // Lipschitz constant bound for the fixed-point map, 2 ||shift||_sigma' / (e rho)
  double contraction_estimate() const;
  bool certified() const { return contraction <= 0.5; }
};

// u(phi + shift) or u(x + beta, phi), truncated when the increment's norm falls below compose_tol
AnalyticField compose_angle_shift(const AnalyticField& u, const TorusDiffeo& d);
AnalyticField compose_x_shift(const AnalyticField& u, const AnalyticField& beta);

// Fixed point of u -> -shift(id + u). Rejects the shift when the contraction certificate fails.
TorusDiffeo invert_diffeo(const TorusDiffeo& d);

// ----- serialization -----

std::string serialize(const AnalyticField& u);
AnalyticField deserialize_field(const std::string& text);
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace qpkam
