#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qpkam/fourier.hpp"

namespace qpkam {

// Pi_j R Pi_j' for the clusters E_j = span{e^{ijx}, e^{-ijx}} (E_0 = constants).
// Row/column order within a cluster is (k = +j, k = -j).
struct Block {
  int j = 0;
  int jp = 0;
  int rows = 1;
  int cols = 1;
  std::array<Complex, 4> e{};

  Block() = default;
  Block(int j_, int jp_);
  static Block diag(int j, double a, double b);

  Complex& operator()(int r, int c) { return e[static_cast<std::size_t>(2 * r + c)]; }
  const Complex& operator()(int r, int c) const { return e[static_cast<std::size_t>(2 * r + c)]; }

  double hs_norm() const;
  Block adjoint() const;
  Complex trace() const;
  bool is_hermitian(double tol = 1e-12) const;
  Block operator*(const Block& o) const;
  Block operator+(const Block& o) const;
  Block operator-(const Block& o) const;
  Block operator*(Complex c) const;
};

// eigenvalues ascending; vectors stored column-wise (vectors[2*r + c] is component r of vector c)
struct BlockEigen {
  int n = 1;
  std::array<double, 2> values{};
  std::array<Complex, 4> vectors{};
};

std::vector<double> block_eigs(const Block& a);
BlockEigen block_eigensystem(const Block& a);

// 1 / min |omega.l + lambda_i(Dj) - mu_k(Dj')|; nullopt when the minimum is exactly 0
std::optional<double> melnikov_inverse_norm(double omega_dot_l, const Block& dj, const Block& djp);

// Dense matrix on spatial modes k in [-J, J]; the B^{sigma,m} norm reads it through cluster blocks.
class MatrixOperator {
 public:
  MatrixOperator() = default;
  explicit MatrixOperator(int J);
  static MatrixOperator identity(int J);

  int J() const { return J_; }
  int dim() const { return 2 * J_ + 1; }
  Complex& operator()(int k, int kp) { return a_[static_cast<std::size_t>((k + J_) * dim() + kp + J_)]; }
  const Complex& operator()(int k, int kp) const { return a_[static_cast<std::size_t>((k + J_) * dim() + kp + J_)]; }
  const std::vector<Complex>& data() const { return a_; }
  std::vector<Complex>& data() { return a_; }

  Block block(int j, int jp) const;
  void set_block(const Block& b);
  void add_block(const Block& b);

  double hs_norm() const;
  double mass() const;  // sum |a_kk'|
  double max_abs() const;
  bool is_zero() const;
  int bandwidth() const;
  MatrixOperator adjoint() const;

  MatrixOperator& operator+=(const MatrixOperator& o);
  MatrixOperator& operator-=(const MatrixOperator& o);
  MatrixOperator& operator*=(Complex c);

  // C += A * B using the stored bandwidths
  static void multiply_add(const MatrixOperator& A, int bandA, const MatrixOperator& B, int bandB, MatrixOperator& C,
                           Complex scale = 1.0);

 private:
  int J_ = 0;
  std::vector<Complex> a_;
};

double bsm_norm(const MatrixOperator& R, double s, double m);

struct OperatorTolerances {
  double pair_skip = 1e-18;  // relative to the largest product of masses
  double prune = 1e-20;      // entries below prune * max entry are dropped
  double series = 1e-14;
  int max_lie_terms = 40;
};
OperatorTolerances& operator_tolerances();

// phi-dependent operator, l -> MatrixOperator.
class QPOperator {
 public:
  using Table = std::map<MultiIndex, MatrixOperator>;

  QPOperator() = default;
  QPOperator(const Envelope& env, double sigma, int J, double order = 0.0);

  static QPOperator identity(const Envelope& env, double sigma, int J);
  // d_x^m on modes; d_x^{-1} annihilates k = 0
  static QPOperator derivative(const Envelope& env, double sigma, int J, int m);
  static QPOperator constant(const MatrixOperator& m, const Envelope& env, double sigma);

  const Envelope& envelope() const { return env_; }
  double sigma() const { return sigma_; }
  double order() const { return order_; }
  int J() const { return J_; }
  void set_sigma(double s) { sigma_ = s; }
  void set_order(double m) { order_ = m; }
  const Table& table() const { return table_; }
  bool empty() const { return table_.empty(); }
  std::size_t size() const { return table_.size(); }

  const MatrixOperator* find(const MultiIndex& l) const;
  MatrixOperator& at(const MultiIndex& l);  // creates a zero entry
  void erase_zeros();
  void prune(double rel);

  // |R|_{s,m} = sum_l e^{s|l|_eta} ||R(l)||_{B^{s,m}}
  double decay_norm(double s, double m) const;
  double decay_norm() const { return decay_norm(sigma_, order_); }
  double max_abs() const;

  QPOperator adjoint() const;  // R*(l) = R(-l)^H
  // max_l ||R(l)^H + R(-l)||_HS ; zero exactly when R(phi) is skew-adjoint for real phi
  double skew_defect() const;
  double self_adjoint_defect() const;

  MatrixOperator evaluate(const std::vector<double>& phi) const;

  QPOperator& operator+=(const QPOperator& o);
  QPOperator& operator-=(const QPOperator& o);
  QPOperator& operator*=(Complex c);
  friend QPOperator operator+(QPOperator a, const QPOperator& b) { return a += b; }
  friend QPOperator operator-(QPOperator a, const QPOperator& b) { return a -= b; }
  friend QPOperator operator*(QPOperator a, Complex c) { return a *= c; }
  friend QPOperator operator*(Complex c, QPOperator a) { return a *= c; }

 private:
  void check_compatible(const QPOperator& o) const;

  Envelope env_;
  double sigma_ = 1.0;
  int J_ = 0;
  double order_ = 0.0;
  Table table_;
};

QPOperator op_compose(const QPOperator& R, const QPOperator& Q);
QPOperator operator*(const QPOperator& R, const QPOperator& Q);
QPOperator commutator(const QPOperator& A, const QPOperator& B);
QPOperator op_omega_derivative(const QPOperator& R, const Frequency& omega);
std::pair<QPOperator, QPOperator> project_ultraviolet(const QPOperator& R, double N);
// [R(0)]: the l = 0, j = j' blocks
QPOperator block_diagonal_part(const QPOperator& R);

// matrix entries (M_a)_{k k'}(l) = a_{k - k'}(l)
QPOperator multiplication_operator(const AnalyticField& a, int J);

// (R u)(x, phi) on the modes |k| <= J
AnalyticField apply(const QPOperator& R, const AnalyticField& u);

struct PdoExpansion {
  std::vector<std::pair<AnalyticField, int>> terms;  // (symbol, power of d_x)
  QPOperator remainder;
  QPOperator full;
  QPOperator assemble(int J) const;  // sum of homogeneous terms as an operator
};

// generalized binomial coefficient of the Taylor expansion of j^m about j'
double pdo_coefficient(int i, int m);

// d_x^m a d_x^{m'} = sum_{i < N} c_{i,m} (d_x^i a) d_x^{m + m' - i} + R_N
PdoExpansion pdo(const AnalyticField& a, int m, int mp, int N, int J);
// [a d_x^m, b d_x^{m'}]
PdoExpansion commutator_expand(const AnalyticField& a, int m, const AnalyticField& b, int mp, int N, int J);

struct ExponentialResult {
  QPOperator phi;   // exp(F)
  int terms = 0;
  double smallness = 0.0;  // rho^{-2} |F|
};

// Smallness is checked as rho^{-2} |F|_{sigma(F), 0} <= delta, with F's declared width playing sigma + rho.
ExponentialResult op_exponential(const QPOperator& F, double rho = 0.5, double delta = 0.1);

// Phi^{-1} L Phi - Phi^{-1} (omega . d_phi Phi)
QPOperator conjugate_pushforward(const QPOperator& L, const QPOperator& phi, const QPOperator& phi_inv,
                                 const Frequency& omega);

// Lie-series pushforward by exp(G): sum_k ad^k L / k! - sum_k ad^k (omega.dG) / (k+1)!, ad X = [X, G]
QPOperator lie_pushforward(const QPOperator& L, const QPOperator& G, const Frequency& omega);

// Increment of the Lie-series pushforward for L = diag(d_k) + rest:
// e^{-G} L e^{G} - e^{-G} (omega.d e^{G}) - L. The diagonal commutator is formed entrywise as
// (d_k - d_k') G_kk', so large diagonal symbols never enter a subtraction.
QPOperator lie_increment(const std::vector<Complex>& diag, const QPOperator& rest, const QPOperator& G,
                         const Frequency& omega);
// [diag(d), X]
QPOperator diag_commutator(const std::vector<Complex>& diag, const QPOperator& X);
// sub-matrix on |k| <= J
QPOperator restrict_to(const QPOperator& R, int J);
QPOperator diagonal_operator(const std::vector<Complex>& diag, const Envelope& env, double sigma);

// ----- block diagonal operators -----

class BlockDiag {
 public:
  BlockDiag() = default;
  explicit BlockDiag(int J);

  int J() const { return static_cast<int>(blocks_.size()) - 1; }
  const Block& operator[](int j) const { return blocks_.at(static_cast<std::size_t>(j)); }
  Block& operator[](int j) { return blocks_.at(static_cast<std::size_t>(j)); }

  MatrixOperator to_matrix() const;
  QPOperator to_operator(const Envelope& env, double sigma) const;
  static BlockDiag from_matrix(const MatrixOperator& m);

  double max_hermitian_defect() const;

  // symbolic phase: lambda_2, lambda_1, lambda_0, lambda_{-1}
  std::optional<std::array<double, 4>> symbols;

 private:
  std::vector<Block> blocks_;
};

std::string dump_operator(const QPOperator& R);

}  // namespace qpkam
