#pragma once

#include <string>
#include <vector>

#include "qpkam/kam.hpp"
#include "qpkam/regularization.hpp"

namespace qpkam {

using ModeVector = std::vector<Complex>;  // coefficients on |k| <= J, index k + J

double l2_norm(const ModeVector& u);
double sobolev_norm(const ModeVector& u, double s);        // sqrt(sum <k>^{2s} |u_k|^2)
double analytic_norm(const ModeVector& u, double sigma);   // sum e^{sigma|k|} |u_k|

ModeVector apply_matrix(const MatrixOperator& A, const ModeVector& u);
MatrixOperator matmul(const MatrixOperator& A, const MatrixOperator& B);

// Operator-norm bounds on the modes |k| <= J
double hs_weighted_bound(const MatrixOperator& A, double s);      // sqrt(|A_w|_1 |A_w|_inf), A_w = <k>^s A <k'>^-s
double analytic_operator_norm(const MatrixOperator& A, double sigma);  // exact l^1_sigma induced norm

// (Phi v)(x) = (1 + beta_x)^{1/2} v(x + beta(x, phi)) as a matrix on |k| <= J, built on an x-grid of `grid` points
MatrixOperator space_diffeo_matrix(const AnalyticField& beta, const std::vector<double>& phi, int J, int grid);

// Galerkin-truncated u_t = L_0(omega t) u on |k| <= J, Strang splitting around the free flow
class DirectEvolver {
 public:
  DirectEvolver(const SchrodingerInput& in, int J);
  ModeVector run(const ModeVector& u0, double t0, double t1, double dt) const;

 private:
  MatrixOperator perturbation(const std::vector<double>& phi) const;  // i eps (V2 d^2 + V1 d + V0)
  SchrodingerInput in_;
  int J_;
};

// u(t) = Phi_1(omega t) W'(omega tau) exp(i (tau - tau_0) D_inf) z_0, tau = t + alpha(omega t)
class ReducedFlow {
 public:
  ReducedFlow(const RegularizedForm& rf, const KamResult& kam, int grid = 0);

  // W'(theta) = Phi_3 Phi_4 Phi_5 Phi_6 Phi_7 Psi and its inverse, restricted to |k| <= J
  MatrixOperator chain(const std::vector<double>& theta) const;
  MatrixOperator chain_inverse(const std::vector<double>& theta) const;
  MatrixOperator phi1(double t) const;
  MatrixOperator phi1_inverse(double t) const;
  double tau(double t) const;
  std::vector<double> angles(double s) const;  // omega * s

  // full W(t) and W(t)^{-1}
  MatrixOperator W(double t) const;
  MatrixOperator W_inverse(double t) const;

  ModeVector initial_reduced(const ModeVector& u0) const;  // z(tau_0)
  ModeVector solution(const ModeVector& z0, double t) const;
  // exp(i s D_inf) as a matrix
  MatrixOperator block_flow(double s) const;

  int J() const { return J_; }

 private:
  const RegularizedForm* rf_;
  const KamResult* kam_;
  int J_;
  int grid_;
  QPOperator Mexp_ip_, Mexp_mip_;
};

struct TraceRow {
  double t = 0.0;
  double l2 = 0.0, h1 = 0.0, h2 = 0.0;
  double analytic = 0.0;  // analytic norm at the trace sigma
  double ratio = 0.0;     // analytic(t) / analytic(0)
};

struct EvolutionOptions {
  double T = 50.0;
  double dt = 1e-3;
  double sample_dt = 0.5;
  double analytic_sigma = 0.2;
  bool richardson = true;
};

struct EvolutionReport {
  std::vector<TraceRow> trace;
  double discrepancy_l2 = 0.0;     // max over samples |u_direct - u_reduced|
  double budget = 0.0;
  double richardson = 0.0;
  double roundtrip = 0.0;          // |u0 - W(0) W(0)^-1 u0|
  double generator_term = 0.0;
  double tail = 0.0;
  double C_W_l2 = 0.0, C_W_h1 = 0.0, C_W_analytic = 0.0;  // sup |W| * sup |W^-1|
  double max_h1_ratio = 0.0, max_analytic_ratio = 0.0;
  double block_flow_l1 = 0.0;      // sup |exp(i s D_inf)| on l^1_sigma
};

// smooth normalized initial datum u_k ~ e^{-|k|/2} with fixed phases
ModeVector default_initial_datum(int J);

EvolutionReport evolve_compare(const SchrodingerInput& in, const RegularizedForm& rf, const KamResult& kam,
                               const ModeVector& u0, const EvolutionOptions& opt, double generator_residual);

// epsilon = 0: max relative drift of the l2, h1 and analytic norms
double free_flow_drift(int J, double T, double dt);

std::string trace_csv(const std::vector<TraceRow>& rows);

}  // namespace qpkam
