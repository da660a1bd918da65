#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "qpkam/operator.hpp"

namespace qpkam {

struct KamOptions {
  double chi = 1.5;
  double N0 = 8.0;
  double stop = 1e-12;       // relative to the initial remainder norm; 0 runs n_max steps
  int n_max = 8;
  double gamma = 0.05;
  bool check_melnikov = true;
  double exp_rho_factor = 0.5;  // smallness of exp(F_n) is certified with rho = factor * sigma_n
  double exp_delta = 0.1;
};

// sigma_n = sigma_0 (1 - (1/4pi) sum_{j <= n} j^-2)
double kam_width(double sigma0, int n);
// N_n = <n>^3 chi^n N_0
double kam_cutoff(const KamOptions& opt, int n);

struct KamIterate {
  int n = 0;
  double sigma_n = 0.0;
  double N_n = 0.0;
  double P_norm = 0.0;        // |P_n|_{sigma_n, -2}
  double D_shift_max = 0.0;   // max_j ||D_{n+1}(j) - D_n(j)||_HS
  double F_norm = 0.0;
  double worst_melnikov = 0.0;  // max ||O^-1|| / threshold over the solved blocks
  int exp_terms = 0;
  double wall_ms = 0.0;
};

struct MelnikovReport {
  bool pass = true;
  double worst_ratio = 0.0;
  MultiIndex l;
  int j = 0, jp = 0;
  double inverse_norm = 0.0;
  double bound = 0.0;
};

// Thresholds: d(l)/gamma for j != j', d(l)<j>^2/gamma for j = j' and l != 0, d(l) = prod (1 + |l_n|^4 <n>^4).
// Checked on every block of P with |l| <= N that the homological equation has to invert.
MelnikovReport melnikov_check(const BlockDiag& D, const QPOperator& P, const Frequency& omega, double N,
                              double gamma);

// F with [iD, F] - omega.dF + Pi_N P = [P(0)] (the l = 0 diagonal blocks), solved in the block eigenbases
QPOperator solve_homological_block(const BlockDiag& D, const QPOperator& P, const Frequency& omega, double N);

// [P(0)]/i as hermitian blocks
BlockDiag diagonal_blocks_over_i(const QPOperator& P);

// everything except the l = 0, j = j' blocks
QPOperator off_block_diagonal(const QPOperator& P);

struct KamInput {
  BlockDiag D0;
  QPOperator P0;
  Frequency omega;
  double sigma0 = 0.5;
};

struct KamResult {
  BlockDiag D_inf;
  QPOperator P_final;
  QPOperator Psi, Psi_inv;   // products of exp(F_n) and the reversed product of exp(-F_n)
  std::vector<KamIterate> log;
  std::vector<QPOperator> generators;
  bool converged = false;
  int steps = 0;
};

// Throws MelnikovFailure when a required block is not invertible within its threshold.
KamResult kam_iterate(const KamInput& in, const KamOptions& opt);

struct ConjugationCheck {
  double initial_offdiag = 0.0;  // |P_0 off-block-diagonal|_{sigma, 0}
  double residual_offdiag = 0.0; // of Psi^-1 L_0 Psi - Psi^-1 omega.dPsi - i D_inf
  double residual_diag = 0.0;
  double unitarity = 0.0;        // |Psi^* Psi - I|
  double inverse_defect = 0.0;   // |Psi_inv Psi - I|
};
ConjugationCheck check_conjugation(const KamInput& in, const KamResult& res);

// Spectrum of D_inf: mu^{(+)}_j, mu^{(-)}_j labeled by overlap with the (k = j, k = -j) basis.
struct SpectrumRow {
  int j = 0;
  double mu_plus = 0.0;
  double mu_minus = 0.0;
};
std::vector<SpectrumRow> block_spectrum(const BlockDiag& D);

// Least-squares fit of mu^{(+/-)}_j = -l2 j^2 +/- l1 j + l0 -/+ l_{-1}/j over j in [j_lo, j_hi]
// (block convention: eigenvalues near -j^2). Residuals are reported for every j >= 1.
struct SpectrumFit {
  std::array<double, 4> lambdas{};
  std::vector<int> j;
  std::vector<double> residual_plus, residual_minus;
};
SpectrumFit fit_spectrum(const std::vector<SpectrumRow>& rows, int j_lo, int j_hi);

// D_0 built from the normal-form eigenvalues mu_k on |k| <= J
BlockDiag normal_form_blocks(const std::vector<double>& mu, int J);

// geometric mean of log|P_{n+1}| / log|P_n| over n in [n_lo, n_hi)
double convergence_exponent(const std::vector<KamIterate>& log, int n_lo, int n_hi);

std::string kam_log_json_line(const KamIterate& it, bool with_timing);

}  // namespace qpkam
