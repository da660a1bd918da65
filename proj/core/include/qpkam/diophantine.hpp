#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "qpkam/multi_index.hpp"

namespace qpkam {

// All l with 0 < |l|_eta <= L supported on `sites`, in lexicographic order of (l_{s_1}, l_{s_2}, ...).
std::vector<MultiIndex> enumerate_indices(double L, const std::vector<int>& sites, double eta = 1.0);

// prod_n (1 + |l_n|^mu2 <n>^mu1)
double site_weight_product(const MultiIndex& l, double mu1, double mu2);
// d(l) = prod_n (1 + |l_n|^4 <n>^4)
double melnikov_weight(const MultiIndex& l);

struct DiophantineVerdict {
  bool pass = true;
  MultiIndex worst;
  double worst_ratio = std::numeric_limits<double>::infinity();  // |omega.l| prod(...) / gamma
};

DiophantineVerdict check_diophantine(const Frequency& omega, double gamma, double mu, double L, double eta = 1.0);

// Counter-addressed uniform doubles: stream (seed, stream, block) -> mt19937_64 via seed_seq.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block);
  double uniform();  // [0, 1) from the top 53 bits

 private:
  std::mt19937_64 engine_;
};

// Unperturbed (epsilon = 0) or run-supplied eigenvalues mu_j^{(+/-)} for the Melnikov sets.
struct MelnikovSpectrum {
  int jmax = 0;
  std::vector<double> mu_plus;   // index j
  std::vector<double> mu_minus;  // index j (mu_minus[0] == mu_plus[0])
  static MelnikovSpectrum unperturbed(int jmax);
};

struct MeasureRow {
  double gamma = 0.0;
  std::int64_t samples = 0;
  std::int64_t failing = 0;           // Diophantine or Melnikov failure
  std::int64_t failing_diophantine = 0;
  double fraction = 0.0;
  double stderr_ = 0.0;
};

struct MeasureOptions {
  int d = 3;
  double L = 4.0;
  double mu = 2.0;
  double eta = 1.0;
  std::int64_t samples = 10000;
  std::uint64_t seed = 1;
  bool melnikov = true;
  std::optional<MelnikovSpectrum> spectrum;  // defaults to the unperturbed one
};

std::vector<MeasureRow> measure_monte_carlo(const std::vector<double>& gammas, const MeasureOptions& opt);

// d = 1 exact failing length in [1, 2] (interval union); unperturbed Melnikov sets included when requested
double measure_exact_1d(double gamma, double L, double mu, bool melnikov, int jmax = 64);

// ----- small divisor bounds -----

struct SmallDivisorSup {
  double measured = 0.0;
  MultiIndex argmax;
  double bound = 0.0;
  double tau = 0.0;
};

// max over |l|_eta <= L (and l = 0) of prod(1 + <i>^mu1 |l_i|^mu2) e^{-rho |l|_eta}
std::pair<double, MultiIndex> small_divisor_measured(double rho, double mu1, double mu2, double L,
                                                     const std::vector<int>& sites, double eta = 1.0);
// exp((tau / rho^{1/eta}) ln(tau / rho))
double small_divisor_bound(double rho, double tau, double eta = 1.0);
// smallest power of two tau making the bound hold on the reference radii
double calibrate_tau(double mu1, double mu2, double L, const std::vector<int>& sites, double eta,
                     const std::vector<double>& reference_rho);
SmallDivisorSup small_divisor_sup(double rho, double mu1, double mu2, double L, const std::vector<int>& sites,
                                  double tau, double eta = 1.0);

// cutoff variant: max over |l|_eta <= N of prod(...) against (1 + N)^{C N^{1/(1+eta)}}
struct CutoffCheck {
  double N = 0.0;
  double measured = 0.0;
  double bound = 0.0;
  double C = 0.0;
};
std::vector<CutoffCheck> small_divisor_cutoff(const std::vector<double>& Ns, double mu1, double mu2,
                                              const std::vector<int>& sites, double eta = 1.0);

struct SeriesPartial {
  double L = 0.0;
  std::size_t terms = 0;
  double partial_sum = 0.0;
  double increment = 0.0;
};
// partial sums of sum ||l||_1^2 / prod(1 + |l_n|^mu2 <n>^mu1) over sites 1..L^{1/eta}
std::vector<SeriesPartial> series_convergence_check(double mu1, double mu2, const std::vector<double>& L_schedule,
                                                    double eta = 1.0);

}  // namespace qpkam
