#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qpkam/regularization.hpp"

namespace qpkam {

// One Fourier coefficient c e^{i(l.phi + kx)}; l is dense over sites 1..d.
struct ModeEntry {
  std::vector<int> l;
  int k = 0;
  Complex c;
};

struct PotentialTables {
  std::vector<ModeEntry> V2;
  // either the free parts W1, W0 (completed to a self-adjoint operator) or V1, V0 given directly
  std::vector<ModeEntry> W1, W0;
  std::vector<ModeEntry> V1, V0;
  bool direct = false;
};

struct RunConfig {
  int d = 2;
  std::vector<double> omega;        // empty: sampled uniformly in [omega_lo, omega_hi]^d from the seed
  double omega_lo = 1.0, omega_hi = 2.0;
  double epsilon = 1e-3;
  std::optional<double> gamma;      // default epsilon^0.5
  double mu = 2.0;
  double eta = 1.0;
  double sigma_bar = 1.0;
  int jmax = 32;
  double lmax = 10.0;
  int pad = 8;

  double chi = 1.5;
  double N0 = 8.0;
  double stop = 1e-12;
  int n_max = 8;

  double T = 10.0;
  double dt = 1e-3;
  double sample_dt = 0.5;
  double analytic_sigma = 0.2;

  std::vector<double> measure_gammas{0.1, 0.05, 0.025};
  int measure_sites = 3;
  double measure_lmax = 4.0;
  std::int64_t measure_samples = 10000;

  std::uint64_t seed = 1;
  std::string out_dir = "out";

  PotentialTables potential;

  double gamma_value() const;
};

// Throws ConfigError naming the line (syntax errors) or the field path (schema errors).
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Normalized JSON echo of the configuration, stable under reformatting of the input.
std::string config_echo(const RunConfig& cfg);

struct BuiltInput {
  SchrodingerInput input;
  bool symmetry_completed = false;  // conjugate partners were added or the free parts were completed
  std::vector<std::string> notes;
};

// Resolves omega (sampling it if needed) and builds the operator coefficients.
BuiltInput build_input(const RunConfig& cfg);
Frequency resolve_omega(const RunConfig& cfg);

}  // namespace qpkam
