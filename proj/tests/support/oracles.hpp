#pragma once

// Shared helpers for the test suites: random instances and dense Eigen oracles.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "qpkam/fourier.hpp"
#include "qpkam/operator.hpp"
#include "qpkam/regularization.hpp"

namespace qpkam::testing {

using Mat = Eigen::MatrixXcd;

inline Mat to_eigen(const MatrixOperator& A) {
  const int n = A.dim();
  Mat M(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) M(r, c) = A.data()[static_cast<std::size_t>(r * n + c)];
  return M;
}

inline MatrixOperator from_eigen(const Mat& M) {
  const int J = (static_cast<int>(M.rows()) - 1) / 2;
  MatrixOperator A(J);
  for (int r = 0; r < M.rows(); ++r)
    for (int c = 0; c < M.cols(); ++c) A.data()[static_cast<std::size_t>(r * M.cols() + c)] = M(r, c);
  return A;
}

// sum_l (i omega.l) R(l) e^{i l.phi}, evaluated straight from the table
inline Mat omega_derivative_at(const QPOperator& R, const Frequency& omega, const std::vector<double>& phi) {
  const int n = 2 * R.J() + 1;
  Mat out = Mat::Zero(n, n);
  for (const auto& [l, M] : R.table()) {
    double arg = 0.0;
    for (int i = 0; i < l.support_size(); ++i) arg += l.value_at(i) * phi[static_cast<std::size_t>(l.site_at(i) - 1)];
    out += Complex(0.0, omega.dot(l)) * std::polar(1.0, arg) * to_eigen(M);
  }
  return out;
}

class Random {
 public:
  explicit Random(unsigned seed) : g_(seed) {}
  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(g_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(g_); }
  Complex complex(double scale) { return {uniform(-scale, scale), uniform(-scale, scale)}; }

  MultiIndex index(int d, int maxabs) {
    MultiIndex l;
    for (int s = 1; s <= d; ++s) l.set(s, integer(-maxabs, maxabs));
    return l;
  }

  // sparse field with `terms` random coefficients inside the envelope
  AnalyticField field(const Envelope& env, double sigma, int kcut, int d, int terms, double scale, int maxabs = 2) {
    AnalyticField u(env, sigma, kcut);
    for (int t = 0; t < terms; ++t) {
      MultiIndex l = index(d, maxabs);
      if (!env.admits(l)) continue;
      u.add(l, integer(-kcut, kcut), complex(scale));
    }
    return u;
  }

  // real-on-real version: adds the conjugate partner of every coefficient
  AnalyticField real_field(const Envelope& env, double sigma, int kcut, int d, int terms, double scale,
                           int maxabs = 2) {
    AnalyticField u(env, sigma, kcut);
    for (int t = 0; t < terms; ++t) {
      MultiIndex l = index(d, maxabs);
      if (!env.admits(l)) continue;
      const int k = integer(-kcut, kcut);
      const Complex c = complex(scale);
      u.add(l, k, c);
      u.add(-l, -k, std::conj(c));
    }
    return u;
  }

  // random operator with `terms` nonzero time-Fourier labels, each a dense random matrix
  QPOperator op(const Envelope& env, double sigma, int J, int d, int terms, double scale, int maxabs = 1) {
    QPOperator R(env, sigma, J);
    for (int t = 0; t < terms; ++t) {
      MultiIndex l = index(d, maxabs);
      if (!env.admits(l)) continue;
      MatrixOperator& M = R.at(l);
      for (int k = -J; k <= J; ++k)
        for (int kp = -J; kp <= J; ++kp) M(k, kp) += complex(scale) * std::exp(-0.5 * std::abs(k - kp));
    }
    return R;
  }

  std::vector<double> angles(int d) {
    std::vector<double> phi;
    for (int i = 0; i < d; ++i) phi.push_back(uniform(0.0, 2.0 * M_PI));
    return phi;
  }

 private:
  std::mt19937_64 g_;
};

// Test potential: same shape as configs/reference.json, amplitudes scaled by `amp`.
inline SchrodingerInput reference_input(double eps, double lmax = 10.0, double amp = 1.0,
                                        std::vector<double> omega = {1.2360679774997896, 1.4142135623730951}) {
  Envelope env{1.0, lmax, 96};
  const int d = static_cast<int>(omega.size());
  std::vector<int> sites;
  for (int i = 1; i <= d; ++i) sites.push_back(i);
  Frequency om(sites, omega, std::sqrt(eps), 2.0);
  const double sb = 1.0;
  const MultiIndex l1 = MultiIndex::unit(1), l2 = d > 1 ? MultiIndex::unit(2) : MultiIndex::unit(1, 2);
  AnalyticField V2(env, sb, 3), w1(env, sb, 3), w0(env, sb, 3);
  auto addc = [](AnalyticField& f, const MultiIndex& l, int k, Complex c) {
    f.add(l, k, c);
    f.add(-l, -k, std::conj(c));
  };
  V2.add(MultiIndex{}, 0, 0.15 * amp);
  addc(V2, l1, 1, 0.125 * amp);
  addc(V2, l2, -2, 0.075 * amp);
  w1.add(MultiIndex{}, 0, 0.2 * amp);
  addc(w1, l1 + l2, 1, 0.05 * amp);
  addc(w1, l2, 0, 0.1 * amp);
  w0.add(MultiIndex{}, 0, 0.25 * amp);
  addc(w0, l1, 2, 0.15 * amp);
  addc(w0, MultiIndex{}, 1, 0.125 * amp);
  return SchrodingerInput::complete(env, om, eps, sb, V2, w1, w0);
}

}  // namespace qpkam::testing
