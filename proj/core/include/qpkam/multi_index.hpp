#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace qpkam {

// <n> := max(1, |n|)
inline double japanese(double n) { return n < 0 ? (-n > 1 ? -n : 1.0) : (n > 1 ? n : 1.0); }

// Finitely supported integer vector over the sites n >= 1. Entries are kept
// sorted by site with no stored zeros, so defaulted comparison is a total order.
class MultiIndex {
 public:
  static constexpr int kMaxSupport = 8;

  MultiIndex() = default;
  static MultiIndex unit(int site, int value = 1);
  static MultiIndex from_pairs(const std::vector<std::pair<int, int>>& pairs);

  int operator[](int site) const;
  void set(int site, int value);

  int support_size() const { return nnz_; }
  int site_at(int i) const { return sites_[static_cast<std::size_t>(i)]; }
  int value_at(int i) const { return values_[static_cast<std::size_t>(i)]; }

  bool is_zero() const { return nnz_ == 0; }
  MultiIndex operator+(const MultiIndex& o) const;
  MultiIndex operator-(const MultiIndex& o) const;
  MultiIndex operator-() const;

  // |l|_eta = sum <n>^eta |l_n|
  double weight(double eta) const;
  int l1() const;

  // "1:2,3:-1" ; the zero index prints as "0"
  std::string to_string() const;
  static MultiIndex parse(const std::string& text);

  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;
  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;

 private:
  std::int32_t nnz_ = 0;
  std::array<std::int32_t, kMaxSupport> sites_{};
  std::array<std::int32_t, kMaxSupport> values_{};
};

struct MultiIndexHash {
  std::size_t operator()(const MultiIndex& m) const noexcept;
};

// Truncation envelope shared by every object in a run.
struct Envelope {
  double eta = 1.0;
  double lmax = 8.0;   // |l|_eta <= lmax
  int jmax = 32;       // |k| <= jmax for spatial modes

  bool admits(const MultiIndex& l) const { return l.weight(eta) <= lmax + 1e-12; }
  friend bool operator==(const Envelope&, const Envelope&) = default;
};

class Frequency {
 public:
  Frequency() = default;
  Frequency(std::vector<int> sites, std::vector<double> values, double gamma = 0.05, double mu = 2.0);

  // omega . l over the common support; sites outside the active set contribute 0
  double dot(const MultiIndex& l) const;
  double component(int site) const;
  double sup_norm() const;

  const std::vector<int>& sites() const { return sites_; }
  const std::vector<double>& values() const { return values_; }
  double gamma() const { return gamma_; }
  double mu() const { return mu_; }
  void set_gamma(double g) { gamma_ = g; }
  void set_mu(double m) { mu_ = m; }

  // gamma * prod_n 1/(1 + |l_n|^mu <n>^mu)
  double diophantine_floor(const MultiIndex& l) const;

 private:
  std::vector<int> sites_;
  std::vector<double> values_;
  double gamma_ = 0.05;
  double mu_ = 2.0;
};

}  // namespace qpkam
