#include "qpkam/diophantine.hpp"

#include <algorithm>
#include <cmath>

#include "qpkam/errors.hpp"

namespace qpkam {

std::vector<MultiIndex> enumerate_indices(double L, const std::vector<int>& sites_in, double eta) {
  std::vector<int> sites = sites_in;
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  std::vector<MultiIndex> out;
  MultiIndex cur;
  const double slack = 1e-12;
  // depth-first over sites, values ascending: lexicographic in (l_{s_1}, l_{s_2}, ...)
  auto rec = [&](auto&& self, std::size_t pos, double used) -> void {
    if (pos == sites.size()) {
      if (!cur.is_zero()) out.push_back(cur);
      return;
    }
    const int s = sites[pos];
    const double w = std::pow(japanese(s), eta);
    const int vmax = static_cast<int>(std::floor((L - used) / w + slack));
    for (int v = -vmax; v <= vmax; ++v) {
      cur.set(s, v);
      self(self, pos + 1, used + w * std::abs(v));
    }
    cur.set(s, 0);
  };
  if (L >= 0) rec(rec, 0, 0.0);
  return out;
}

double site_weight_product(const MultiIndex& l, double mu1, double mu2) {
  double p = 1.0;
  for (int i = 0; i < l.support_size(); ++i)
    p *= 1.0 + std::pow(japanese(l.site_at(i)), mu1) * std::pow(std::abs(l.value_at(i)), mu2);
  return p;
}

double melnikov_weight(const MultiIndex& l) { return site_weight_product(l, 4.0, 4.0); }

DiophantineVerdict check_diophantine(const Frequency& omega, double gamma, double mu, double L, double eta) {
  DiophantineVerdict v;
  for (const auto& l : enumerate_indices(L, omega.sites(), eta)) {
    double r = std::abs(omega.dot(l)) * site_weight_product(l, mu, mu);
    double ratio = gamma > 0 ? r / gamma : std::numeric_limits<double>::infinity();
    if (ratio < v.worst_ratio || (v.worst.is_zero() && ratio == v.worst_ratio)) {
      v.worst_ratio = ratio;
      v.worst = l;
    }
  }
  v.pass = v.worst_ratio > 1.0;
  return v;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t block) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(block), hi(block)};
  engine_.seed(seq);
}

double CounterRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

MelnikovSpectrum MelnikovSpectrum::unperturbed(int jmax) {
  MelnikovSpectrum s;
  s.jmax = jmax;
  for (int j = 0; j <= jmax; ++j) {
    s.mu_plus.push_back(-static_cast<double>(j) * j);
    s.mu_minus.push_back(-static_cast<double>(j) * j);
  }
  return s;
}

namespace {

struct MelnikovTable {
  std::vector<double> offdiag;                  // sorted differences mu_j^s - mu_j'^s', j != j'
  std::vector<std::pair<double, double>> diag;  // (difference, <j>^2)
};

MelnikovTable build_table(const MelnikovSpectrum& s) {
  MelnikovTable t;
  auto vals = [&](int j) {
    std::vector<double> v{s.mu_plus[static_cast<std::size_t>(j)]};
    if (j > 0) v.push_back(s.mu_minus[static_cast<std::size_t>(j)]);
    return v;
  };
  for (int j = 0; j <= s.jmax; ++j)
    for (int jp = 0; jp <= s.jmax; ++jp)
      for (double a : vals(j))
        for (double b : vals(jp)) {
          if (j != jp)
            t.offdiag.push_back(a - b);
          else
            t.diag.emplace_back(a - b, japanese(j) * japanese(j));
        }
  std::sort(t.offdiag.begin(), t.offdiag.end());
  return t;
}

// min over the table of |w + delta| * weight / 2
double melnikov_margin(double w, double dl, const MelnikovTable& t) {
  double best = std::numeric_limits<double>::infinity();
  auto it = std::lower_bound(t.offdiag.begin(), t.offdiag.end(), -w);
  if (it != t.offdiag.end()) best = std::min(best, std::abs(w + *it));
  if (it != t.offdiag.begin()) best = std::min(best, std::abs(w + *std::prev(it)));
  best *= dl / 2.0;
  for (const auto& [d, f] : t.diag) best = std::min(best, std::abs(w + d) * dl * f / 2.0);
  return best;
}

}  // namespace

std::vector<MeasureRow> measure_monte_carlo(const std::vector<double>& gammas, const MeasureOptions& opt) {
  if (opt.samples < 1) throw ContractViolation("Monte-Carlo needs at least one sample");
  std::vector<int> sites;
  for (int s = 1; s <= opt.d; ++s) sites.push_back(s);
  const auto indices = enumerate_indices(opt.L, sites, opt.eta);
  std::vector<double> dio_w, mel_w;
  for (const auto& l : indices) {
    dio_w.push_back(site_weight_product(l, opt.mu, opt.mu));
    mel_w.push_back(melnikov_weight(l));
  }
  MelnikovTable table;
  if (opt.melnikov) {
    int jneeded = static_cast<int>(std::ceil(opt.L * 2.0 + 3.0));
    table = build_table(opt.spectrum ? *opt.spectrum : MelnikovSpectrum::unperturbed(jneeded));
  }

  std::vector<MeasureRow> rows(gammas.size());
  for (std::size_t g = 0; g < gammas.size(); ++g) {
    rows[g].gamma = gammas[g];
    rows[g].samples = opt.samples;
  }
  constexpr std::int64_t kBlock = 1024;
  std::vector<double> omega(static_cast<std::size_t>(opt.d));
  for (std::int64_t start = 0; start < opt.samples; start += kBlock) {
    CounterRng rng(opt.seed, 0, static_cast<std::uint64_t>(start / kBlock));
    const std::int64_t end = std::min(opt.samples, start + kBlock);
    for (std::int64_t s = start; s < end; ++s) {
      for (auto& w : omega) w = 1.0 + rng.uniform();
      double qd = std::numeric_limits<double>::infinity();
      double qm = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto& l = indices[i];
        double w = 0.0;
        for (int t = 0; t < l.support_size(); ++t)
          w += omega[static_cast<std::size_t>(l.site_at(t) - 1)] * l.value_at(t);
        qd = std::min(qd, std::abs(w) * dio_w[i]);
        if (opt.melnikov) qm = std::min(qm, melnikov_margin(w, mel_w[i], table));
      }
      for (auto& row : rows) {
        bool fd = qd <= row.gamma;
        bool fm = opt.melnikov && qm < row.gamma;
        row.failing_diophantine += fd ? 1 : 0;
        row.failing += (fd || fm) ? 1 : 0;
      }
    }
  }
  for (auto& row : rows) {
    row.fraction = static_cast<double>(row.failing) / static_cast<double>(row.samples);
    row.stderr_ = std::sqrt(row.fraction * (1.0 - row.fraction) / static_cast<double>(row.samples));
  }
  return rows;
}

double measure_exact_1d(double gamma, double L, double mu, bool melnikov, int jmax) {
  std::vector<std::pair<double, double>> iv;
  const int amax = static_cast<int>(std::floor(L + 1e-12));
  for (int a = -amax; a <= amax; ++a) {
    if (a == 0) continue;
    const double aa = std::abs(a);
    // Diophantine: |a w| (1 + |a|^mu) <= gamma
    double r = gamma / (1.0 + std::pow(aa, mu));
    iv.emplace_back(-r / aa, r / aa);
    if (!melnikov) continue;
    const double dl = 1.0 + std::pow(aa, 4.0);
    const double rm = 2.0 * gamma / dl;
    for (int j = 0; j <= jmax; ++j)
      for (int jp = 0; jp <= jmax; ++jp) {
        // epsilon = 0: mu_j = -j^2 for both signs
        double delta = -static_cast<double>(j) * j + static_cast<double>(jp) * jp;
        double rad = j == jp ? rm / (japanese(j) * japanese(j)) : rm;
        // |a w + delta| < rad
        double c = -delta / a;
        iv.emplace_back(c - rad / aa, c + rad / aa);
      }
  }
  for (auto& [lo, hi] : iv) {
    lo = std::max(lo, 1.0);
    hi = std::min(hi, 2.0);
  }
  iv.erase(std::remove_if(iv.begin(), iv.end(), [](const auto& p) { return p.second <= p.first; }), iv.end());
  std::sort(iv.begin(), iv.end());
  double total = 0.0, cur_lo = 0.0, cur_hi = -1.0;
  for (const auto& [lo, hi] : iv) {
    if (lo > cur_hi) {
      if (cur_hi > cur_lo) total += cur_hi - cur_lo;
      cur_lo = lo;
      cur_hi = hi;
    } else {
      cur_hi = std::max(cur_hi, hi);
    }
  }
  if (cur_hi > cur_lo) total += cur_hi - cur_lo;
  return total;
}

std::pair<double, MultiIndex> small_divisor_measured(double rho, double mu1, double mu2, double L,
                                                     const std::vector<int>& sites, double eta) {
  if (!(rho > 0)) throw ContractViolation("rho must be positive");
  double best = 1.0;  // l = 0
  MultiIndex arg;
  for (const auto& l : enumerate_indices(L, sites, eta)) {
    double v = site_weight_product(l, mu1, mu2) * std::exp(-rho * l.weight(eta));
    if (v > best) {
      best = v;
      arg = l;
    }
  }
  return {best, arg};
}

double small_divisor_bound(double rho, double tau, double eta) {
  return std::exp(tau / std::pow(rho, 1.0 / eta) * std::log(tau / rho));
}

double calibrate_tau(double mu1, double mu2, double L, const std::vector<int>& sites, double eta,
                     const std::vector<double>& reference_rho) {
  std::vector<double> measured;
  for (double r : reference_rho) measured.push_back(small_divisor_measured(r, mu1, mu2, L, sites, eta).first);
  for (int p = -10; p <= 30; ++p) {
    double tau = std::ldexp(1.0, p);
    bool ok = true;
    for (std::size_t i = 0; i < reference_rho.size() && ok; ++i)
      ok = measured[i] <= small_divisor_bound(reference_rho[i], tau, eta);
    if (ok) return tau;
  }
  throw CertificateFailure("no power-of-two tau up to 2^30 satisfies the small-divisor bound");
}

SmallDivisorSup small_divisor_sup(double rho, double mu1, double mu2, double L, const std::vector<int>& sites,
                                  double tau, double eta) {
  SmallDivisorSup s;
  auto [m, arg] = small_divisor_measured(rho, mu1, mu2, L, sites, eta);
  s.measured = m;
  s.argmax = arg;
  s.tau = tau;
  s.bound = small_divisor_bound(rho, tau, eta);
  return s;
}

std::vector<CutoffCheck> small_divisor_cutoff(const std::vector<double>& Ns, double mu1, double mu2,
                                              const std::vector<int>& sites, double eta) {
  std::vector<CutoffCheck> out;
  for (double N : Ns) {
    CutoffCheck c;
    c.N = N;
    c.measured = 1.0;
    for (const auto& l : enumerate_indices(N, sites, eta)) c.measured = std::max(c.measured, site_weight_product(l, mu1, mu2));
    out.push_back(c);
  }
  // smallest power of two C with measured <= (1 + N)^{C N^{1/(1+eta)}} for every N
  for (int p = -10; p <= 30; ++p) {
    double C = std::ldexp(1.0, p);
    bool ok = true;
    for (const auto& c : out)
      ok = ok && std::log(c.measured) <= C * std::pow(c.N, 1.0 / (1.0 + eta)) * std::log1p(c.N) + 1e-12;
    if (ok) {
      for (auto& c : out) {
        c.C = C;
        c.bound = std::exp(C * std::pow(c.N, 1.0 / (1.0 + eta)) * std::log1p(c.N));
      }
      return out;
    }
  }
  throw CertificateFailure("no power-of-two constant fits the cutoff small-divisor bound");
}

std::vector<SeriesPartial> series_convergence_check(double mu1, double mu2, const std::vector<double>& L_schedule,
                                                    double eta) {
  std::vector<SeriesPartial> out;
  double prev = 0.0;
  for (double L : L_schedule) {
    std::vector<int> sites;
    for (int s = 1; std::pow(japanese(s), eta) <= L + 1e-12; ++s) sites.push_back(s);
    SeriesPartial p;
    p.L = L;
    for (const auto& l : enumerate_indices(L, sites, eta)) {
      double n1 = l.l1();
      p.partial_sum += n1 * n1 / site_weight_product(l, mu1, mu2);
      ++p.terms;
    }
    p.increment = p.partial_sum - prev;
    prev = p.partial_sum;
    out.push_back(p);
  }
  return out;
}

}  // namespace qpkam
