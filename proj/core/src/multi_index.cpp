#include "qpkam/multi_index.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qpkam/errors.hpp"

namespace qpkam {

MultiIndex MultiIndex::unit(int site, int value) {
  MultiIndex m;
  m.set(site, value);
  return m;
}

MultiIndex MultiIndex::from_pairs(const std::vector<std::pair<int, int>>& pairs) {
  MultiIndex m;
  for (auto [s, v] : pairs) m.set(s, m[s] + v);
  return m;
}

int MultiIndex::operator[](int site) const {
  for (int i = 0; i < nnz_; ++i)
    if (sites_[i] == site) return values_[i];
  return 0;
}

void MultiIndex::set(int site, int value) {
  if (site < 1) throw ContractViolation("multi-index site must be >= 1, got " + std::to_string(site));
  int pos = 0;
  while (pos < nnz_ && sites_[pos] < site) ++pos;
  if (pos < nnz_ && sites_[pos] == site) {
    if (value != 0) {
      values_[pos] = value;
      return;
    }
    for (int i = pos; i + 1 < nnz_; ++i) {
      sites_[i] = sites_[i + 1];
      values_[i] = values_[i + 1];
    }
    --nnz_;
    sites_[nnz_] = 0;
    values_[nnz_] = 0;
    return;
  }
  if (value == 0) return;
  if (nnz_ == kMaxSupport)
    throw EnvelopeViolation("multi-index support exceeds " + std::to_string(kMaxSupport) + " sites");
  for (int i = nnz_; i > pos; --i) {
    sites_[i] = sites_[i - 1];
    values_[i] = values_[i - 1];
  }
  sites_[pos] = site;
  values_[pos] = value;
  ++nnz_;
}

MultiIndex MultiIndex::operator+(const MultiIndex& o) const {
  MultiIndex r;
  int i = 0, j = 0;
  while (i < nnz_ || j < o.nnz_) {
    int s;
    int v;
    if (j >= o.nnz_ || (i < nnz_ && sites_[i] < o.sites_[j])) {
      s = sites_[i];
      v = values_[i++];
    } else if (i >= nnz_ || o.sites_[j] < sites_[i]) {
      s = o.sites_[j];
      v = o.values_[j++];
    } else {
      s = sites_[i];
      v = values_[i++] + o.values_[j++];
    }
    if (v == 0) continue;
    if (r.nnz_ == kMaxSupport)
      throw EnvelopeViolation("multi-index support exceeds " + std::to_string(kMaxSupport) + " sites");
    r.sites_[r.nnz_] = s;
    r.values_[r.nnz_] = v;
    ++r.nnz_;
  }
  return r;
}

MultiIndex MultiIndex::operator-() const {
  MultiIndex r = *this;
  for (int i = 0; i < nnz_; ++i) r.values_[i] = -values_[i];
  return r;
}

MultiIndex MultiIndex::operator-(const MultiIndex& o) const { return *this + (-o); }

double MultiIndex::weight(double eta) const {
  double w = 0.0;
  for (int i = 0; i < nnz_; ++i) w += std::pow(japanese(sites_[i]), eta) * std::abs(values_[i]);
  return w;
}

int MultiIndex::l1() const {
  int s = 0;
  for (int i = 0; i < nnz_; ++i) s += std::abs(values_[i]);
  return s;
}

std::string MultiIndex::to_string() const {
  if (nnz_ == 0) return "0";
  std::string out;
  for (int i = 0; i < nnz_; ++i) {
    if (i) out += ',';
    out += std::to_string(sites_[i]) + ':' + std::to_string(values_[i]);
  }
  return out;
}

MultiIndex MultiIndex::parse(const std::string& text) {
  MultiIndex m;
  std::string t;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  if (t.empty() || t == "0") return m;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw ParseError("multi-index entry without ':' in '" + text + "'");
    int site = 0, value = 0;
    try {
      std::size_t used = 0;
      site = std::stoi(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("site");
      std::string rest = item.substr(colon + 1);
      value = std::stoi(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("value");
    } catch (const std::logic_error&) {
      throw ParseError("malformed multi-index entry '" + item + "'");
    }
    if (m[site] != 0) throw ParseError("duplicate site " + std::to_string(site) + " in multi-index '" + text + "'");
    m.set(site, value);
  }
  return m;
}

std::size_t MultiIndexHash::operator()(const MultiIndex& m) const noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (int i = 0; i < m.support_size(); ++i) {
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(m.site_at(i)));
    h *= 1099511628211ull;
    h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(m.value_at(i)));
    h *= 1099511628211ull;
  }
  return static_cast<std::size_t>(h);
}

Frequency::Frequency(std::vector<int> sites, std::vector<double> values, double gamma, double mu)
    : sites_(std::move(sites)), values_(std::move(values)), gamma_(gamma), mu_(mu) {
  if (sites_.size() != values_.size()) throw ContractViolation("frequency sites/values size mismatch");
  std::vector<std::size_t> order(sites_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return sites_[a] < sites_[b]; });
  std::vector<int> s;
  std::vector<double> v;
  for (auto i : order) {
    if (!s.empty() && s.back() == sites_[i]) throw ContractViolation("duplicate frequency site");
    if (sites_[i] < 1) throw ContractViolation("frequency site must be >= 1");
    if (!(values_[i] >= 1.0 && values_[i] <= 2.0))
      throw ContractViolation("frequency component outside [1,2] at site " + std::to_string(sites_[i]));
    s.push_back(sites_[i]);
    v.push_back(values_[i]);
  }
  sites_ = std::move(s);
  values_ = std::move(v);
}

double Frequency::component(int site) const {
  auto it = std::lower_bound(sites_.begin(), sites_.end(), site);
  if (it == sites_.end() || *it != site) return 0.0;
  return values_[static_cast<std::size_t>(it - sites_.begin())];
}

double Frequency::dot(const MultiIndex& l) const {
  double s = 0.0;
  for (int i = 0; i < l.support_size(); ++i) s += component(l.site_at(i)) * l.value_at(i);
  return s;
}

double Frequency::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double Frequency::diophantine_floor(const MultiIndex& l) const {
  double prod = 1.0;
  for (int i = 0; i < l.support_size(); ++i)
    prod *= 1.0 + std::pow(std::abs(l.value_at(i)), mu_) * std::pow(japanese(l.site_at(i)), mu_);
  return gamma_ / prod;
}

}  // namespace qpkam
