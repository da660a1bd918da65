#include "qpkam/config.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "qpkam/diophantine.hpp"
#include "qpkam/errors.hpp"

namespace qpkam {

using nlohmann::json;

namespace {

constexpr int kMaxPotentialK = 16;

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("config field '" + path + "': " + what);
}

class Reader {
 public:
  Reader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key);
  }
  const json& at(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key, double def) {
    if (!has(key)) return def;
    const json& v = obj_.at(key);
    if (!v.is_number()) fail(sub(key), "expected a number");
    return v.get<double>();
  }
  std::int64_t integer(const std::string& key, std::int64_t def) {
    if (!has(key)) return def;
    const json& v = obj_.at(key);
    if (!v.is_number_integer()) fail(sub(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::string string(const std::string& key, const std::string& def) {
    if (!has(key)) return def;
    const json& v = obj_.at(key);
    if (!v.is_string()) fail(sub(key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> def) {
    if (!has(key)) return def;
    const json& v = obj_.at(key);
    if (!v.is_array()) fail(sub(key), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(sub(key) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  void reject_unknown() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) fail(sub(it.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<ModeEntry> parse_table(const json& v, const std::string& path, int d) {
  if (!v.is_array()) fail(path, "expected an array of mode records");
  std::vector<ModeEntry> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    Reader r(v[i], rp);
    ModeEntry e;
    if (!r.has("l")) fail(rp, "missing 'l'");
    const json& l = r.at("l");
    if (!l.is_array() || static_cast<int>(l.size()) != d)
      fail(rp + ".l", "expected an array of " + std::to_string(d) + " integers");
    for (const auto& x : l) {
      if (!x.is_number_integer()) fail(rp + ".l", "expected integers");
      e.l.push_back(x.get<int>());
    }
    if (!r.has("k")) fail(rp, "missing 'k'");
    const std::int64_t k = r.integer("k", 0);
    if (std::abs(k) > kMaxPotentialK) fail(rp + ".k", "|k| exceeds " + std::to_string(kMaxPotentialK));
    e.k = static_cast<int>(k);
    e.c = Complex(r.number("re", 0.0), r.number("im", 0.0));
    if (!std::isfinite(e.c.real()) || !std::isfinite(e.c.imag())) fail(rp, "non-finite coefficient");
    r.reject_unknown();
    out.push_back(std::move(e));
  }
  return out;
}

json table_json(const std::vector<ModeEntry>& t) {
  json a = json::array();
  for (const auto& e : t) a.push_back({{"l", e.l}, {"k", e.k}, {"re", e.c.real()}, {"im", e.c.imag()}});
  return a;
}

MultiIndex to_index(const std::vector<int>& l) {
  MultiIndex m;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l[i] != 0) m.set(static_cast<int>(i) + 1, l[i]);
  return m;
}

// Adds the missing conjugate partners; returns true when any were added.
bool fill_field(AnalyticField& f, const std::vector<ModeEntry>& t, bool complete_conjugates) {
  std::map<std::pair<MultiIndex, int>, Complex> given;
  for (const auto& e : t) given[{to_index(e.l), e.k}] += e.c;
  bool added = false;
  for (const auto& [key, c] : given) {
    f.add(key.first, key.second, c);
    if (!complete_conjugates) continue;
    const bool self = key.first.is_zero() && key.second == 0;
    if (!self && !given.count({-key.first, -key.second})) {
      f.add(-key.first, -key.second, std::conj(c));
      added = true;
    }
    if (self && c.imag() != 0.0) added = true;
  }
  return added;
}

}  // namespace

double RunConfig::gamma_value() const { return gamma ? *gamma : std::sqrt(epsilon); }

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config syntax error at " + line_col(text, e.byte) + ": " + e.what());
  }
  RunConfig c;
  Reader r(root, "");
  c.d = static_cast<int>(r.integer("d", c.d));
  if (c.d < 1 || c.d > MultiIndex::kMaxSupport) fail("d", "must be in [1, " + std::to_string(MultiIndex::kMaxSupport) + "]");

  if (r.has("omega")) {
    const json& om = r.at("omega");
    if (om.is_string()) {
      if (om.get<std::string>() != "sample") fail("omega", "expected an array or \"sample\"");
    } else {
      c.omega = r.numbers("omega", {});
      if (static_cast<int>(c.omega.size()) != c.d) fail("omega", "expected " + std::to_string(c.d) + " entries");
      for (double w : c.omega)
        if (!(w > 0.0) || !std::isfinite(w)) fail("omega", "entries must be positive and finite");
    }
  } else {
    fail("omega", "missing (give an array or \"sample\")");
  }
  const auto box = r.numbers("omega_box", {c.omega_lo, c.omega_hi});
  if (box.size() != 2 || !(box[0] > 0.0) || !(box[1] > box[0])) fail("omega_box", "expected [lo, hi] with 0 < lo < hi");
  c.omega_lo = box[0];
  c.omega_hi = box[1];

  c.epsilon = r.number("epsilon", c.epsilon);
  if (!(c.epsilon >= 0.0) || c.epsilon > 0.1) fail("epsilon", "must be in [0, 0.1]");
  if (r.has("gamma")) {
    c.gamma = r.number("gamma", 0.0);
    if (!(*c.gamma > 0.0)) fail("gamma", "must be positive");
  }
  c.mu = r.number("mu", c.mu);
  c.eta = r.number("eta", c.eta);
  if (!(c.eta > 0.0)) fail("eta", "must be positive");
  c.sigma_bar = r.number("sigma_bar", c.sigma_bar);
  if (!(c.sigma_bar > 0.0)) fail("sigma_bar", "must be positive");
  c.jmax = static_cast<int>(r.integer("jmax", c.jmax));
  if (c.jmax < 4 || c.jmax > 256) fail("jmax", "must be in [4, 256]");
  c.lmax = r.number("lmax", c.lmax);
  if (!(c.lmax >= 1.0)) fail("lmax", "must be >= 1");
  c.pad = static_cast<int>(r.integer("pad", c.pad));
  if (c.pad < 0) fail("pad", "must be >= 0");

  if (r.has("kam")) {
    Reader k(r.at("kam"), "kam");
    c.chi = k.number("chi", c.chi);
    c.N0 = k.number("N0", c.N0);
    c.stop = k.number("stop", c.stop);
    c.n_max = static_cast<int>(k.integer("n_max", c.n_max));
    if (!(c.chi > 1.0)) fail("kam.chi", "must exceed 1");
    if (!(c.N0 > 0.0)) fail("kam.N0", "must be positive");
    if (c.n_max < 1 || c.n_max > 64) fail("kam.n_max", "must be in [1, 64]");
    k.reject_unknown();
  }
  if (r.has("evolution")) {
    Reader e(r.at("evolution"), "evolution");
    c.T = e.number("T", c.T);
    c.dt = e.number("dt", c.dt);
    c.sample_dt = e.number("sample_dt", c.sample_dt);
    c.analytic_sigma = e.number("analytic_sigma", c.analytic_sigma);
    if (!(c.T >= 0.0)) fail("evolution.T", "must be >= 0");
    if (!(c.dt > 0.0)) fail("evolution.dt", "must be positive");
    if (!(c.sample_dt > 0.0)) fail("evolution.sample_dt", "must be positive");
    e.reject_unknown();
  }
  if (r.has("measure")) {
    Reader m(r.at("measure"), "measure");
    c.measure_gammas = m.numbers("gammas", c.measure_gammas);
    c.measure_sites = static_cast<int>(m.integer("sites", c.measure_sites));
    c.measure_lmax = m.number("lmax", c.measure_lmax);
    c.measure_samples = m.integer("samples", c.measure_samples);
    if (c.measure_sites < 1 || c.measure_sites > MultiIndex::kMaxSupport) fail("measure.sites", "out of range");
    if (c.measure_samples < 1) fail("measure.samples", "must be positive");
    m.reject_unknown();
  }
  const std::int64_t seed = r.integer("seed", static_cast<std::int64_t>(c.seed));
  if (seed < 0) fail("seed", "must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.out_dir = r.string("out", c.out_dir);

  if (!r.has("potential")) fail("potential", "missing");
  Reader p(r.at("potential"), "potential");
  if (p.has("V2")) c.potential.V2 = parse_table(p.at("V2"), "potential.V2", c.d);
  const bool free = p.has("W1") || p.has("W0");
  const bool direct = p.has("V1") || p.has("V0");
  if (free && direct) fail("potential", "give either W1/W0 or V1/V0, not both");
  c.potential.direct = direct;
  if (p.has("W1")) c.potential.W1 = parse_table(p.at("W1"), "potential.W1", c.d);
  if (p.has("W0")) c.potential.W0 = parse_table(p.at("W0"), "potential.W0", c.d);
  if (p.has("V1")) c.potential.V1 = parse_table(p.at("V1"), "potential.V1", c.d);
  if (p.has("V0")) c.potential.V0 = parse_table(p.at("V0"), "potential.V0", c.d);
  p.reject_unknown();
  r.reject_unknown();

  for (const auto* t : {&c.potential.V2, &c.potential.W1, &c.potential.W0, &c.potential.V1, &c.potential.V0})
    for (const auto& e : *t)
      if (to_index(e.l).weight(c.eta) > c.lmax) fail("potential", "mode l=" + to_index(e.l).to_string() + " exceeds lmax");
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string config_echo(const RunConfig& c) {
  json j;
  j["d"] = c.d;
  if (c.omega.empty())
    j["omega"] = "sample";
  else
    j["omega"] = c.omega;
  j["omega_box"] = {c.omega_lo, c.omega_hi};
  j["epsilon"] = c.epsilon;
  j["gamma"] = c.gamma_value();
  j["mu"] = c.mu;
  j["eta"] = c.eta;
  j["sigma_bar"] = c.sigma_bar;
  j["jmax"] = c.jmax;
  j["lmax"] = c.lmax;
  j["pad"] = c.pad;
  j["kam"] = {{"chi", c.chi}, {"N0", c.N0}, {"stop", c.stop}, {"n_max", c.n_max}};
  j["evolution"] = {{"T", c.T}, {"dt", c.dt}, {"sample_dt", c.sample_dt}, {"analytic_sigma", c.analytic_sigma}};
  j["measure"] = {{"gammas", c.measure_gammas},
                  {"sites", c.measure_sites},
                  {"lmax", c.measure_lmax},
                  {"samples", c.measure_samples}};
  j["seed"] = c.seed;
  json p;
  p["V2"] = table_json(c.potential.V2);
  if (c.potential.direct) {
    p["V1"] = table_json(c.potential.V1);
    p["V0"] = table_json(c.potential.V0);
  } else {
    p["W1"] = table_json(c.potential.W1);
    p["W0"] = table_json(c.potential.W0);
  }
  j["potential"] = p;
  return j.dump(2);
}

Frequency resolve_omega(const RunConfig& cfg) {
  std::vector<int> sites;
  std::vector<double> vals;
  for (int i = 1; i <= cfg.d; ++i) sites.push_back(i);
  if (!cfg.omega.empty()) {
    vals = cfg.omega;
  } else {
    CounterRng rng(cfg.seed, 0x6f6d656761ULL, 0);
    for (int i = 0; i < cfg.d; ++i) vals.push_back(cfg.omega_lo + (cfg.omega_hi - cfg.omega_lo) * rng.uniform());
  }
  return Frequency(sites, vals, cfg.gamma_value(), cfg.mu);
}

BuiltInput build_input(const RunConfig& cfg) {
  BuiltInput b;
  Envelope env{cfg.eta, cfg.lmax, 2 * (cfg.jmax + cfg.pad)};
  const Frequency omega = resolve_omega(cfg);
  int kc = 1;
  for (const auto* t : {&cfg.potential.V2, &cfg.potential.W1, &cfg.potential.W0, &cfg.potential.V1, &cfg.potential.V0})
    for (const auto& e : *t) kc = std::max(kc, std::abs(e.k));
  // room for the derivatives taken during completion
  kc += 1;
  const double sb = cfg.sigma_bar;
  AnalyticField V2(env, sb, kc);
  bool added = fill_field(V2, cfg.potential.V2, true);
  if (cfg.potential.direct) {
    AnalyticField V1(env, sb, kc), V0(env, sb, kc);
    fill_field(V1, cfg.potential.V1, false);
    fill_field(V0, cfg.potential.V0, false);
    b.input.env = env;
    b.input.omega = omega;
    b.input.epsilon = cfg.epsilon;
    b.input.sigma_bar = sb;
    b.input.V2 = V2;
    b.input.V1 = V1;
    b.input.V0 = V0;
    const double defect = b.input.symmetry_defect();
    if (defect > 1e-12)
      throw ConfigError("config field 'potential': V1/V0 violate the self-adjointness conditions (defect " +
                        format_double(defect) + "); give the free parts W1/W0 instead");
  } else {
    AnalyticField W1(env, sb, kc), W0(env, sb, kc);
    added |= fill_field(W1, cfg.potential.W1, true);
    added |= fill_field(W0, cfg.potential.W0, true);
    b.input = SchrodingerInput::complete(env, omega, cfg.epsilon, sb, V2, W1, W0);
    b.notes.push_back("V1 and V0 completed from V2 and the free parts W1, W0");
  }
  if (added) b.notes.push_back("conjugate partners added to the potential tables");
  b.symmetry_completed = added || !cfg.potential.direct;
  return b;
}

}  // namespace qpkam
