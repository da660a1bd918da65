#include "qpkam/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qpkam/diophantine.hpp"
#include "qpkam/errors.hpp"
#include "qpkam/evolution.hpp"
#include "qpkam/kam.hpp"
#include "qpkam/regularization.hpp"

namespace qpkam {

using nlohmann::json;

namespace {

constexpr double kStepResidualLimit = 1e-11;
constexpr double kSkewLimit = 1e-11;
constexpr double kConjugationRelLimit = 1e-9;
constexpr double kUnitarityLimit = 1e-9;
constexpr double kFreeDriftLimit = 1e-10;

class Clock {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

bool runs(Stage requested, Stage s) {
  if (requested == Stage::All) return true;
  if (s == Stage::Measure) return requested == Stage::Measure;
  if (requested == Stage::Measure) return false;
  return static_cast<int>(s) <= static_cast<int>(requested);
}

std::string spectrum_csv(const std::vector<SpectrumRow>& rows, const std::array<double, 4>& lam) {
  std::ostringstream os;
  os << "j,mu_plus,mu_minus,model,residual\n";
  for (const auto& r : rows) {
    const double mp = normal_form_mu(lam, r.j), mm = normal_form_mu(lam, -r.j);
    const double res = std::max(std::abs(r.mu_plus - mp), std::abs(r.mu_minus - mm));
    os << r.j << ',' << format_double(r.mu_plus) << ',' << format_double(r.mu_minus) << ',' << format_double(mp)
       << ',' << format_double(res) << '\n';
  }
  return os.str();
}

std::string measure_csv(const std::vector<MeasureRow>& rows) {
  std::ostringstream os;
  os << "gamma,samples,failing,fraction,stderr\n";
  for (const auto& r : rows)
    os << format_double(r.gamma) << ',' << r.samples << ',' << r.failing << ',' << format_double(r.fraction) << ','
       << format_double(r.stderr_) << '\n';
  return os.str();
}

json step_json(const StepReport& s) {
  json q = json::object();
  for (const auto& [k, v] : s.quantities) q[k] = v;
  return {{"step", s.step}, {"name", s.name},         {"sigma", s.sigma},
          {"residual", s.residual}, {"skew_defect", s.skew_defect}, {"quantities", q}};
}

class Run {
 public:
  Run(const RunConfig& cfg, const PipelineOptions& opt) : cfg_(cfg), opt_(opt) {}

  PipelineResult go() {
    report_["config"] = json::parse(config_echo(cfg_));
    report_["seed"] = cfg_.seed;
    report_["stage"] = stage_name(opt_.stage);
    try {
      body();
    } catch (const MelnikovFailure& e) {
      set_status(kExitOmegaExcluded, "omega excluded", e.what());
      report_["melnikov_failure"] = {{"l", e.index.to_string()}, {"j", e.j}, {"jp", e.jp},
                                     {"inverse_norm", e.inverse_norm}, {"bound", e.bound}};
    } catch (const SmallnessViolation& e) {
      set_status(kExitCertificate, "certificate failure", std::string("smallness: ") + e.what());
    } catch (const ConfigError& e) {
      set_status(kExitConfig, "config error", e.what());
    }
    if (res_.exit_code == kExitOk) {
      for (const auto& c : res_.certificates)
        if (!c.pass) {
          set_status(kExitCertificate, "certificate failure", "failed invariant: " + c.name);
          break;
        }
    }
    json certs = json::array();
    for (const auto& c : res_.certificates)
      certs.push_back({{"name", c.name}, {"value", c.value}, {"limit", c.limit}, {"pass", c.pass}});
    report_["certificates"] = certs;
    report_["status"] = res_.status;
    report_["exit_code"] = res_.exit_code;
    if (!res_.message.empty()) report_["message"] = res_.message;
    res_.files["run.json"] = report_.dump(2) + "\n";
    return res_;
  }

 private:
  void set_status(int code, const std::string& status, const std::string& msg) {
    res_.exit_code = code;
    res_.status = status;
    res_.message = msg;
    log_event("status", {{"status", status}, {"message", msg}});
  }

  void certify(const std::string& name, double value, double limit) {
    res_.certificates.push_back({name, value, limit, value <= limit});
  }

  void log_event(const std::string& event, json extra) {
    if (!opt_.log) return;
    if (opt_.json_logs) {
      extra["event"] = event;
      *opt_.log << extra.dump() << '\n';
    } else {
      *opt_.log << "[qpkam] " << event;
      for (auto it = extra.begin(); it != extra.end(); ++it) *opt_.log << ' ' << it.key() << '=' << it.value().dump();
      *opt_.log << '\n';
    }
  }

  void body() {
    const bool need_input = runs(opt_.stage, Stage::Regularize);
    if (need_input) pde_stages();
    if (runs(opt_.stage, Stage::Measure)) measure_stage();
  }

  void pde_stages() {
    Clock clk;
    BuiltInput b = build_input(cfg_);
    const SchrodingerInput& in = b.input;
    report_["omega"] = in.omega.values();
    report_["symmetry_completed"] = b.symmetry_completed;
    report_["notes"] = b.notes;

    DiophantineVerdict dv = check_diophantine(in.omega, cfg_.gamma_value(), cfg_.mu, cfg_.lmax, cfg_.eta);
    report_["diophantine"] = {{"pass", dv.pass}, {"worst_index", dv.worst.to_string()},
                              {"worst_ratio", std::isfinite(dv.worst_ratio) ? json(dv.worst_ratio) : json(nullptr)}};
    if (!dv.pass) {
      set_status(kExitOmegaExcluded, "omega excluded",
                 "Diophantine condition fails at l=" + dv.worst.to_string());
      return;
    }

    RegularizationOptions ro;
    ro.J = cfg_.jmax;
    ro.pad = cfg_.pad;
    RegularizedForm rf = regularize(in, ro);
    json steps = json::array();
    for (const auto& s : rf.reports()) {
      steps.push_back(step_json(s));
      certify("regularization.step" + std::to_string(s.step) + ".residual", s.residual, kStepResidualLimit);
      certify("regularization.step" + std::to_string(s.step) + ".skew_defect", s.skew_defect, kSkewLimit);
    }
    report_["regularization"] = {{"lambdas", rf.lambdas},
                                 {"remainder_ratio", cfg_.epsilon > 0.0 ? json(rf.remainder_ratio()) : json(0.0)},
                                 {"steps", steps}};
    if (opt_.dump_operator) res_.files["operator.txt"] = dump_operator(rf.remainder());
    log_event("regularize", {{"wall_ms", clk.lap_ms()}});
    if (!runs(opt_.stage, Stage::Kam)) return;

    const int J = cfg_.jmax;
    std::vector<double> mu;
    for (int k = -J; k <= J; ++k) mu.push_back(normal_form_mu(rf.lambdas, k));
    KamInput ki{normal_form_blocks(mu, J), rf.remainder(), in.omega, 0.5 * cfg_.sigma_bar};
    KamOptions ko;
    ko.chi = cfg_.chi;
    ko.N0 = cfg_.N0;
    ko.stop = cfg_.stop;
    ko.n_max = cfg_.n_max;
    ko.gamma = cfg_.gamma_value();
    KamResult kr = kam_iterate(ki, ko);
    std::string log_lines;
    for (const auto& it : kr.log) {
      log_lines += kam_log_json_line(it, false) + "\n";
      if (opt_.json_logs && opt_.log) *opt_.log << kam_log_json_line(it, true) << '\n';
    }
    res_.files["kam_log.jsonl"] = log_lines;
    ConjugationCheck cc = check_conjugation(ki, kr);
    const auto spec = block_spectrum(kr.D_inf);
    res_.files["spectrum.csv"] = spectrum_csv(spec, rf.lambdas);
    spectrum_ = MelnikovSpectrum{};
    spectrum_->jmax = J;
    for (const auto& r : spec) {
      spectrum_->mu_plus.push_back(r.mu_plus);
      spectrum_->mu_minus.push_back(r.mu_minus);
    }
    report_["kam"] = {{"steps", kr.steps},
                      {"converged", kr.converged},
                      {"initial_offdiag", cc.initial_offdiag},
                      {"residual_offdiag", cc.residual_offdiag},
                      {"residual_diag", cc.residual_diag},
                      {"unitarity", cc.unitarity},
                      {"inverse_defect", cc.inverse_defect}};
    certify("kam.converged", kr.converged ? 0.0 : 1.0, 0.0);
    certify("kam.offdiag_residual_relative",
            cc.initial_offdiag > 0.0 ? cc.residual_offdiag / cc.initial_offdiag : cc.residual_offdiag,
            kConjugationRelLimit);
    certify("kam.unitarity", cc.unitarity, kUnitarityLimit);
    log_event("kam", {{"wall_ms", clk.lap_ms()}, {"steps", kr.steps}});
    if (!runs(opt_.stage, Stage::Evolve)) return;

    EvolutionOptions eo;
    eo.T = cfg_.T;
    eo.dt = cfg_.dt;
    eo.sample_dt = cfg_.sample_dt;
    eo.analytic_sigma = cfg_.analytic_sigma;
    const ModeVector u0 = default_initial_datum(J);
    EvolutionReport er = evolve_compare(in, rf, kr, u0, eo, cc.residual_offdiag + cc.residual_diag);
    res_.files["trace.csv"] = trace_csv(er.trace);
    const double drift = free_flow_drift(J, cfg_.T, cfg_.dt);
    report_["evolution"] = {{"T", cfg_.T},
                            {"discrepancy_l2", er.discrepancy_l2},
                            {"budget", er.budget},
                            {"budget_terms",
                             {{"generator", er.generator_term},
                              {"roundtrip", er.roundtrip},
                              {"richardson", er.richardson},
                              {"tail", er.tail}}},
                            {"C_W_l2", er.C_W_l2},
                            {"C_W_h1", er.C_W_h1},
                            {"C_W_analytic", er.C_W_analytic},
                            {"max_h1_ratio", er.max_h1_ratio},
                            {"max_analytic_ratio", er.max_analytic_ratio},
                            {"free_flow_drift", drift}};
    certify("evolution.discrepancy_within_budget", er.discrepancy_l2, er.budget);
    certify("evolution.h1_ratio_bounded", er.max_h1_ratio, er.C_W_h1);
    certify("evolution.analytic_ratio_bounded", er.max_analytic_ratio, er.C_W_analytic);
    certify("evolution.free_flow_drift", drift, kFreeDriftLimit);
    log_event("evolve", {{"wall_ms", clk.lap_ms()}});
  }

  void measure_stage() {
    Clock clk;
    MeasureOptions mo;
    mo.d = cfg_.measure_sites;
    mo.L = cfg_.measure_lmax;
    mo.mu = cfg_.mu;
    mo.eta = cfg_.eta;
    mo.samples = cfg_.measure_samples;
    mo.seed = cfg_.seed;
    mo.spectrum = spectrum_;
    const auto rows = measure_monte_carlo(cfg_.measure_gammas, mo);
    res_.files["measure.csv"] = measure_csv(rows);
    report_["measure"] = {{"sites", mo.d},
                          {"lmax", mo.L},
                          {"samples", mo.samples},
                          {"spectrum", spectrum_ ? "run" : "unperturbed"}};
    log_event("measure", {{"wall_ms", clk.lap_ms()}});
  }

  const RunConfig& cfg_;
  const PipelineOptions& opt_;
  PipelineResult res_;
  json report_;
  std::optional<MelnikovSpectrum> spectrum_;
};

}  // namespace

Stage parse_stage(const std::string& name) {
  if (name == "regularize") return Stage::Regularize;
  if (name == "kam") return Stage::Kam;
  if (name == "evolve") return Stage::Evolve;
  if (name == "measure") return Stage::Measure;
  if (name == "all") return Stage::All;
  throw ConfigError("unknown stage '" + name + "'");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Regularize: return "regularize";
    case Stage::Kam: return "kam";
    case Stage::Evolve: return "evolve";
    case Stage::Measure: return "measure";
    case Stage::All: return "all";
  }
  return "all";
}

PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opt) { return Run(cfg, opt).go(); }

void write_bundle(const std::string& dir, const PipelineResult& res) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : res.files) {
    std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
    if (!f) throw Error("cannot write " + name + " in " + dir);
    f << content;
  }
}

}  // namespace qpkam
