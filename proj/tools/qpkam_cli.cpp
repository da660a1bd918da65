#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qpkam/config.hpp"
#include "qpkam/errors.hpp"
#include "qpkam/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jmax;
  std::optional<double> lmax;
  std::optional<double> epsilon;
  std::optional<double> gamma;
  std::vector<double> gamma_list;
  std::optional<int> sites;
  bool dump_operator = false;
  bool json_logs = false;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "problem file (JSON)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", f.out, "output directory (overrides the config)");
  sub->add_option("--seed", f.seed, "seed for omega sampling and Monte-Carlo");
  sub->add_option("--jmax", f.jmax, "spatial mode cut");
  sub->add_option("--lmax", f.lmax, "time-Fourier cut |l|_eta <= lmax (measure: enumeration cut)");
  sub->add_option("--epsilon", f.epsilon, "perturbation size");
  sub->add_option("--gamma", f.gamma, "Diophantine/Melnikov constant");
  sub->add_flag("--dump-operator", f.dump_operator, "write the order -2 remainder to operator.txt");
  sub->add_flag("--json-logs", f.json_logs, "structured logs with timings on stderr");
}

void apply_overrides(qpkam::RunConfig& cfg, const Flags& f, qpkam::Stage stage) {
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.jmax) cfg.jmax = *f.jmax;
  if (f.epsilon) cfg.epsilon = *f.epsilon;
  if (f.gamma) cfg.gamma = *f.gamma;
  if (f.lmax) {
    if (stage == qpkam::Stage::Measure)
      cfg.measure_lmax = *f.lmax;
    else
      cfg.lmax = *f.lmax;
  }
  if (!f.gamma_list.empty()) cfg.measure_gammas = f.gamma_list;
  if (f.sites) cfg.measure_sites = *f.sites;
  if (cfg.jmax < 4 || cfg.jmax > 256) throw qpkam::ConfigError("--jmax must be in [4, 256]");
  if (!(cfg.epsilon >= 0.0)) throw qpkam::ConfigError("--epsilon must be nonnegative");
  if (cfg.gamma && !(*cfg.gamma > 0.0)) throw qpkam::ConfigError("--gamma must be positive");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qpkam: reducibility of a quasi-periodically perturbed 1-D Schroedinger operator"};
  app.require_subcommand(1);
  Flags flags;
  std::vector<std::pair<CLI::App*, qpkam::Stage>> subs;
  for (const char* name : {"regularize", "kam", "evolve", "measure", "all"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the pipeline through '") + name + "'");
    add_common(sub, flags);
    if (std::string(name) == "measure" || std::string(name) == "all") {
      sub->add_option("--gamma-list", flags.gamma_list, "gamma values for the Monte-Carlo study");
      sub->add_option("--sites", flags.sites, "number of frequency sites in the Monte-Carlo study");
    }
    subs.emplace_back(sub, qpkam::parse_stage(name));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : qpkam::kExitConfig;
  }

  qpkam::Stage stage = qpkam::Stage::All;
  for (const auto& [sub, st] : subs)
    if (sub->parsed()) stage = st;

  qpkam::RunConfig cfg;
  try {
    cfg = qpkam::load_config(flags.config);
    apply_overrides(cfg, flags, stage);
  } catch (const qpkam::ConfigError& e) {
    std::cerr << "qpkam: " << e.what() << '\n';
    return qpkam::kExitConfig;
  }

  qpkam::PipelineOptions opt;
  opt.stage = stage;
  opt.dump_operator = flags.dump_operator;
  opt.json_logs = flags.json_logs;
  opt.log = &std::cerr;
  qpkam::PipelineResult res;
  try {
    res = qpkam::run_pipeline(cfg, opt);
    qpkam::write_bundle(cfg.out_dir, res);
  } catch (const qpkam::Error& e) {
    std::cerr << "qpkam: " << e.what() << '\n';
    return qpkam::kExitCertificate;
  }
  if (res.exit_code != qpkam::kExitOk) std::cerr << "qpkam: " << res.status << ": " << res.message << '\n';
  for (const auto& c : res.certificates)
    if (!c.pass) std::cerr << "qpkam: failed " << c.name << " value=" << c.value << " limit=" << c.limit << '\n';
  return res.exit_code;
}
