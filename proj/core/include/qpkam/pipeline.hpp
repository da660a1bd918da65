#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "qpkam/config.hpp"

namespace qpkam {

enum class Stage { Regularize, Kam, Evolve, Measure, All };

Stage parse_stage(const std::string& name);
const char* stage_name(Stage s);

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitCertificate = 3, kExitOmegaExcluded = 4 };

struct Certificate {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool pass = true;
};

struct PipelineOptions {
  Stage stage = Stage::All;
  bool dump_operator = false;
  bool json_logs = false;
  std::ostream* log = nullptr;  // diagnostics and timing; never part of the bundle
};

struct PipelineResult {
  int exit_code = kExitOk;
  std::string status = "ok";
  std::string message;
  std::vector<Certificate> certificates;
  std::map<std::string, std::string> files;  // report bundle: file name -> contents
};

// Runs the requested stage and everything it depends on. Stages are recomputed from the
// configuration rather than read back, so every subcommand is independently rerunnable.
PipelineResult run_pipeline(const RunConfig& cfg, const PipelineOptions& opt);

// Writes every bundle file under dir (created if needed).
void write_bundle(const std::string& dir, const PipelineResult& res);

}  // namespace qpkam
