#pragma once

#include <string>
#include <vector>

namespace council::cli {

// Exit codes: 0 ok, 1 run/judge failures (partial artifacts retained),
// 2 configuration errors.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailure = 1;
inline constexpr int kExitConfigError = 2;

struct RunManifest {
  std::string scenario_path;
  std::vector<std::string> cells = {"FF", "TF", "FT", "TT"};
  int runs_per_cell = 1;
  unsigned long seed = 0;
  std::string backend = "scripted";  // "scripted" | "live"
  std::string script_path;
  std::string out_dir = "out";
  int max_rounds = 4;
  std::string solver_path;  // empty -> env/bundled/clingo discovery
  int parallel = 1;
  std::string model = "gpt-4o";
  std::string api_base = "https://api.openai.com";
  std::string personas_path;   // empty -> built-in defaults
  std::string asp_rules_path;  // empty -> built-in defaults
};

struct JudgeManifest {
  std::vector<std::string> transcript_globs;
  std::string rubric_path;    // empty -> built-in default
  std::string scenario_path;  // optional; supplies the brief shown to the judge
  std::string backend = "scripted";
  std::string script_path;
  std::string judge_model = "gpt-4o";
  std::string api_base = "https://api.openai.com";
  std::string out_dir;  // empty -> next to each transcript
  int parallel = 1;
};

struct ReportManifest {
  std::vector<std::string> scores_globs;
  std::vector<std::string> cells = {"FF", "TF", "FT", "TT"};
  std::string out_dir;  // empty -> stdout only
};

int cmd_run(const RunManifest& manifest);
int cmd_judge(const JudgeManifest& manifest);
int cmd_report(const ReportManifest& manifest);

// Transcript files are named "{label}-{rep}.transcript"; both parts round-trip
// through the filename.
std::string run_artifact_stem(const std::string& label, int rep);
bool parse_artifact_stem(const std::string& stem, std::string& label, int& rep);

// Flag > COUNCIL_SOLVER env > council-asp beside the executable > clingo.
std::string resolve_solver_path(const std::string& explicit_path);

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns);

int run_cli(int argc, char** argv);

}  // namespace council::cli
