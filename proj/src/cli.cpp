#include "council/cli.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "council/engine.hpp"
#include "council/evaluation.hpp"

namespace council::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, path);
}

bool wildcard_match(const std::string& pattern, const std::string& name) {
  // '*' only; enough for artifact globs
  std::size_t p = 0, n = 0, star = std::string::npos, star_n = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      star_n = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++star_n;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

std::unique_ptr<ChatBackend> make_backend(const std::string& backend, const std::string& script_path,
                                          const std::string& model, const std::string& api_base) {
  if (backend == "scripted") {
    if (script_path.empty()) throw Error("--backend scripted requires --script");
    return std::make_unique<ScriptedBackend>(load_script(script_path));
  }
  if (backend == "live") {
    LiveBackendOptions options;
    options.model = model;
    options.base_url = api_base;
    return std::make_unique<LiveBackend>(std::move(options));
  }
  throw Error("unknown backend '" + backend + "' (expected scripted|live)");
}

PersonaSet load_personas(const std::string& path) {
  return path.empty() ? PersonaSet::defaults() : PersonaSet::load_file(path);
}

std::string stats_json(const std::string& run_id, const std::string& label, int rep,
                       const RunResult& result) {
  json doc{
      {"run_id", run_id},
      {"label", label},
      {"rep", rep},
      {"rounds", result.stats.rounds},
      {"turns", result.stats.turns},
      {"kb_calls", result.stats.kb_calls},
      {"asp_fallbacks", result.stats.asp_fallbacks},
      {"failed", result.failed},
      {"error", result.error},
      {"warnings", result.stats.warnings},
  };
  return doc.dump(2) + "\n";
}

}  // namespace

std::string run_artifact_stem(const std::string& label, int rep) {
  return label + "-" + std::to_string(rep);
}

bool parse_artifact_stem(const std::string& stem, std::string& label, int& rep) {
  const std::size_t dash = stem.find('-');
  if (dash == std::string::npos) return false;
  label = stem.substr(0, dash);
  if (!config_from_label(label)) return false;
  const std::string rep_text = stem.substr(dash + 1);
  if (rep_text.empty() ||
      rep_text.find_first_not_of("0123456789") != std::string::npos) {
    return false;
  }
  rep = std::stoi(rep_text);
  return true;
}

std::string resolve_solver_path(const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  if (const char* env = std::getenv("COUNCIL_SOLVER"); env && *env) return env;
  std::error_code ec;
  const fs::path self = fs::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const fs::path sibling = self.parent_path() / "council-asp";
    if (fs::exists(sibling, ec)) return sibling.string();
  }
  return "clingo";
}

std::vector<std::string> expand_globs(const std::vector<std::string>& patterns) {
  std::vector<std::string> paths;
  for (const std::string& pattern : patterns) {
    if (pattern.find('*') == std::string::npos) {
      paths.push_back(pattern);
      continue;
    }
    const fs::path full(pattern);
    const fs::path dir = full.parent_path().empty() ? fs::path(".") : full.parent_path();
    const std::string name_pattern = full.filename().string();
    std::vector<std::string> matched;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      if (!entry.is_regular_file()) continue;
      if (wildcard_match(name_pattern, entry.path().filename().string())) {
        matched.push_back(entry.path().string());
      }
    }
    std::sort(matched.begin(), matched.end());
    paths.insert(paths.end(), matched.begin(), matched.end());
  }
  return paths;
}

int cmd_run(const RunManifest& manifest) {
  Scenario scenario;
  PersonaSet personas;
  std::unique_ptr<ChatBackend> backend;
  KbOptions kb;
  try {
    if (manifest.scenario_path.empty()) throw Error("--scenario is required");
    if (manifest.runs_per_cell < 1) throw Error("--runs-per-cell must be >= 1");
    if (manifest.max_rounds < 1) throw Error("--max-rounds must be >= 1");
    scenario = Scenario::load_file(manifest.scenario_path);
    personas = load_personas(manifest.personas_path);
    for (const std::string& cell : manifest.cells) {
      if (!config_from_label(cell)) throw Error("unknown configuration label '" + cell + "'");
    }
    backend = make_backend(manifest.backend, manifest.script_path, manifest.model, manifest.api_base);
    kb.solver_path = resolve_solver_path(manifest.solver_path);
    if (!manifest.asp_rules_path.empty()) kb.asp_rules = read_text_file(manifest.asp_rules_path);
    fs::create_directories(manifest.out_dir);
  } catch (const std::exception& ex) {
    std::cerr << "council run: " << ex.what() << "\n";
    return kExitConfigError;
  }

  struct Task {
    std::string label;
    int rep;
  };
  std::vector<Task> tasks;
  for (const std::string& cell : manifest.cells) {
    for (int rep = 0; rep < manifest.runs_per_cell; ++rep) tasks.push_back({cell, rep});
  }

  std::atomic<std::size_t> next_task{0};
  std::atomic<bool> any_failed{false};
  std::mutex log_mutex;

  auto worker = [&]() {
    while (true) {
      const std::size_t at = next_task.fetch_add(1);
      if (at >= tasks.size()) return;
      const Task& task = tasks[at];
      const std::string stem = run_artifact_stem(task.label, task.rep);
      const fs::path transcript_path = fs::path(manifest.out_dir) / (stem + ".transcript");

      const auto toggles = *config_from_label(task.label);
      DeliberationConfig config;
      config.tom_enabled = toggles.first;
      config.critic_enabled = toggles.second;
      config.max_rounds = manifest.max_rounds;
      const std::size_t cell_index =
          std::find(manifest.cells.begin(), manifest.cells.end(), task.label) - manifest.cells.begin();
      config.seed = manifest.seed * 1000003UL + cell_index * 101UL + static_cast<unsigned long>(task.rep);

      // stream turn-by-turn so a crash leaves a parseable partial transcript
      std::ofstream stream(transcript_path, std::ios::binary | std::ios::trunc);
      Transcript shell;
      shell.scenario_id = scenario.id;
      shell.config = config;
      stream << transcript_header_line(shell) << "\n" << std::flush;

      EngineOptions options;
      options.run_id = stem;
      options.kb = kb;
      options.on_turn = [&stream](const Turn& turn) { stream << turn_line(turn) << "\n" << std::flush; };

      const RunResult result = run_deliberation(scenario, config, *backend, personas, options);
      stream.close();
      if (!result.failed) {
        write_file_atomic(transcript_path, serialize_transcript(result.transcript));
      } else {
        any_failed = true;
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "council run: " << stem << " failed: " << result.error << "\n";
      }
      write_file_atomic(fs::path(manifest.out_dir) / (stem + ".stats.json"),
                        stats_json(stem, task.label, task.rep, result));
      write_file_atomic(fs::path(manifest.out_dir) / (stem + ".graph.jsonl"), result.graph_snapshot);
    }
  };

  const int worker_count = std::max(1, std::min<int>(manifest.parallel, static_cast<int>(tasks.size())));
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(worker_count));
    for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
  }
  return any_failed ? kExitRunFailure : kExitOk;
}

int cmd_judge(const JudgeManifest& manifest) {
  std::string rubric;
  std::string brief;
  std::unique_ptr<ChatBackend> backend;
  std::vector<std::string> transcripts;
  try {
    rubric = manifest.rubric_path.empty() ? default_rubric_text() : read_text_file(manifest.rubric_path);
    if (!manifest.scenario_path.empty()) brief = Scenario::load_file(manifest.scenario_path).brief;
    backend = make_backend(manifest.backend, manifest.script_path, manifest.judge_model, manifest.api_base);
    transcripts = expand_globs(manifest.transcript_globs);
    if (transcripts.empty()) throw Error("no transcript files matched");
    if (!manifest.out_dir.empty()) fs::create_directories(manifest.out_dir);
  } catch (const std::exception& ex) {
    std::cerr << "council judge: " << ex.what() << "\n";
    return kExitConfigError;
  }

  std::atomic<std::size_t> next_file{0};
  std::atomic<bool> any_failed{false};
  std::mutex log_mutex;

  auto worker = [&]() {
    while (true) {
      const std::size_t at = next_file.fetch_add(1);
      if (at >= transcripts.size()) return;
      const fs::path path(transcripts[at]);
      try {
        const Transcript transcript = load_transcript(path.string());
        const JudgePayload payload = build_judge_payload(transcript, rubric, brief);
        JudgeOptions judge_options;
        judge_options.request_tag_prefix = path.stem().string();
        const JudgeVerdictRaw verdict = judge_transcript(payload, *backend, judge_options);

        ScoresRecord record;
        record.transcript_id = path.stem().string();
        record.label = transcript.config.label();
        record.scores = compute_scores(verdict, transcript);

        const fs::path out_dir = manifest.out_dir.empty() ? path.parent_path() : fs::path(manifest.out_dir);
        write_file_atomic(out_dir / (path.stem().string() + ".scores.json"),
                          scores_to_json_text(record));
      } catch (const std::exception& ex) {
        any_failed = true;
        std::lock_guard<std::mutex> lock(log_mutex);
        std::cerr << "council judge: " << path.string() << ": " << ex.what() << "\n";
      }
    }
  };

  const int worker_count =
      std::max(1, std::min<int>(manifest.parallel, static_cast<int>(transcripts.size())));
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(worker_count));
    for (int i = 0; i < worker_count; ++i) threads.emplace_back(worker);
    for (auto& thread : threads) thread.join();
  }
  return any_failed ? kExitRunFailure : kExitOk;
}

int cmd_report(const ReportManifest& manifest) {
  try {
    const std::vector<std::string> files = expand_globs(manifest.scores_globs);
    std::map<std::string, std::vector<RubricScores>> by_label;
    for (const std::string& file : files) {
      const ScoresRecord record = load_scores(file);
      by_label[record.label].push_back(record.scores);
    }
    std::map<std::string, std::vector<RubricScores>> requested;
    for (const std::string& cell : manifest.cells) {
      if (!config_from_label(cell)) throw Error("unknown configuration label '" + cell + "'");
      auto it = by_label.find(cell);
      if (it == by_label.end()) throw MissingCellError(cell);
      requested[cell] = it->second;
    }
    const AggregateReport report = aggregate(requested);
    const std::string text = report.render_metrics_table() + "\n" + report.render_triggers_table();
    std::cout << text;
    if (!manifest.out_dir.empty()) {
      fs::create_directories(manifest.out_dir);
      write_file_atomic(fs::path(manifest.out_dir) / "report.txt", text);
      write_file_atomic(fs::path(manifest.out_dir) / "report.json", report.to_json_text());
    }
    return kExitOk;
  } catch (const MissingCellError& ex) {
    std::cerr << "council report: " << ex.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& ex) {
    std::cerr << "council report: " << ex.what() << "\n";
    return kExitConfigError;
  }
}

namespace {

std::vector<std::string> split_cells(const std::string& csv) {
  std::vector<std::string> cells;
  std::stringstream stream(csv);
  std::string cell;
  while (std::getline(stream, cell, ',')) {
    if (!cell.empty()) cells.push_back(cell);
  }
  return cells;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"council: multi-agent deliberation engine with ablation and judging harness"};
  app.require_subcommand(1);

  RunManifest run_manifest;
  std::string run_cells = "FF,TF,FT,TT";
  auto* run_cmd = app.add_subcommand("run", "run deliberations across configuration cells");
  run_cmd->add_option("--scenario", run_manifest.scenario_path, "scenario JSON file")->required();
  run_cmd->add_option("--cells", run_cells, "comma-separated configuration labels");
  run_cmd->add_option("--runs-per-cell", run_manifest.runs_per_cell, "repetitions per cell");
  run_cmd->add_option("--seed", run_manifest.seed, "base seed for per-run seed derivation");
  run_cmd->add_option("--backend", run_manifest.backend, "scripted|live");
  run_cmd->add_option("--script", run_manifest.script_path, "script file for the scripted backend");
  run_cmd->add_option("--out", run_manifest.out_dir, "output directory");
  run_cmd->add_option("--max-rounds", run_manifest.max_rounds, "refinement round bound");
  run_cmd->add_option("--solver-path", run_manifest.solver_path, "ASP solver executable");
  run_cmd->add_option("--parallel", run_manifest.parallel, "concurrent runs");
  run_cmd->add_option("--model", run_manifest.model, "agent model (live backend)");
  run_cmd->add_option("--api-base", run_manifest.api_base, "chat-completion endpoint base URL");
  run_cmd->add_option("--personas", run_manifest.personas_path, "persona definitions JSON");
  run_cmd->add_option("--asp-rules", run_manifest.asp_rules_path, "ASP inference ruleset file");

  JudgeManifest judge_manifest;
  auto* judge_cmd = app.add_subcommand("judge", "score stored transcripts with the blinded judge");
  judge_cmd->add_option("transcripts", judge_manifest.transcript_globs, "transcript files or globs")
      ->required();
  judge_cmd->add_option("--rubric", judge_manifest.rubric_path, "rubric text file");
  judge_cmd->add_option("--scenario", judge_manifest.scenario_path,
                        "scenario JSON file (supplies the brief shown to the judge)");
  judge_cmd->add_option("--backend", judge_manifest.backend, "scripted|live");
  judge_cmd->add_option("--script", judge_manifest.script_path, "script file for the scripted backend");
  judge_cmd->add_option("--judge-model", judge_manifest.judge_model, "judge model (live backend)");
  judge_cmd->add_option("--api-base", judge_manifest.api_base, "chat-completion endpoint base URL");
  judge_cmd->add_option("--out", judge_manifest.out_dir, "scores output directory");
  judge_cmd->add_option("--parallel", judge_manifest.parallel, "concurrent judgings");

  ReportManifest report_manifest;
  std::string report_cells = "FF,TF,FT,TT";
  auto* report_cmd = app.add_subcommand("report", "aggregate score records into tables");
  report_cmd->add_option("scores", report_manifest.scores_globs, "scores files or globs")->required();
  report_cmd->add_option("--cells", report_cells, "comma-separated configuration labels");
  report_cmd->add_option("--out", report_manifest.out_dir, "report output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  if (run_cmd->parsed()) {
    run_manifest.cells = split_cells(run_cells);
    return cmd_run(run_manifest);
  }
  if (judge_cmd->parsed()) {
    return cmd_judge(judge_manifest);
  }
  report_manifest.cells = split_cells(report_cells);
  return cmd_report(report_manifest);
}

}  // namespace council::cli
