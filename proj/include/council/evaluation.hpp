#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "council/domain.hpp"
#include "council/gateway.hpp"

namespace council {

std::string default_rubric_text();

// Forbidden configuration markers: the two-letter labels and "ToM" as
// standalone word-boundary tokens (case-sensitive), plus the toggle field
// names as substrings. Agent-authored turn content is exempt by contract.
bool contains_config_marker(const std::string& text);

struct JudgeTurn {
  std::size_t index = 0;
  std::string role;
  std::string content;
};

// What the judge sees: rubric, scenario brief and the bare conversation.
// Never carries the configuration, its label, or any toggle metadata.
struct JudgePayload {
  std::string rubric_text;
  std::string scenario_brief;
  std::vector<JudgeTurn> turns;

  std::string to_json_text() const;
};

JudgePayload build_judge_payload(const Transcript& transcript, const std::string& rubric,
                                 const std::string& scenario_brief = "");

struct JudgeVerdictRaw {
  int argument_quality = 1;    // 1..5
  int reference_cohesion = 1;  // 1..3
  std::vector<TurnJudgeLabel> per_turn;  // every turn index exactly once
  std::vector<RiskJudgeLabel> risks;
};

struct JudgeOptions {
  std::string request_tag_prefix = "judge";  // requests tagged "<prefix>/judge/<attempt>"
  int max_output_tokens = 2048;
};

// Temperature-0 judging with one bounded re-ask on malformed output.
JudgeVerdictRaw judge_transcript(const JudgePayload& payload, ChatBackend& gateway,
                                 const JudgeOptions& options = {});

// Pure arithmetic from judge labels; throws CoverageGapError when the verdict
// does not cover the transcript's turn indices exactly.
RubricScores compute_scores(const JudgeVerdictRaw& verdict, const Transcript& transcript);

struct ScoresRecord {
  std::string transcript_id;
  std::string label;  // aggregation metadata, written after judging
  RubricScores scores;
};

std::string scores_to_json_text(const ScoresRecord& record);
ScoresRecord scores_from_json_text(const std::string& text);
ScoresRecord load_scores(const std::string& path);

struct CellAggregate {
  std::string label;
  std::size_t runs = 0;
  double argument_quality = 0.0;
  double critical_engagement = 0.0;
  double reference_cohesion = 0.0;
  std::optional<double> risk_resolution_pct;  // mean over defined values only
  std::size_t risk_exclusions = 0;
  double revision_triggers = 0.0;
};

struct AggregateReport {
  std::vector<CellAggregate> rows;  // ordered FF, TF, FT, TT

  std::string render_metrics_table() const;
  std::string render_triggers_table() const;
  std::string to_json_text() const;
};

AggregateReport aggregate(const std::map<std::string, std::vector<RubricScores>>& scores_by_label);

}  // namespace council
