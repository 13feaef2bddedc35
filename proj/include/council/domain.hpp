#pragma once

#include <array>
#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "council/errors.hpp"

namespace council {

// The decision problem handed to every agent.
struct Scenario {
  std::string id;
  std::string brief;
  std::vector<std::string> options;      // >= 2, unique names
  std::vector<std::string> constraints;  // free-text constraints
  std::string budget_text;

  void validate() const;

  static Scenario from_json_text(const std::string& text);
  static Scenario load_file(const std::string& path);
  std::string to_json_text() const;
};

enum class AgentRole {
  DataLogicSpecialist,
  VisionaryStrategist,
  ImplementationRealist,
  Critic,
  Integrator,
  Orchestrator,
};

const std::array<AgentRole, 3>& specialist_roles();
bool is_specialist(AgentRole role);
std::string to_string(AgentRole role);
std::optional<AgentRole> role_from_string(const std::string& name);

// The two toggles plus run parameters. `label` is always derived.
struct DeliberationConfig {
  bool tom_enabled = false;
  bool critic_enabled = false;
  int max_rounds = 4;
  unsigned long seed = 0;

  std::string label() const;
  void validate() const;
};

std::string derive_config_label(bool tom, bool critic);
// Inverse of derive_config_label; rejects anything but the four labels.
std::optional<std::pair<bool, bool>> config_from_label(const std::string& label);

struct Turn {
  std::size_t index = 0;
  int round = 1;
  AgentRole role = AgentRole::DataLogicSpecialist;
  std::string content;
  std::string anticipation;  // empty = absent
  std::vector<std::pair<AgentRole, std::string>> predictions;
  std::chrono::system_clock::time_point timestamp;

  // Timestamps are informational and excluded from equality.
  bool operator==(const Turn& other) const;
};

enum class TerminationReason { OrchestratorResolved, MaxRoundsReached };

std::string to_string(TerminationReason reason);
std::optional<TerminationReason> termination_from_string(const std::string& name);

struct Transcript {
  std::string scenario_id;
  DeliberationConfig config;
  std::vector<Turn> turns;
  std::string final_synthesis;
  std::optional<TerminationReason> termination;  // absent = run failed / partial

  bool operator==(const Transcript& other) const;
};

// Appends after checking index contiguity, config gating and round monotonicity.
void append_turn(Transcript& transcript, Turn turn);

// Line-delimited records: one header line, then one line per turn.
std::string serialize_transcript(const Transcript& transcript);
Transcript parse_transcript(const std::string& text);
Transcript load_transcript(const std::string& path);

// Single serialized records, used when streaming a run turn-by-turn.
std::string transcript_header_line(const Transcript& transcript);
std::string turn_line(const Turn& turn);

struct TurnJudgeLabel {
  std::size_t turn_index = 0;
  bool substantive_counterargument = false;
  bool revision_trigger = false;
  std::string justification;
};

struct RiskJudgeLabel {
  std::string risk_text;
  bool addressed = false;
};

// The five rubric metrics for one conversation plus the judge labels they
// derive from. risk_resolution_pct is absent when no risks were discovered.
struct RubricScores {
  double argument_quality = 1.0;     // [1,5]
  double critical_engagement = 0.0;  // [0,1]
  double reference_cohesion = 1.0;   // [1,3]
  std::optional<double> risk_resolution_pct;  // [0,100]
  long revision_triggers = 0;
  std::vector<TurnJudgeLabel> per_turn;
  std::vector<RiskJudgeLabel> risks;

  void validate_bounds() const;
};

// ISO-8601 UTC with millisecond precision.
std::string format_timestamp(std::chrono::system_clock::time_point tp);
std::optional<std::chrono::system_clock::time_point> parse_timestamp(const std::string& text);

}  // namespace council
