#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "council/domain.hpp"

namespace council {

// Reserved marker phrases. Agent responses use them so that gating and
// field extraction stay deterministic; prompts must not emit the
// anticipation/prediction markers unless the matching toggle is on.
inline constexpr const char* kAnticipationBegin = "ANTICIPATION:";
inline constexpr const char* kAnticipationEnd = "END ANTICIPATION";
inline constexpr const char* kPredictionsMarker = "PREDICTIONS:";
inline constexpr const char* kVerdictMarker = "VERDICT:";
inline constexpr const char* kCritiqueMarker = "CRITIQUE:";
inline constexpr const char* kNoFindingsMarker = "(no stored findings)";
inline constexpr const char* kHistoryBegin = "DISCUSSION SO FAR:";
inline constexpr const char* kHistoryEnd = "END DISCUSSION";
inline constexpr const char* kFindingsBegin = "KNOWLEDGE BASE FINDINGS:";
inline constexpr const char* kFindingsEnd = "END KNOWLEDGE BASE FINDINGS";

struct PersonaSpec {
  AgentRole role = AgentRole::DataLogicSpecialist;
  std::string focus_description;
  std::map<AgentRole, std::string> peer_expectations;  // specialists: exactly the other two
};

struct PersonaSet {
  std::string note;
  std::map<AgentRole, PersonaSpec> personas;
  std::vector<std::string> orchestrator_heuristics;

  const PersonaSpec& persona(AgentRole role) const;
  void validate() const;

  static PersonaSet defaults();
  static PersonaSet from_json_text(const std::string& text);
  static PersonaSet load_file(const std::string& path);
  std::string to_json_text() const;
};

struct PromptBundle {
  std::string system_prompt;
  std::string user_prompt;
  bool expects_anticipation_block = false;
  bool expects_predictions = false;
};

PromptBundle build_specialist_prompt(AgentRole role, const Scenario& scenario, const Transcript& history,
                                     const DeliberationConfig& config, const PersonaSet& personas);

PromptBundle build_critic_prompt(const Scenario& scenario, const Transcript& history,
                                 const DeliberationConfig& config, const PersonaSet& personas);

PromptBundle build_integrator_prompt(const Scenario& scenario, const Transcript& history,
                                     const std::string& kb_findings, const DeliberationConfig& config,
                                     const PersonaSet& personas);

PromptBundle build_orchestrator_prompt(const Scenario& scenario, const Transcript& history,
                                       const std::string& synthesis, const DeliberationConfig& config,
                                       const PersonaSet& personas,
                                       const std::vector<std::pair<AgentRole, std::string>>& open_critiques);

struct OrchestratorVerdict {
  bool resolved = false;
  AgentRole target = AgentRole::DataLogicSpecialist;  // meaningful when !resolved
  std::string gap;
};

// Deterministic parse of the first well-formed verdict block; tolerant of
// surrounding prose. nullopt = unparsable verdict.
std::optional<OrchestratorVerdict> parse_orchestrator_verdict(const std::string& response_text);

struct ParsedAgentBlocks {
  std::string anticipation;
  std::vector<std::pair<AgentRole, std::string>> predictions;
};

// Extracts the reserved-marker blocks from a specialist response. Callers
// gate this on the run's config.
ParsedAgentBlocks parse_agent_blocks(const std::string& response_text);

// "CRITIQUE: <SpecialistRole>: <finding>" lines; non-specialist targets are
// skipped.
std::vector<std::pair<AgentRole, std::string>> parse_critiques(const std::string& critic_text);

}  // namespace council
