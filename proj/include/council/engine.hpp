#pragma once

#include <functional>
#include <string>
#include <vector>

#include "council/domain.hpp"
#include "council/gateway.hpp"
#include "council/knowledge_base.hpp"
#include "council/prompts.hpp"

namespace council {

enum class EnginePhase { SpecialistRound, CritiquePhase, Synthesis, Verdict, Done };

std::string to_string(EnginePhase phase);

struct Critique {
  AgentRole target = AgentRole::DataLogicSpecialist;
  std::string text;
  bool resolved = false;
};

struct RunStats {
  int rounds = 0;
  std::size_t turns = 0;
  std::size_t kb_calls = 0;
  std::size_t asp_fallbacks = 0;
  std::vector<std::string> warnings;
};

struct EngineState {
  EnginePhase phase = EnginePhase::SpecialistRound;
  int round = 1;
  std::vector<AgentRole> pending_specialists;
  Transcript transcript;
  KnowledgeGraph graph;
  std::vector<Critique> outstanding_critiques;
  std::vector<std::string> syntheses;
  std::size_t round_robin_cursor = 0;     // fallback targeting for unparsable verdicts
  std::size_t specialist_turns_at_last_critique = 0;
  RunStats stats;
};

struct EngineOptions {
  std::string run_id = "run";
  double agent_temperature = 0.7;
  int max_output_tokens = 1024;
  KbOptions kb;
  std::function<void(const Turn&)> on_turn;               // streaming sink
  std::function<void(EnginePhase)> on_kb_retrieve;        // instrumentation hook
};

EngineState make_initial_state(const Scenario& scenario, const DeliberationConfig& config);

// Exactly one phase transition per call; specialist/critic/integrator/
// orchestrator steps each append exactly one turn.
void step(EngineState& state, const Scenario& scenario, const DeliberationConfig& config,
          ChatBackend& gateway, const PersonaSet& personas, const EngineOptions& options);

// Overrides a RESOLVED verdict when (a) a scenario option was never named in
// any synthesis, or (b) unresolved critiques remain. Invoked once per round.
OrchestratorVerdict apply_premature_close_guard(const OrchestratorVerdict& verdict,
                                                const EngineState& state, const Scenario& scenario);

struct RunResult {
  Transcript transcript;
  std::string graph_snapshot;
  RunStats stats;
  bool failed = false;
  std::string error;
};

RunResult run_deliberation(const Scenario& scenario, const DeliberationConfig& config,
                           ChatBackend& gateway, const PersonaSet& personas,
                           const EngineOptions& options = {});

}  // namespace council
