#include "council/engine.hpp"

#include <algorithm>
#include <cctype>

namespace council {

namespace {

std::string lower(const std::string& text) {
  std::string out = text;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string request_tag(const EngineOptions& options, int round, AgentRole role, const char* purpose) {
  return options.run_id + "/" + std::to_string(round) + "/" + to_string(role) + "/" + purpose;
}

ChatRequest make_request(const PromptBundle& bundle, const EngineOptions& options, int round,
                         AgentRole role, const char* purpose) {
  ChatRequest request;
  request.system_prompt = bundle.system_prompt;
  request.messages.emplace_back("user", bundle.user_prompt);
  request.temperature = options.agent_temperature;
  request.max_output_tokens = options.max_output_tokens;
  request.request_tag = request_tag(options, round, role, purpose);
  return request;
}

Turn make_turn(const EngineState& state, AgentRole role, std::string content) {
  Turn turn;
  turn.index = state.transcript.turns.size();
  turn.round = state.round;
  turn.role = role;
  turn.content = std::move(content);
  turn.timestamp = std::chrono::system_clock::now();
  return turn;
}

void record_turn(EngineState& state, Turn turn, const EngineOptions& options) {
  append_turn(state.transcript, turn);
  ++state.stats.turns;
  if (options.on_turn) options.on_turn(state.transcript.turns.back());
}

std::size_t specialist_turn_count(const EngineState& state) {
  return static_cast<std::size_t>(std::count_if(
      state.transcript.turns.begin(), state.transcript.turns.end(),
      [](const Turn& turn) { return is_specialist(turn.role); }));
}

bool has_unresolved_critiques(const EngineState& state) {
  return std::any_of(state.outstanding_critiques.begin(), state.outstanding_critiques.end(),
                     [](const Critique& c) { return !c.resolved; });
}

// After round 1 the critic re-runs only when new specialist turns or
// unresolved critiques exist.
bool critic_runs_now(const EngineState& state, const DeliberationConfig& config) {
  if (!config.critic_enabled) return false;
  if (state.round == 1) return true;
  return specialist_turn_count(state) > state.specialist_turns_at_last_critique ||
         has_unresolved_critiques(state);
}

// Extraction feeds the graph; its failures must not abort the deliberation.
void ingest_with_extraction(EngineState& state, const Turn& turn, ChatBackend& gateway,
                            const EngineOptions& options) {
  ExtractionResult extraction;
  if (!turn.content.empty()) {
    extraction = extract_assertions(turn, gateway, state.graph,
                                    request_tag(options, state.round, turn.role, "extract"));
    for (ExtractedItem& item : extraction.items) {
      auto kept = item.relations;
      kept.erase(std::remove_if(kept.begin(), kept.end(),
                                [&](const auto& rel) { return !state.graph.contains(rel.second); }),
                 kept.end());
      if (kept.size() != item.relations.size()) {
        state.stats.warnings.push_back("dropped extracted relation(s) with unknown target in turn " +
                                       std::to_string(turn.index));
      }
      item.relations = std::move(kept);
    }
  }
  ingest_turn(state.graph, turn, extraction);
}

void step_specialist(EngineState& state, const Scenario& scenario, const DeliberationConfig& config,
                     ChatBackend& gateway, const PersonaSet& personas, const EngineOptions& options) {
  const AgentRole role = state.pending_specialists.front();
  state.pending_specialists.erase(state.pending_specialists.begin());

  const PromptBundle bundle = build_specialist_prompt(role, scenario, state.transcript, config, personas);
  const ChatResponse response =
      gateway.complete(make_request(bundle, options, state.round, role, "turn"));

  Turn turn = make_turn(state, role, response.text);
  if (config.tom_enabled) {
    const ParsedAgentBlocks blocks = parse_agent_blocks(response.text);
    turn.anticipation = blocks.anticipation;
    if (config.critic_enabled) turn.predictions = blocks.predictions;
  }
  record_turn(state, turn, options);

  // a later turn by the critique's target counts as structural resolution
  for (Critique& critique : state.outstanding_critiques) {
    if (critique.target == role) critique.resolved = true;
  }

  ingest_with_extraction(state, state.transcript.turns.back(), gateway, options);

  if (state.pending_specialists.empty()) {
    state.phase = critic_runs_now(state, config) ? EnginePhase::CritiquePhase : EnginePhase::Synthesis;
  }
}

void step_critic(EngineState& state, const Scenario& scenario, const DeliberationConfig& config,
                 ChatBackend& gateway, const PersonaSet& personas, const EngineOptions& options) {
  const PromptBundle bundle = build_critic_prompt(scenario, state.transcript, config, personas);
  const ChatResponse response =
      gateway.complete(make_request(bundle, options, state.round, AgentRole::Critic, "turn"));

  record_turn(state, make_turn(state, AgentRole::Critic, response.text), options);
  state.specialist_turns_at_last_critique = specialist_turn_count(state);
  for (const auto& [target, text] : parse_critiques(response.text)) {
    state.outstanding_critiques.push_back({target, text, false});
  }
  ingest_with_extraction(state, state.transcript.turns.back(), gateway, options);
  state.phase = EnginePhase::Synthesis;
}

// One query per scenario option plus one structural query for risks.
std::string gather_findings(EngineState& state, const Scenario& scenario, const EngineOptions& options) {
  std::string findings;
  auto run_query = [&](const KbQuery& query) {
    if (options.on_kb_retrieve) options.on_kb_retrieve(state.phase);
    const RetrievalOutcome outcome = retrieve(state.graph, query, options.kb);
    ++state.stats.kb_calls;
    if (outcome.fallback_attempted) ++state.stats.asp_fallbacks;
    if (!outcome.warning.empty()) state.stats.warnings.push_back(outcome.warning);
    findings += "Query: " + query.question + "\n" + outcome.findings + "\n";
  };
  for (const std::string& option : scenario.options) {
    run_query(KbQuery{option, std::nullopt});
  }
  KbQuery risk_query{"open risks", KbStructuralQuery{}};
  risk_query.structural->kind = NodeKind::Risk;
  run_query(risk_query);
  if (!findings.empty()) findings.pop_back();
  return findings;
}

void step_synthesis(EngineState& state, const Scenario& scenario, const DeliberationConfig& config,
                    ChatBackend& gateway, const PersonaSet& personas, const EngineOptions& options) {
  const std::string findings = gather_findings(state, scenario, options);
  const PromptBundle bundle =
      build_integrator_prompt(scenario, state.transcript, findings, config, personas);
  const ChatResponse response =
      gateway.complete(make_request(bundle, options, state.round, AgentRole::Integrator, "synthesis"));

  record_turn(state, make_turn(state, AgentRole::Integrator, response.text), options);
  std::string synthesis = response.text;
  if (synthesis.find_first_not_of(" \t\r\n") == std::string::npos) {
    // keep the run alive; the coverage guard will refuse to resolve on this
    synthesis = "(the integrator produced no synthesis this round)";
    state.stats.warnings.push_back("empty synthesis in round " + std::to_string(state.round));
  }
  state.syntheses.push_back(std::move(synthesis));
  state.phase = EnginePhase::Verdict;
}

void finish(EngineState& state, TerminationReason reason) {
  state.transcript.termination = reason;
  if (!state.syntheses.empty()) state.transcript.final_synthesis = state.syntheses.back();
  state.stats.rounds = state.round;
  state.phase = EnginePhase::Done;
}

void step_verdict(EngineState& state, const Scenario& scenario, const DeliberationConfig& config,
                  ChatBackend& gateway, const PersonaSet& personas, const EngineOptions& options) {
  std::vector<std::pair<AgentRole, std::string>> open;
  for (const Critique& critique : state.outstanding_critiques) {
    if (!critique.resolved) open.emplace_back(critique.target, critique.text);
  }
  const PromptBundle bundle = build_orchestrator_prompt(scenario, state.transcript,
                                                        state.syntheses.back(), config, personas, open);
  const ChatResponse response =
      gateway.complete(make_request(bundle, options, state.round, AgentRole::Orchestrator, "verdict"));

  record_turn(state, make_turn(state, AgentRole::Orchestrator, response.text), options);

  auto verdict = parse_orchestrator_verdict(response.text);
  if (verdict && verdict->resolved) {
    const OrchestratorVerdict guarded = apply_premature_close_guard(*verdict, state, scenario);
    if (guarded.resolved) {
      finish(state, TerminationReason::OrchestratorResolved);
      return;
    }
    state.stats.warnings.push_back("premature-close guard overrode RESOLVED in round " +
                                   std::to_string(state.round) + ": " + guarded.gap);
    verdict = guarded;
  }

  AgentRole target = AgentRole::DataLogicSpecialist;
  if (verdict) {
    target = verdict->target;
  } else {
    target = specialist_roles()[state.round_robin_cursor % specialist_roles().size()];
    ++state.round_robin_cursor;
    state.stats.warnings.push_back("unparsable orchestrator verdict in round " +
                                   std::to_string(state.round) + "; continuing round-robin with " +
                                   to_string(target));
  }

  if (state.round >= config.max_rounds) {
    finish(state, TerminationReason::MaxRoundsReached);
    return;
  }
  ++state.round;
  state.pending_specialists = {target};
  state.phase = EnginePhase::SpecialistRound;
}

}  // namespace

std::string to_string(EnginePhase phase) {
  switch (phase) {
    case EnginePhase::SpecialistRound: return "SpecialistRound";
    case EnginePhase::CritiquePhase: return "CritiquePhase";
    case EnginePhase::Synthesis: return "Synthesis";
    case EnginePhase::Verdict: return "Verdict";
    case EnginePhase::Done: return "Done";
  }
  return "?";
}

EngineState make_initial_state(const Scenario& scenario, const DeliberationConfig& config) {
  scenario.validate();
  config.validate();
  EngineState state;
  state.transcript.scenario_id = scenario.id;
  state.transcript.config = config;
  state.pending_specialists.assign(specialist_roles().begin(), specialist_roles().end());
  return state;
}

OrchestratorVerdict apply_premature_close_guard(const OrchestratorVerdict& verdict,
                                                const EngineState& state, const Scenario& scenario) {
  if (!verdict.resolved) return verdict;

  for (const std::string& option : scenario.options) {
    const std::string needle = lower(option);
    const bool mentioned =
        std::any_of(state.syntheses.begin(), state.syntheses.end(),
                    [&](const std::string& synthesis) { return lower(synthesis).find(needle) != std::string::npos; });
    if (!mentioned) {
      return {false, AgentRole::VisionaryStrategist,
              "option '" + option + "' has not been weighed in any synthesis"};
    }
  }
  for (const Critique& critique : state.outstanding_critiques) {
    if (!critique.resolved) {
      return {false, critique.target, "unresolved critique: " + critique.text};
    }
  }
  return verdict;
}

void step(EngineState& state, const Scenario& scenario, const DeliberationConfig& config,
          ChatBackend& gateway, const PersonaSet& personas, const EngineOptions& options) {
  switch (state.phase) {
    case EnginePhase::SpecialistRound:
      step_specialist(state, scenario, config, gateway, personas, options);
      return;
    case EnginePhase::CritiquePhase:
      step_critic(state, scenario, config, gateway, personas, options);
      return;
    case EnginePhase::Synthesis:
      step_synthesis(state, scenario, config, gateway, personas, options);
      return;
    case EnginePhase::Verdict:
      step_verdict(state, scenario, config, gateway, personas, options);
      return;
    case EnginePhase::Done:
      throw Error("step() called on a finished run");
  }
}

RunResult run_deliberation(const Scenario& scenario, const DeliberationConfig& config,
                           ChatBackend& gateway, const PersonaSet& personas,
                           const EngineOptions& options) {
  EngineState state = make_initial_state(scenario, config);
  RunResult result;
  try {
    while (state.phase != EnginePhase::Done) {
      step(state, scenario, config, gateway, personas, options);
    }
  } catch (const std::exception& ex) {
    result.failed = true;
    result.error = ex.what();
    state.stats.rounds = state.round;
    state.stats.warnings.push_back(std::string("run aborted: ") + ex.what());
  }
  result.transcript = std::move(state.transcript);
  result.graph_snapshot = state.graph.snapshot_text();
  result.stats = std::move(state.stats);
  return result;
}

}  // namespace council
