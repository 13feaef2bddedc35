#include <doctest.h>

#include "test_support.hpp"

using namespace council;
namespace ct = council::testing;

namespace {

Scenario golden_scenario() {
  return Scenario::load_file(ct::data_path("scenario_tech_investment.json"));
}

ScriptedBackendSpec golden_script() {
  return ScriptedBackendSpec::load_file(ct::data_path("scripts/golden_demo.jsonl"));
}

EngineOptions engine_options(const std::string& run_id) {
  EngineOptions options;
  options.run_id = run_id;
  options.kb.solver_path = COUNCIL_ASP_BIN;
  return options;
}

std::vector<AgentRole> role_projection(const Transcript& transcript) {
  std::vector<AgentRole> roles;
  for (const Turn& turn : transcript.turns) roles.push_back(turn.role);
  return roles;
}

// Backend that fails hard after a fixed number of requests.
class FailingBackend : public ChatBackend {
 public:
  FailingBackend(ChatBackend& inner, std::size_t allowed) : inner_(inner), allowed_(allowed) {}
  ChatResponse complete(const ChatRequest& request) override {
    if (served_++ >= allowed_) throw ProviderError("backend went away", 503);
    return inner_.complete(request);
  }
  std::string id() const override { return "failing"; }

 private:
  ChatBackend& inner_;
  std::size_t allowed_;
  std::size_t served_ = 0;
};

}  // namespace

TEST_CASE("golden FF run resolves in one round with the expected shape") {
  const Scenario scenario = golden_scenario();
  ScriptedBackend backend(golden_script());
  const RunResult result = run_deliberation(scenario, ct::config_for("FF"), backend,
                                            PersonaSet::defaults(), engine_options("FF-0"));
  REQUIRE_FALSE(result.failed);
  CHECK(result.transcript.termination == TerminationReason::OrchestratorResolved);
  CHECK(result.stats.rounds == 1);
  CHECK(result.transcript.turns.size() == 5);
  const std::vector<AgentRole> expected = {
      AgentRole::DataLogicSpecialist, AgentRole::VisionaryStrategist, AgentRole::ImplementationRealist,
      AgentRole::Integrator, AgentRole::Orchestrator};
  CHECK(role_projection(result.transcript) == expected);
  CHECK_FALSE(result.transcript.final_synthesis.empty());
  CHECK(result.stats.kb_calls == 4);  // three options + one risk query
  CHECK(ct::matches_phase_grammar(result.transcript));
}

TEST_CASE("golden FT run inserts exactly one critic turn per round") {
  const Scenario scenario = golden_scenario();
  ScriptedBackend backend(golden_script());
  const RunResult result = run_deliberation(scenario, ct::config_for("FT"), backend,
                                            PersonaSet::defaults(), engine_options("FT-0"));
  REQUIRE_FALSE(result.failed);
  // round 1 verdict is RESOLVED but the open critique forces a second round
  CHECK(result.stats.rounds == 2);
  const auto roles = role_projection(result.transcript);
  const std::vector<AgentRole> expected = {
      AgentRole::DataLogicSpecialist, AgentRole::VisionaryStrategist, AgentRole::ImplementationRealist,
      AgentRole::Critic, AgentRole::Integrator, AgentRole::Orchestrator,
      AgentRole::ImplementationRealist, AgentRole::Critic, AgentRole::Integrator,
      AgentRole::Orchestrator};
  CHECK(roles == expected);
  CHECK(ct::matches_phase_grammar(result.transcript));
  REQUIRE_FALSE(result.stats.warnings.empty());
  CHECK(result.stats.warnings[0].find("premature-close guard") != std::string::npos);
}

TEST_CASE("golden TT reactivation round contains only the targeted specialist") {
  const Scenario scenario = golden_scenario();
  ScriptedBackend backend(golden_script());
  const RunResult result = run_deliberation(scenario, ct::config_for("TT"), backend,
                                            PersonaSet::defaults(), engine_options("TT-0"));
  REQUIRE_FALSE(result.failed);
  CHECK(result.stats.rounds == 2);
  std::vector<AgentRole> round2_specialists;
  for (const Turn& turn : result.transcript.turns) {
    if (turn.round == 2 && is_specialist(turn.role)) round2_specialists.push_back(turn.role);
  }
  CHECK(round2_specialists == std::vector<AgentRole>{AgentRole::VisionaryStrategist});

  // anticipation and predictions were parsed out of the marked blocks
  const Turn& first = result.transcript.turns[0];
  CHECK_FALSE(first.anticipation.empty());
  CHECK_FALSE(first.predictions.empty());
}

TEST_CASE("replay: the same scenario, config and script yield identical transcripts") {
  const Scenario scenario = golden_scenario();
  for (const char* label : {"FF", "TF", "FT", "TT"}) {
    ScriptedBackend first(golden_script());
    ScriptedBackend second(golden_script());
    const std::string run_id = std::string(label) + "-0";
    const RunResult a = run_deliberation(scenario, ct::config_for(label), first,
                                         PersonaSet::defaults(), engine_options(run_id));
    const RunResult b = run_deliberation(scenario, ct::config_for(label), second,
                                         PersonaSet::defaults(), engine_options(run_id));
    REQUIRE_FALSE(a.failed);
    CHECK(a.transcript == b.transcript);  // equality ignores timestamps
    CHECK(a.graph_snapshot == b.graph_snapshot);
  }
}

TEST_CASE("specialist step transitions into critique or synthesis") {
  const Scenario scenario = ct::test_scenario();
  ct::SimulatedAgentsBackend::Policy policy;
  for (const bool critic_on : {true, false}) {
    ct::SimulatedAgentsBackend backend(scenario, policy, 1);
    const auto config = ct::config_for(critic_on ? "FT" : "FF");
    EngineState state = make_initial_state(scenario, config);
    // two specialists already spoke; only the realist is pending
    for (std::size_t i = 0; i < 2; ++i) {
      Turn turn;
      turn.index = i;
      turn.round = 1;
      turn.role = specialist_roles()[i];
      turn.content = "prior turn";
      append_turn(state.transcript, turn);
    }
    state.pending_specialists = {AgentRole::ImplementationRealist};

    step(state, scenario, config, backend, PersonaSet::defaults(), engine_options("t"));
    CHECK(state.pending_specialists.empty());
    CHECK(state.phase == (critic_on ? EnginePhase::CritiquePhase : EnginePhase::Synthesis));
  }
}

TEST_CASE("verdict step resolves or falls back to round-robin") {
  const Scenario scenario = ct::test_scenario();
  const auto config = ct::config_for("FF");

  SUBCASE("scripted RESOLVED finishes the run") {
    ScriptedBackendSpec spec;
    spec.default_response = "VERDICT: RESOLVED";
    ScriptedBackend backend(std::move(spec));
    EngineState state = make_initial_state(scenario, config);
    state.phase = EnginePhase::Verdict;
    state.syntheses = {"covers Edge Computing, Quantum Computing and Blockchain"};
    step(state, scenario, config, backend, PersonaSet::defaults(), engine_options("t"));
    CHECK(state.phase == EnginePhase::Done);
    CHECK(state.transcript.termination == TerminationReason::OrchestratorResolved);
    CHECK(state.transcript.final_synthesis == state.syntheses.back());
  }

  SUBCASE("unparsable verdicts continue round-robin with a warning") {
    ScriptedBackendSpec spec;
    spec.default_response = "gibberish with no structure";
    ScriptedBackend backend(std::move(spec));
    EngineState state = make_initial_state(scenario, config);
    state.phase = EnginePhase::Verdict;
    state.syntheses = {"partial synthesis"};
    step(state, scenario, config, backend, PersonaSet::defaults(), engine_options("t"));
    CHECK(state.phase == EnginePhase::SpecialistRound);
    CHECK(state.round == 2);
    CHECK(state.pending_specialists == std::vector<AgentRole>{AgentRole::DataLogicSpecialist});
    REQUIRE_FALSE(state.stats.warnings.empty());
    CHECK(state.stats.warnings[0].find("unparsable") != std::string::npos);
  }
}

TEST_CASE("premature-close guard fixtures") {
  const Scenario scenario = ct::test_scenario();
  const OrchestratorVerdict resolved{true, AgentRole::DataLogicSpecialist, ""};

  EngineState covered = make_initial_state(scenario, ct::config_for("FF"));
  covered.syntheses = {"Weighs Edge Computing, then Quantum Computing, then Blockchain."};

  SUBCASE("missing option forces continuation") {
    EngineState state = make_initial_state(scenario, ct::config_for("FF"));
    state.syntheses = {"Weighs Edge Computing against Quantum Computing only."};
    const auto guarded = apply_premature_close_guard(resolved, state, scenario);
    CHECK_FALSE(guarded.resolved);
    CHECK(guarded.target == AgentRole::VisionaryStrategist);
    CHECK(guarded.gap.find("Blockchain") != std::string::npos);
  }

  SUBCASE("full coverage and no critiques pass through") {
    const auto guarded = apply_premature_close_guard(resolved, covered, scenario);
    CHECK(guarded.resolved);
  }

  SUBCASE("option coverage counts any synthesis, case-insensitively") {
    EngineState state = make_initial_state(scenario, ct::config_for("FF"));
    state.syntheses = {"early: edge computing and BLOCKCHAIN", "later: quantum computing"};
    CHECK(apply_premature_close_guard(resolved, state, scenario).resolved);
  }

  SUBCASE("unresolved critique retargets its specialist") {
    EngineState state = make_initial_state(scenario, ct::config_for("FT"));
    state.syntheses = covered.syntheses;
    state.outstanding_critiques.push_back({AgentRole::ImplementationRealist, "cost unsupported", false});
    const auto guarded = apply_premature_close_guard(resolved, state, scenario);
    CHECK_FALSE(guarded.resolved);
    CHECK(guarded.target == AgentRole::ImplementationRealist);
  }

  SUBCASE("resolved critiques do not block") {
    EngineState state = make_initial_state(scenario, ct::config_for("FT"));
    state.syntheses = covered.syntheses;
    state.outstanding_critiques.push_back({AgentRole::ImplementationRealist, "cost unsupported", true});
    CHECK(apply_premature_close_guard(resolved, state, scenario).resolved);
  }
}

TEST_CASE("gating: critic turns and anticipation fields obey the config") {
  const Scenario scenario = ct::test_scenario();
  std::mt19937 seeds(404);
  for (const char* label : {"FF", "TF", "FT", "TT"}) {
    const auto config = ct::config_for(label, 3);
    ct::SimulatedAgentsBackend::Policy policy;
    policy.anticipation = config.tom_enabled;
    policy.predictions = config.tom_enabled && config.critic_enabled;
    policy.critic_issues_critiques = false;
    policy.resolve_at_round = 1 + static_cast<int>(seeds() % 2);
    ct::SimulatedAgentsBackend backend(scenario, policy, seeds());

    const RunResult result = run_deliberation(scenario, config, backend, PersonaSet::defaults(),
                                              engine_options(std::string(label) + "-g"));
    REQUIRE_FALSE(result.failed);
    std::size_t critic_turns = 0;
    std::size_t anticipations = 0;
    for (const Turn& turn : result.transcript.turns) {
      if (turn.role == AgentRole::Critic) ++critic_turns;
      if (!turn.anticipation.empty()) ++anticipations;
      if (!turn.predictions.empty()) {
        CHECK(config.tom_enabled);
        CHECK(config.critic_enabled);
      }
    }
    if (config.critic_enabled) CHECK(critic_turns >= 1);
    else CHECK(critic_turns == 0);
    if (config.tom_enabled) CHECK(anticipations >= 1);
    else CHECK(anticipations == 0);
  }
}

TEST_CASE("markers in responses are ignored when the toggles are off") {
  const Scenario scenario = ct::test_scenario();
  // backend emits anticipation/prediction blocks regardless of config
  ct::SimulatedAgentsBackend::Policy policy;
  policy.anticipation = true;
  policy.predictions = true;
  policy.resolve_at_round = 1;
  ct::SimulatedAgentsBackend backend(scenario, policy, 9);
  const RunResult result = run_deliberation(scenario, ct::config_for("FF"), backend,
                                            PersonaSet::defaults(), engine_options("sneaky"));
  REQUIRE_FALSE(result.failed);
  for (const Turn& turn : result.transcript.turns) {
    CHECK(turn.anticipation.empty());
    CHECK(turn.predictions.empty());
  }
}

TEST_CASE("adversarial backends cannot break termination or the phase grammar") {
  const Scenario scenario = ct::test_scenario();
  std::mt19937 seeds(2024);
  for (int iteration = 0; iteration < 40; ++iteration) {
    const char* label = std::vector<const char*>{"FF", "TF", "FT", "TT"}[seeds() % 4];
    const int max_rounds = 1 + static_cast<int>(seeds() % 4);
    const auto config = ct::config_for(label, max_rounds);
    ct::SimulatedAgentsBackend::Policy policy;
    policy.adversarial = true;
    ct::SimulatedAgentsBackend backend(scenario, policy, seeds());

    const RunResult result = run_deliberation(scenario, config, backend, PersonaSet::defaults(),
                                              engine_options("adv-" + std::to_string(iteration)));
    REQUIRE_FALSE(result.failed);
    REQUIRE(result.transcript.termination.has_value());
    REQUIRE(result.stats.rounds <= max_rounds);
    REQUIRE(result.transcript.turns.size() <= static_cast<std::size_t>(max_rounds) * 6);
    REQUIRE(ct::matches_phase_grammar(result.transcript));
  }
}

TEST_CASE("kb retrieval happens only during synthesis and only for the integrator") {
  const Scenario scenario = ct::test_scenario();
  ct::SimulatedAgentsBackend::Policy policy;
  policy.resolve_at_round = 2;
  ct::SimulatedAgentsBackend backend(scenario, policy, 5);

  std::vector<EnginePhase> observed;
  EngineOptions options = engine_options("excl");
  options.on_kb_retrieve = [&observed](EnginePhase phase) { observed.push_back(phase); };

  const RunResult result = run_deliberation(scenario, ct::config_for("TT", 3), backend,
                                            PersonaSet::defaults(), options);
  REQUIRE_FALSE(result.failed);
  CHECK(observed.size() == result.stats.kb_calls);
  for (const EnginePhase phase : observed) CHECK(phase == EnginePhase::Synthesis);
  // one query per option plus the risk query, once per synthesis
  CHECK(result.stats.kb_calls ==
        (scenario.options.size() + 1) * static_cast<std::size_t>(result.stats.rounds));
}

TEST_CASE("every engine request carries a well-formed tag") {
  const Scenario scenario = ct::test_scenario();
  ct::SimulatedAgentsBackend::Policy policy;
  policy.resolve_at_round = 1;
  ct::SimulatedAgentsBackend inner(scenario, policy, 3);
  ct::RecordingBackend recorder(inner);

  const RunResult result = run_deliberation(scenario, ct::config_for("TT"), recorder,
                                            PersonaSet::defaults(), engine_options("tags"));
  REQUIRE_FALSE(result.failed);
  REQUIRE_FALSE(recorder.requests.empty());
  for (const ChatRequest& request : recorder.requests) {
    CHECK_FALSE(request.request_tag.empty());
    CHECK(request.request_tag.rfind("tags/", 0) == 0);
    const auto slashes = std::count(request.request_tag.begin(), request.request_tag.end(), '/');
    CHECK(slashes == 3);  // run/round/role/purpose
  }
}

TEST_CASE("gateway failures abort with a partial transcript and no termination") {
  const Scenario scenario = ct::test_scenario();
  ct::SimulatedAgentsBackend::Policy policy;
  ct::SimulatedAgentsBackend inner(scenario, policy, 8);
  FailingBackend backend(inner, 3);

  const RunResult result = run_deliberation(scenario, ct::config_for("FF"), backend,
                                            PersonaSet::defaults(), engine_options("fail"));
  CHECK(result.failed);
  CHECK_FALSE(result.transcript.termination.has_value());
  CHECK(result.error.find("backend went away") != std::string::npos);
  CHECK_FALSE(result.transcript.turns.empty());
}

TEST_CASE("graph snapshot reflects the golden ingestion") {
  const Scenario scenario = golden_scenario();
  ScriptedBackend backend(golden_script());
  const RunResult result = run_deliberation(scenario, ct::config_for("FF"), backend,
                                            PersonaSet::defaults(), engine_options("FF-0"));
  REQUIRE_FALSE(result.failed);
  // 3 utterances + 2+2+2 extracted items
  CHECK(std::count(result.graph_snapshot.begin(), result.graph_snapshot.end(), '\n') >= 9);
  CHECK(result.graph_snapshot.find("\"kind\":\"Risk\"") != std::string::npos);
  CHECK(result.graph_snapshot.find("\"relation\":\"Addresses\"") != std::string::npos);
}
