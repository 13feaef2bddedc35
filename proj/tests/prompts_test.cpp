#include <doctest.h>

#include "test_support.hpp"

using namespace council;
namespace ct = council::testing;

namespace {

const PersonaSet& personas() {
  static const PersonaSet set = PersonaSet::defaults();
  return set;
}

Transcript history_with(const std::vector<std::pair<AgentRole, std::string>>& turns,
                        const std::string& label = "TT") {
  Transcript transcript;
  transcript.scenario_id = "s";
  transcript.config = council::testing::config_for(label);
  for (std::size_t i = 0; i < turns.size(); ++i) {
    Turn turn;
    turn.index = i;
    turn.round = 1;
    turn.role = turns[i].first;
    turn.content = turns[i].second;
    append_turn(transcript, turn);
  }
  return transcript;
}

Transcript full_round(const std::string& label = "TT") {
  return history_with({{AgentRole::DataLogicSpecialist, "data angle"},
                       {AgentRole::VisionaryStrategist, "vision angle"},
                       {AgentRole::ImplementationRealist, "realist angle"}},
                      label);
}

std::string whole(const PromptBundle& bundle) { return bundle.system_prompt + "\n" + bundle.user_prompt; }

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

std::string history_slice(const std::string& user_prompt) {
  const auto begin = user_prompt.find(kHistoryBegin);
  const auto end = user_prompt.find(kHistoryEnd);
  REQUIRE(begin != std::string::npos);
  REQUIRE(end != std::string::npos);
  return user_prompt.substr(begin, end - begin);
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  std::size_t pos = haystack.find(needle);
  while (pos != std::string::npos) {
    ++count;
    pos = haystack.find(needle, pos + needle.size());
  }
  return count;
}

}  // namespace

TEST_CASE("TT specialist prompt carries anticipation and prediction instructions") {
  const auto bundle = build_specialist_prompt(AgentRole::DataLogicSpecialist,
                                              council::testing::test_scenario(), Transcript{},
                                              council::testing::config_for("TT"), personas());
  CHECK(bundle.expects_anticipation_block);
  CHECK(bundle.expects_predictions);
  CHECK(contains(bundle.user_prompt, kAnticipationBegin));
  CHECK(contains(bundle.user_prompt, kAnticipationEnd));
  CHECK(contains(bundle.user_prompt, kPredictionsMarker));
  CHECK(contains(bundle.user_prompt, "counterargument"));
  // names at least one peer alongside the anticipation instruction
  const bool names_peer = contains(bundle.user_prompt, "VisionaryStrategist") &&
                          contains(bundle.user_prompt, "ImplementationRealist");
  CHECK(names_peer);
}

TEST_CASE("FF specialist prompt contains no reserved markers") {
  const auto bundle = build_specialist_prompt(AgentRole::DataLogicSpecialist,
                                              council::testing::test_scenario(), Transcript{},
                                              council::testing::config_for("FF"), personas());
  CHECK_FALSE(bundle.expects_anticipation_block);
  CHECK_FALSE(bundle.expects_predictions);
  const std::string text = whole(bundle);
  CHECK_FALSE(contains(text, kAnticipationBegin));
  CHECK_FALSE(contains(text, kAnticipationEnd));
  CHECK_FALSE(contains(text, kPredictionsMarker));
}

TEST_CASE("TF prompt embeds prior turns verbatim") {
  const Transcript history = history_with({{AgentRole::DataLogicSpecialist, "UNIQUE-ALPHA content"},
                                           {AgentRole::VisionaryStrategist, "UNIQUE-BETA content"}},
                                          "TF");
  const auto bundle =
      build_specialist_prompt(AgentRole::VisionaryStrategist, council::testing::test_scenario(), history,
                              council::testing::config_for("TF"), personas());
  CHECK(bundle.expects_anticipation_block);
  CHECK_FALSE(bundle.expects_predictions);  // predictions need both toggles
  CHECK(contains(bundle.user_prompt, "UNIQUE-ALPHA content"));
  CHECK(contains(bundle.user_prompt, "UNIQUE-BETA content"));
}

TEST_CASE("gating soundness holds across roles and histories") {
  std::mt19937 rng(11);
  const Scenario scenario = council::testing::test_scenario();
  for (int iteration = 0; iteration < 40; ++iteration) {
    Transcript history;
    history.config = council::testing::config_for(iteration % 2 == 0 ? "FF" : "FT");
    for (std::size_t i = 0; i < rng() % 4; ++i) {
      Turn turn;
      turn.index = i;
      turn.round = 1;
      turn.role = specialist_roles()[i % 3];
      turn.content = "turn content " + std::to_string(i);
      append_turn(history, turn);
    }
    for (AgentRole role : specialist_roles()) {
      const auto bundle = build_specialist_prompt(role, scenario, history, history.config, personas());
      const std::string text = whole(bundle);
      CHECK_FALSE(contains(text, kAnticipationBegin));
      CHECK_FALSE(contains(text, kPredictionsMarker));
    }
  }
}

TEST_CASE("prompt builders are pure") {
  const Transcript history = full_round();
  const Scenario scenario = council::testing::test_scenario();
  const auto config = council::testing::config_for("TT");
  const auto a = build_specialist_prompt(AgentRole::ImplementationRealist, scenario, history, config,
                                         personas());
  const auto b = build_specialist_prompt(AgentRole::ImplementationRealist, scenario, history, config,
                                         personas());
  CHECK(a.system_prompt == b.system_prompt);
  CHECK(a.user_prompt == b.user_prompt);
}

TEST_CASE("history fidelity: every prior turn appears exactly once in the history section") {
  const Transcript history = history_with({{AgentRole::DataLogicSpecialist, "MARKER-ONE"},
                                           {AgentRole::VisionaryStrategist, "MARKER-TWO"},
                                           {AgentRole::ImplementationRealist, "MARKER-THREE"}});
  const Scenario scenario = council::testing::test_scenario();
  const auto config = council::testing::config_for("TT");

  const auto specialist =
      build_specialist_prompt(AgentRole::DataLogicSpecialist, scenario, history, config, personas());
  const auto critic = build_critic_prompt(scenario, history, config, personas());
  const auto integrator = build_integrator_prompt(scenario, history, "findings", config, personas());
  for (const auto* bundle : {&specialist, &critic, &integrator}) {
    const std::string slice = history_slice(bundle->user_prompt);
    for (const char* marker : {"MARKER-ONE", "MARKER-TWO", "MARKER-THREE"}) {
      CHECK(count_occurrences(slice, marker) == 1);
    }
  }
}

TEST_CASE("critic prompt enumerates the mandated checks") {
  const Scenario scenario = council::testing::test_scenario();
  const Transcript history = full_round("FT");

  const auto ft = build_critic_prompt(scenario, history, council::testing::config_for("FT"), personas());
  CHECK(contains(ft.user_prompt, "consistency"));
  CHECK(contains(ft.user_prompt, "lacking explicit support"));
  CHECK(contains(ft.user_prompt, "overlooked"));
  CHECK_FALSE(contains(whole(ft), kPredictionsMarker));
  CHECK(contains(ft.user_prompt, "Do not propose solutions"));

  const auto tt = build_critic_prompt(scenario, full_round("TT"), council::testing::config_for("TT"),
                                      personas());
  CHECK(contains(tt.user_prompt, kPredictionsMarker));
  CHECK(contains(tt.user_prompt, "predictions"));
}

TEST_CASE("critic prompt requires a complete first round") {
  const Scenario scenario = council::testing::test_scenario();
  const Transcript two_specialists = history_with({{AgentRole::DataLogicSpecialist, "a"},
                                                   {AgentRole::VisionaryStrategist, "b"}},
                                                  "FT");
  CHECK_THROWS_AS(
      build_critic_prompt(scenario, two_specialists, council::testing::config_for("FT"), personas()),
      PreconditionError);
}

TEST_CASE("integrator prompt injects findings inside the delimited section") {
  const Scenario scenario = council::testing::test_scenario();
  const Transcript history = full_round("FF");
  const auto config = council::testing::config_for("FF");

  const auto bundle = build_integrator_prompt(scenario, history, "F1", config, personas());
  const auto begin = bundle.user_prompt.find(kFindingsBegin);
  const auto end = bundle.user_prompt.find(kFindingsEnd);
  REQUIRE(begin != std::string::npos);
  REQUIRE(end != std::string::npos);
  CHECK(bundle.user_prompt.substr(begin, end - begin).find("F1") != std::string::npos);

  const auto tt = build_integrator_prompt(scenario, full_round(), "F1",
                                          council::testing::config_for("TT"), personas());
  CHECK(contains(tt.user_prompt, "discrepancy"));
  CHECK_FALSE(contains(bundle.user_prompt, "discrepancy"));

  const auto empty = build_integrator_prompt(scenario, history, "", config, personas());
  const auto slice = empty.user_prompt.substr(empty.user_prompt.find(kFindingsBegin));
  CHECK(contains(slice, kNoFindingsMarker));
}

TEST_CASE("orchestrator prompt lists heuristics verbatim and open critiques") {
  const Scenario scenario = council::testing::test_scenario();
  const Transcript history = full_round("FT");
  const auto config = council::testing::config_for("FT");

  const std::vector<std::pair<AgentRole, std::string>> critiques = {
      {AgentRole::ImplementationRealist, "cost claim unsupported"}};
  const auto bundle =
      build_orchestrator_prompt(scenario, history, "the synthesis", config, personas(), critiques);
  for (const std::string& rule : personas().orchestrator_heuristics) {
    CHECK(contains(bundle.user_prompt, rule));
  }
  CHECK(contains(bundle.user_prompt, "cost claim unsupported"));
  CHECK(contains(bundle.user_prompt, "ImplementationRealist"));

  CHECK_THROWS_AS(build_orchestrator_prompt(scenario, history, "", config, personas(), {}),
                  PreconditionError);
}

TEST_CASE("verdict parser handles the structured forms") {
  const auto resolved = parse_orchestrator_verdict("Some prose.\nVERDICT: RESOLVED\nmore prose");
  REQUIRE(resolved.has_value());
  CHECK(resolved->resolved);

  const auto cont = parse_orchestrator_verdict(
      "VERDICT: CONTINUE / TARGET: VisionaryStrategist / GAP: market sizing unclear");
  REQUIRE(cont.has_value());
  CHECK_FALSE(cont->resolved);
  CHECK(cont->target == AgentRole::VisionaryStrategist);
  CHECK(cont->gap == "market sizing unclear");

  CHECK_FALSE(parse_orchestrator_verdict("free prose with no marker").has_value());
  CHECK_FALSE(parse_orchestrator_verdict("VERDICT: CONTINUE no target named").has_value());
  CHECK_FALSE(parse_orchestrator_verdict("VERDICT: CONTINUE / TARGET: Critic / GAP: x").has_value());
}

TEST_CASE("verdict parser ignores malformed blocks before a valid one") {
  const auto verdict = parse_orchestrator_verdict(
      "VERDICT: maybe?\nVERDICT: CONTINUE / TARGET: DataLogicSpecialist / GAP: depth");
  REQUIRE(verdict.has_value());
  CHECK(verdict->target == AgentRole::DataLogicSpecialist);
}

TEST_CASE("verdict parser survives marker-free fuzz") {
  std::mt19937 rng(5);
  for (int iteration = 0; iteration < 200; ++iteration) {
    std::string text = council::testing::random_unicode_text(rng, 60);
    // strip accidental markers (the pieces pool contains none, but be sure)
    REQUIRE(text.find(kVerdictMarker) == std::string::npos);
    CHECK_FALSE(parse_orchestrator_verdict(text).has_value());
  }
}

TEST_CASE("agent block parser extracts anticipation and predictions") {
  const std::string response =
      "ANTICIPATION: ImplementationRealist - will press on budget\nEND ANTICIPATION\n"
      "My argument follows.\n"
      "PREDICTIONS:\n"
      "VisionaryStrategist: upside is being undersold\n"
      "ImplementationRealist: integration cost is underestimated\n";
  const auto blocks = parse_agent_blocks(response);
  CHECK(blocks.anticipation == "ImplementationRealist - will press on budget");
  REQUIRE(blocks.predictions.size() == 2);
  CHECK(blocks.predictions[0].first == AgentRole::VisionaryStrategist);
  CHECK(blocks.predictions[1].second == "integration cost is underestimated");

  const auto none = parse_agent_blocks("plain reply without any blocks");
  CHECK(none.anticipation.empty());
  CHECK(none.predictions.empty());

  const auto unterminated = parse_agent_blocks("ANTICIPATION: peer - angle\n\nrest of the reply");
  CHECK(unterminated.anticipation == "peer - angle");
}

TEST_CASE("critique parser keeps only specialist targets") {
  const std::string critic_text =
      "Observations follow.\n"
      "CRITIQUE: ImplementationRealist: cost figure unsupported\n"
      "CRITIQUE: Integrator: not a valid target\n"
      "CRITIQUE: nonsense line\n"
      "CRITIQUE: DataLogicSpecialist: contradicts earlier claim\n";
  const auto critiques = parse_critiques(critic_text);
  REQUIRE(critiques.size() == 2);
  CHECK(critiques[0].first == AgentRole::ImplementationRealist);
  CHECK(critiques[0].second == "cost figure unsupported");
  CHECK(critiques[1].first == AgentRole::DataLogicSpecialist);
}

TEST_CASE("no prompt builder embeds configuration labels or toggle phrases") {
  const Scenario scenario = ct::test_scenario();
  auto scan = [](const std::string& text) {
    for (const std::string& phrase : {std::string(" FF "), std::string(" TF "), std::string(" FT "),
                                      std::string(" TT "), std::string("ToM enabled"),
                                      std::string("critic enabled"), std::string("tom_enabled"),
                                      std::string("critic_enabled")}) {
      if (text.find(phrase) != std::string::npos) return true;
    }
    return false;
  };
  for (const char* label : {"FF", "TF", "FT", "TT"}) {
    const auto config = ct::config_for(label);
    const Transcript history = full_round(label);
    for (AgentRole role : specialist_roles()) {
      CHECK_FALSE(scan(whole(build_specialist_prompt(role, scenario, history, config, personas()))));
    }
    if (config.critic_enabled) {
      CHECK_FALSE(scan(whole(build_critic_prompt(scenario, history, config, personas()))));
    }
    CHECK_FALSE(scan(whole(build_integrator_prompt(scenario, history, "findings", config, personas()))));
    CHECK_FALSE(scan(whole(
        build_orchestrator_prompt(scenario, history, "synthesis", config, personas(), {}))));
  }
}

TEST_CASE("persona files round-trip and validate") {
  const PersonaSet& defaults = personas();
  const PersonaSet parsed = PersonaSet::from_json_text(defaults.to_json_text());
  CHECK(parsed.orchestrator_heuristics == defaults.orchestrator_heuristics);
  CHECK(parsed.persona(AgentRole::Critic).focus_description ==
        defaults.persona(AgentRole::Critic).focus_description);
  CHECK(parsed.persona(AgentRole::DataLogicSpecialist).peer_expectations ==
        defaults.persona(AgentRole::DataLogicSpecialist).peer_expectations);

  // a specialist missing a peer expectation must be rejected
  PersonaSet broken = defaults;
  broken.personas[AgentRole::DataLogicSpecialist].peer_expectations.erase(
      AgentRole::VisionaryStrategist);
  CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("shipped persona file matches the built-in defaults") {
  const PersonaSet shipped = PersonaSet::load_file(council::testing::data_path("personas.json"));
  CHECK(shipped.to_json_text() == personas().to_json_text());
}
