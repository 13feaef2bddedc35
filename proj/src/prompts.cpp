#include "council/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace council {

using json = nlohmann::json;

namespace {

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r\n");
  return text.substr(begin, end - begin + 1);
}

std::string scenario_section(const Scenario& scenario) {
  std::string out = "DECISION PROBLEM:\n" + scenario.brief + "\n\nOptions under consideration:\n";
  for (std::size_t i = 0; i < scenario.options.size(); ++i) {
    out += std::to_string(i + 1) + ". " + scenario.options[i] + "\n";
  }
  if (!scenario.constraints.empty()) {
    out += "\nConstraints:\n";
    for (const auto& constraint : scenario.constraints) out += "- " + constraint + "\n";
  }
  if (!scenario.budget_text.empty()) out += "\nBudget: " + scenario.budget_text + "\n";
  return out;
}

std::string history_section(const Transcript& history) {
  std::string out = std::string(kHistoryBegin) + "\n";
  if (history.turns.empty()) {
    out += "(no prior turns)\n";
  } else {
    for (const Turn& turn : history.turns) {
      out += "[turn " + std::to_string(turn.index) + " | round " + std::to_string(turn.round) + " | " +
             to_string(turn.role) + "]\n" + turn.content + "\n";
    }
  }
  out += std::string(kHistoryEnd) + "\n";
  return out;
}

std::vector<AgentRole> peers_of(AgentRole role) {
  std::vector<AgentRole> peers;
  for (AgentRole specialist : specialist_roles()) {
    if (specialist != role) peers.push_back(specialist);
  }
  return peers;
}

}  // namespace

const PersonaSpec& PersonaSet::persona(AgentRole role) const {
  auto it = personas.find(role);
  if (it == personas.end()) throw Error("no persona defined for " + to_string(role));
  return it->second;
}

void PersonaSet::validate() const {
  for (AgentRole role : {AgentRole::DataLogicSpecialist, AgentRole::VisionaryStrategist,
                         AgentRole::ImplementationRealist, AgentRole::Critic, AgentRole::Integrator,
                         AgentRole::Orchestrator}) {
    const PersonaSpec& spec = persona(role);
    if (spec.focus_description.empty()) throw Error("persona " + to_string(role) + " needs a focus");
    if (is_specialist(role)) {
      const auto peers = peers_of(role);
      if (spec.peer_expectations.size() != 2) {
        throw Error("persona " + to_string(role) + " must expect exactly its two peers");
      }
      for (AgentRole peer : peers) {
        if (!spec.peer_expectations.count(peer)) {
          throw Error("persona " + to_string(role) + " lacks an expectation for " + to_string(peer));
        }
      }
    }
  }
  if (orchestrator_heuristics.empty()) throw Error("orchestrator heuristics must not be empty");
}

PersonaSet PersonaSet::defaults() {
  PersonaSet set;
  set.note =
      "Default personas for strategic-investment deliberations. Focus texts, peer "
      "expectations and routing heuristics are plain data: edit this file to retarget "
      "the engine at another scenario without recompiling.";

  PersonaSpec data_logic;
  data_logic.role = AgentRole::DataLogicSpecialist;
  data_logic.focus_description =
      "You analyze the technical viability of the candidate options: decompose each into "
      "measurable technical aspects, examine interdependencies between systems, and probe "
      "scalability limits. Argue from evidence, surface implementation risks, and check that "
      "technology claims actually hold up.";
  data_logic.peer_expectations = {
      {AgentRole::VisionaryStrategist,
       "will emphasize disruptive potential and long-term market positioning over technical limits"},
      {AgentRole::ImplementationRealist,
       "will press on near-term feasibility, cost and operational fit"},
  };

  PersonaSpec visionary;
  visionary.role = AgentRole::VisionaryStrategist;
  visionary.focus_description =
      "You weigh the long-term implications and market potential of the candidate options: map "
      "emerging use cases, industry transformation and adoption patterns, and argue for "
      "competitive positioning rather than technical limitations.";
  visionary.peer_expectations = {
      {AgentRole::DataLogicSpecialist,
       "will be cautious about feasibility and demand technical evidence for every claim"},
      {AgentRole::ImplementationRealist,
       "will put operational constraints and near-term return first"},
  };

  PersonaSpec realist;
  realist.role = AgentRole::ImplementationRealist;
  realist.focus_description =
      "You focus on resource availability, operational bottlenecks and cost: give a pragmatic "
      "read on investment feasibility, weigh return against near-term risk, and challenge "
      "whether proposals fit existing infrastructure and workforce capability.";
  realist.peer_expectations = {
      {AgentRole::DataLogicSpecialist,
       "will be technically thorough but may gloss over practical deployment issues"},
      {AgentRole::VisionaryStrategist,
       "will stress future opportunity and downplay current risks"},
  };

  PersonaSpec critic;
  critic.role = AgentRole::Critic;
  critic.focus_description =
      "You audit the specialists' reasoning: point out weaknesses, logical fallacies and "
      "unsupported statements so the arguments can be improved. You never advance solutions of "
      "your own.";

  PersonaSpec integrator;
  integrator.role = AgentRole::Integrator;
  integrator.focus_description =
      "You merge the specialist contributions into one coherent recommendation, balancing the "
      "diversity of perspectives against the cohesion of the final argument.";

  PersonaSpec orchestrator;
  orchestrator.role = AgentRole::Orchestrator;
  orchestrator.focus_description =
      "You decide whether the discussion has reached a satisfactory resolution or which "
      "specialist must be reactivated to close a remaining gap.";

  for (PersonaSpec* spec : {&data_logic, &visionary, &realist, &critic, &integrator, &orchestrator}) {
    set.personas[spec->role] = *spec;
  }
  set.orchestrator_heuristics = {
      "If the technical feasibility of the proposed answer is in doubt, reactivate the "
      "DataLogicSpecialist.",
      "If market uncertainty persists, reactivate the VisionaryStrategist.",
      "If critic findings remain unaddressed, reactivate the specialist the critique targets.",
  };
  set.validate();
  return set;
}

PersonaSet PersonaSet::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("personas: ") + ex.what(), 1);
  }
  PersonaSet set;
  set.note = doc.value("note", "");
  for (const auto& entry : doc.at("personas")) {
    PersonaSpec spec;
    auto role = role_from_string(entry.at("role").get<std::string>());
    if (!role) throw Error("personas: unknown role " + entry.at("role").get<std::string>());
    spec.role = *role;
    spec.focus_description = entry.value("focus", "");
    if (entry.contains("peer_expectations")) {
      for (const auto& [peer_name, angle] : entry.at("peer_expectations").items()) {
        auto peer = role_from_string(peer_name);
        if (!peer) throw Error("personas: unknown peer role " + peer_name);
        spec.peer_expectations[*peer] = angle.get<std::string>();
      }
    }
    set.personas[spec.role] = std::move(spec);
  }
  if (doc.contains("orchestrator_heuristics")) {
    for (const auto& rule : doc.at("orchestrator_heuristics")) {
      set.orchestrator_heuristics.push_back(rule.get<std::string>());
    }
  }
  set.validate();
  return set;
}

PersonaSet PersonaSet::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open persona file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string PersonaSet::to_json_text() const {
  json persona_list = json::array();
  for (AgentRole role : {AgentRole::DataLogicSpecialist, AgentRole::VisionaryStrategist,
                         AgentRole::ImplementationRealist, AgentRole::Critic, AgentRole::Integrator,
                         AgentRole::Orchestrator}) {
    const PersonaSpec& spec = persona(role);
    json entry{{"role", to_string(role)}, {"focus", spec.focus_description}};
    if (!spec.peer_expectations.empty()) {
      json expectations = json::object();
      for (const auto& [peer, angle] : spec.peer_expectations) expectations[to_string(peer)] = angle;
      entry["peer_expectations"] = std::move(expectations);
    }
    persona_list.push_back(std::move(entry));
  }
  json doc{
      {"note", note},
      {"personas", std::move(persona_list)},
      {"orchestrator_heuristics", orchestrator_heuristics},
  };
  return doc.dump(2) + "\n";
}

PromptBundle build_specialist_prompt(AgentRole role, const Scenario& scenario, const Transcript& history,
                                     const DeliberationConfig& config, const PersonaSet& personas) {
  if (!is_specialist(role)) throw Error("build_specialist_prompt: " + to_string(role) + " is not a specialist");
  const PersonaSpec& spec = personas.persona(role);

  PromptBundle bundle;
  bundle.expects_anticipation_block = config.tom_enabled;
  bundle.expects_predictions = config.tom_enabled && config.critic_enabled;

  bundle.system_prompt = "You are the " + to_string(role) +
                         ", one of three specialists advising on a strategic decision. " +
                         spec.focus_description + " Reply in plain prose and build on the discussion " +
                         "instead of repeating it.";

  std::string user = scenario_section(scenario) + "\n" + history_section(history) + "\n";
  if (config.tom_enabled) {
    user += "Your peers and the angles they are likely to take:\n";
    for (AgentRole peer : peers_of(role)) {
      user += "- " + to_string(peer) + ": " + spec.peer_expectations.at(peer) + "\n";
    }
    user += std::string("\nBefore contributing, briefly anticipate the likely argument of one named "
                        "peer. Open your reply with a block of exactly this form:\n") +
            kAnticipationBegin + " <PeerRole> - <the angle you expect them to take>\n" + kAnticipationEnd +
            "\nThen frame your own contribution to complement or counter that anticipated view.\n";
  }
  user += "\nTask: contribute your analysis of the options from your mandate. Be concrete, engage "
          "with points already made, and take a clear position on how the budget should lean.\n";
  if (bundle.expects_predictions) {
    user += std::string("\nFinish your reply with a block predicting the strongest counterargument "
                        "each peer could raise against your position, one line per peer:\n") +
            kPredictionsMarker + "\n";
    for (AgentRole peer : peers_of(role)) {
      user += to_string(peer) + ": <predicted counterargument>\n";
    }
  }
  bundle.user_prompt = std::move(user);
  return bundle;
}

PromptBundle build_critic_prompt(const Scenario& scenario, const Transcript& history,
                                 const DeliberationConfig& config, const PersonaSet& personas) {
  if (!config.critic_enabled) throw PreconditionError("critic prompt requested with the critic disabled");
  std::set<AgentRole> seen;
  for (const Turn& turn : history.turns) {
    if (is_specialist(turn.role)) seen.insert(turn.role);
  }
  if (seen.size() < specialist_roles().size()) {
    throw PreconditionError("critique requested before all specialists have spoken");
  }

  const PersonaSpec& spec = personas.persona(AgentRole::Critic);
  PromptBundle bundle;
  bundle.system_prompt = "You are the Critic. " + spec.focus_description;

  std::string user = scenario_section(scenario) + "\n" + history_section(history) + "\n";
  user += "Audit the specialist turns above. Check each of the following:\n"
          "1. Logical consistency between turns: flag contradictions and reasoning that does not follow.\n"
          "2. Claims lacking explicit support within the dialogue.\n"
          "3. Constraints stated in the decision problem that the discussion has overlooked.\n";
  if (config.tom_enabled) {
    user += std::string("4. The accuracy of each specialist's predictions about its peers: compare every ") +
            kPredictionsMarker + " block against what the peers actually argued and flag mismatches.\n";
  }
  user += std::string("\nReport each finding on its own line, in exactly this form:\n") + kCritiqueMarker +
          " <SpecialistRole>: <finding>\nDo not propose solutions of your own; only critique what was "
          "argued. If nothing is wrong, say so without the marker.\n";
  bundle.user_prompt = std::move(user);
  return bundle;
}

PromptBundle build_integrator_prompt(const Scenario& scenario, const Transcript& history,
                                     const std::string& kb_findings, const DeliberationConfig& config,
                                     const PersonaSet& personas) {
  if (history.turns.empty()) throw PreconditionError("integrator needs a non-empty history");
  const PersonaSpec& spec = personas.persona(AgentRole::Integrator);

  PromptBundle bundle;
  bundle.system_prompt = "You are the Integrator. " + spec.focus_description +
                         " You alone can consult the stored discussion findings quoted in the task.";

  std::string user = scenario_section(scenario) + "\n" + history_section(history) + "\n";
  user += std::string(kFindingsBegin) + "\n";
  user += kb_findings.empty() ? std::string(kNoFindingsMarker) : kb_findings;
  user += std::string("\n") + kFindingsEnd + "\n\n";
  user += "Synthesize the specialist perspectives into one coherent recommendation. Weigh every "
          "option by name";
  for (std::size_t i = 0; i < scenario.options.size(); ++i) {
    user += (i == 0 ? ": " : ", ") + scenario.options[i];
  }
  user += ". Compare the trade-offs, state the allocation you recommend, and sketch an "
          "implementation roadmap. Keep the synthesis cohesive while preserving the diversity of "
          "the views expressed.\n";
  if (config.tom_enabled) {
    user += "\nThe specialists anticipated each other's arguments. Where a stated expectation or "
            "prediction does not match what a peer actually argued, flag the discrepancy "
            "explicitly.\n";
  }
  bundle.user_prompt = std::move(user);
  return bundle;
}

PromptBundle build_orchestrator_prompt(const Scenario& scenario, const Transcript& history,
                                       const std::string& synthesis, const DeliberationConfig& config,
                                       const PersonaSet& personas,
                                       const std::vector<std::pair<AgentRole, std::string>>& open_critiques) {
  if (synthesis.empty()) throw PreconditionError("orchestrator needs a non-empty synthesis");
  (void)config;
  const PersonaSpec& spec = personas.persona(AgentRole::Orchestrator);

  PromptBundle bundle;
  bundle.system_prompt = "You are the Orchestrator. " + spec.focus_description;

  std::string user = scenario_section(scenario) + "\n" + history_section(history) + "\n";
  user += "CURRENT SYNTHESIS:\n" + synthesis + "\nEND SYNTHESIS\n\n";
  user += "OPEN CRITIC FINDINGS:\n";
  if (open_critiques.empty()) {
    user += "(none)\n";
  } else {
    for (const auto& [target, text] : open_critiques) {
      user += "- " + to_string(target) + ": " + text + "\n";
    }
  }
  user += "\nRouting heuristics:\n";
  for (const auto& rule : personas.orchestrator_heuristics) user += "- " + rule + "\n";
  user += std::string("\nDecide whether the discussion has reached a satisfactory resolution. Reply "
                      "with exactly one verdict block:\n") +
          kVerdictMarker + " RESOLVED\nor\n" + kVerdictMarker +
          " CONTINUE / TARGET: <DataLogicSpecialist|VisionaryStrategist|ImplementationRealist> / "
          "GAP: <one line naming the gap>\n";
  bundle.user_prompt = std::move(user);
  return bundle;
}

namespace {

bool iequal_word(const std::string& text, std::size_t pos, const char* word) {
  const std::size_t len = std::strlen(word);
  if (pos + len > text.size()) return false;
  for (std::size_t i = 0; i < len; ++i) {
    if (std::toupper(static_cast<unsigned char>(text[pos + i])) != word[i]) return false;
  }
  return true;
}

std::optional<OrchestratorVerdict> parse_verdict_at(const std::string& text, std::size_t pos) {
  std::size_t cursor = pos + std::strlen(kVerdictMarker);
  while (cursor < text.size() && (text[cursor] == ' ' || text[cursor] == '\t')) ++cursor;
  if (iequal_word(text, cursor, "RESOLVED")) {
    return OrchestratorVerdict{true, AgentRole::DataLogicSpecialist, ""};
  }
  if (!iequal_word(text, cursor, "CONTINUE")) return std::nullopt;

  const std::size_t target_pos = text.find("TARGET:", cursor);
  if (target_pos == std::string::npos) return std::nullopt;
  std::size_t name_begin = target_pos + 7;
  while (name_begin < text.size() && std::isspace(static_cast<unsigned char>(text[name_begin]))) ++name_begin;
  std::size_t name_end = name_begin;
  while (name_end < text.size() &&
         (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_')) {
    ++name_end;
  }
  const auto role = role_from_string(text.substr(name_begin, name_end - name_begin));
  if (!role || !is_specialist(*role)) return std::nullopt;

  std::string gap;
  const std::size_t gap_pos = text.find("GAP:", name_end);
  if (gap_pos != std::string::npos) {
    std::size_t gap_end = text.find('\n', gap_pos);
    if (gap_end == std::string::npos) gap_end = text.size();
    gap = trim(text.substr(gap_pos + 4, gap_end - gap_pos - 4));
  }
  return OrchestratorVerdict{false, *role, gap};
}

}  // namespace

std::optional<OrchestratorVerdict> parse_orchestrator_verdict(const std::string& response_text) {
  std::size_t pos = response_text.find(kVerdictMarker);
  while (pos != std::string::npos) {
    if (auto verdict = parse_verdict_at(response_text, pos)) return verdict;
    pos = response_text.find(kVerdictMarker, pos + 1);
  }
  return std::nullopt;
}

ParsedAgentBlocks parse_agent_blocks(const std::string& response_text) {
  ParsedAgentBlocks blocks;

  const std::size_t begin = response_text.find(kAnticipationBegin);
  if (begin != std::string::npos) {
    const std::size_t content_begin = begin + std::strlen(kAnticipationBegin);
    std::size_t content_end = response_text.find(kAnticipationEnd, content_begin);
    if (content_end == std::string::npos) {
      content_end = response_text.find("\n\n", content_begin);
      if (content_end == std::string::npos) content_end = response_text.size();
    }
    blocks.anticipation = trim(response_text.substr(content_begin, content_end - content_begin));
  }

  const std::size_t pred = response_text.find(kPredictionsMarker);
  if (pred != std::string::npos) {
    std::istringstream lines(response_text.substr(pred + std::strlen(kPredictionsMarker)));
    std::string line;
    while (std::getline(lines, line)) {
      const std::string trimmed = trim(line);
      if (trimmed.empty()) {
        if (blocks.predictions.empty()) continue;  // blank line right after the marker
        break;
      }
      const std::size_t colon = trimmed.find(':');
      if (colon == std::string::npos) break;
      const auto role = role_from_string(trim(trimmed.substr(0, colon)));
      if (!role) break;
      blocks.predictions.emplace_back(*role, trim(trimmed.substr(colon + 1)));
    }
  }
  return blocks;
}

std::vector<std::pair<AgentRole, std::string>> parse_critiques(const std::string& critic_text) {
  std::vector<std::pair<AgentRole, std::string>> critiques;
  std::istringstream lines(critic_text);
  std::string line;
  while (std::getline(lines, line)) {
    const std::size_t marker = line.find(kCritiqueMarker);
    if (marker == std::string::npos) continue;
    const std::string rest = trim(line.substr(marker + std::strlen(kCritiqueMarker)));
    const std::size_t colon = rest.find(':');
    if (colon == std::string::npos) continue;
    const auto role = role_from_string(trim(rest.substr(0, colon)));
    if (!role || !is_specialist(*role)) continue;
    critiques.emplace_back(*role, trim(rest.substr(colon + 1)));
  }
  return critiques;
}

}  // namespace council
