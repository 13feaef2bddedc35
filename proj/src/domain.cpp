#include "council/domain.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace council {

using json = nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

json config_to_json(const DeliberationConfig& config) {
  return json{
      {"tom_enabled", config.tom_enabled},
      {"critic_enabled", config.critic_enabled},
      {"max_rounds", config.max_rounds},
      {"seed", config.seed},
      {"label", config.label()},
  };
}

}  // namespace

void Scenario::validate() const {
  if (id.empty()) throw Error("scenario id must be non-empty");
  if (brief.empty()) throw Error("scenario brief must be non-empty");
  if (options.empty()) throw Error("scenario needs at least one option");
  std::set<std::string> seen;
  for (const auto& option : options) {
    if (option.empty()) throw Error("scenario option names must be non-empty");
    if (!seen.insert(option).second) throw Error("duplicate scenario option: " + option);
  }
}

Scenario Scenario::from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("scenario: ") + ex.what(), 1);
  }
  Scenario scenario;
  scenario.id = doc.value("id", "");
  scenario.brief = doc.value("brief", "");
  if (doc.contains("options")) {
    for (const auto& item : doc.at("options")) scenario.options.push_back(item.get<std::string>());
  }
  if (doc.contains("constraints")) {
    for (const auto& item : doc.at("constraints")) scenario.constraints.push_back(item.get<std::string>());
  }
  scenario.budget_text = doc.value("budget_text", "");
  scenario.validate();
  return scenario;
}

Scenario Scenario::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string Scenario::to_json_text() const {
  json doc{
      {"id", id},
      {"brief", brief},
      {"options", options},
      {"constraints", constraints},
      {"budget_text", budget_text},
  };
  return doc.dump(2);
}

const std::array<AgentRole, 3>& specialist_roles() {
  static const std::array<AgentRole, 3> roles = {
      AgentRole::DataLogicSpecialist,
      AgentRole::VisionaryStrategist,
      AgentRole::ImplementationRealist,
  };
  return roles;
}

bool is_specialist(AgentRole role) {
  return role == AgentRole::DataLogicSpecialist || role == AgentRole::VisionaryStrategist ||
         role == AgentRole::ImplementationRealist;
}

std::string to_string(AgentRole role) {
  switch (role) {
    case AgentRole::DataLogicSpecialist: return "DataLogicSpecialist";
    case AgentRole::VisionaryStrategist: return "VisionaryStrategist";
    case AgentRole::ImplementationRealist: return "ImplementationRealist";
    case AgentRole::Critic: return "Critic";
    case AgentRole::Integrator: return "Integrator";
    case AgentRole::Orchestrator: return "Orchestrator";
  }
  return "?";
}

std::optional<AgentRole> role_from_string(const std::string& name) {
  static const std::array<AgentRole, 6> all = {
      AgentRole::DataLogicSpecialist, AgentRole::VisionaryStrategist, AgentRole::ImplementationRealist,
      AgentRole::Critic,              AgentRole::Integrator,          AgentRole::Orchestrator,
  };
  for (AgentRole role : all) {
    if (to_string(role) == name) return role;
  }
  return std::nullopt;
}

std::string derive_config_label(bool tom, bool critic) {
  std::string label;
  label.push_back(tom ? 'T' : 'F');
  label.push_back(critic ? 'T' : 'F');
  return label;
}

std::optional<std::pair<bool, bool>> config_from_label(const std::string& label) {
  if (label.size() != 2) return std::nullopt;
  auto decode = [](char c) -> std::optional<bool> {
    if (c == 'T') return true;
    if (c == 'F') return false;
    return std::nullopt;
  };
  auto tom = decode(label[0]);
  auto critic = decode(label[1]);
  if (!tom || !critic) return std::nullopt;
  return std::make_pair(*tom, *critic);
}

std::string DeliberationConfig::label() const { return derive_config_label(tom_enabled, critic_enabled); }

void DeliberationConfig::validate() const {
  if (max_rounds < 1) throw Error("max_rounds must be >= 1");
}

bool Turn::operator==(const Turn& other) const {
  return index == other.index && round == other.round && role == other.role && content == other.content &&
         anticipation == other.anticipation && predictions == other.predictions;
}

std::string to_string(TerminationReason reason) {
  switch (reason) {
    case TerminationReason::OrchestratorResolved: return "OrchestratorResolved";
    case TerminationReason::MaxRoundsReached: return "MaxRoundsReached";
  }
  return "?";
}

std::optional<TerminationReason> termination_from_string(const std::string& name) {
  if (name == "OrchestratorResolved") return TerminationReason::OrchestratorResolved;
  if (name == "MaxRoundsReached") return TerminationReason::MaxRoundsReached;
  return std::nullopt;
}

bool Transcript::operator==(const Transcript& other) const {
  return scenario_id == other.scenario_id && config.tom_enabled == other.config.tom_enabled &&
         config.critic_enabled == other.config.critic_enabled && config.max_rounds == other.config.max_rounds &&
         config.seed == other.config.seed && turns == other.turns && final_synthesis == other.final_synthesis &&
         termination == other.termination;
}

void append_turn(Transcript& transcript, Turn turn) {
  if (turn.index != transcript.turns.size()) {
    throw IndexGapError(transcript.turns.size(), turn.index);
  }
  if (turn.role == AgentRole::Critic && !transcript.config.critic_enabled) {
    throw ConfigViolationError("critic turn in a run with the critic disabled");
  }
  if (!turn.anticipation.empty() && !transcript.config.tom_enabled) {
    throw ConfigViolationError("anticipation block in a run with anticipation prompting disabled");
  }
  if (!turn.predictions.empty() && !(transcript.config.tom_enabled && transcript.config.critic_enabled)) {
    throw ConfigViolationError("predictions recorded outside a TT run");
  }
  if (!transcript.turns.empty() && turn.round < transcript.turns.back().round) {
    throw ConfigViolationError("turn round numbers must be non-decreasing");
  }
  transcript.turns.push_back(std::move(turn));
}

std::string format_timestamp(std::chrono::system_clock::time_point tp) {
  const auto time = std::chrono::system_clock::to_time_t(tp);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count() % 1000;
  std::tm utc{};
  gmtime_r(&time, &utc);
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", utc.tm_year + 1900,
                utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec, static_cast<int>(ms));
  return buffer;
}

std::optional<std::chrono::system_clock::time_point> parse_timestamp(const std::string& text) {
  std::tm utc{};
  int ms = 0;
  if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d.%dZ", &utc.tm_year, &utc.tm_mon, &utc.tm_mday,
                  &utc.tm_hour, &utc.tm_min, &utc.tm_sec, &ms) != 7) {
    return std::nullopt;
  }
  utc.tm_year -= 1900;
  utc.tm_mon -= 1;
  const time_t seconds = timegm(&utc);
  if (seconds == static_cast<time_t>(-1)) return std::nullopt;
  return std::chrono::system_clock::from_time_t(seconds) + std::chrono::milliseconds(ms);
}

std::string transcript_header_line(const Transcript& transcript) {
  json header{
      {"record", "header"},
      {"format_version", kFormatVersion},
      {"scenario_id", transcript.scenario_id},
      {"config", config_to_json(transcript.config)},
      {"final_synthesis", transcript.final_synthesis},
  };
  header["termination"] = transcript.termination ? json(to_string(*transcript.termination)) : json(nullptr);
  return header.dump();
}

std::string turn_line(const Turn& turn) {
  json record{
      {"record", "turn"},
      {"index", turn.index},
      {"round", turn.round},
      {"role", to_string(turn.role)},
      {"content", turn.content},
      {"timestamp", format_timestamp(turn.timestamp)},
  };
  record["anticipation"] = turn.anticipation.empty() ? json(nullptr) : json(turn.anticipation);
  if (turn.predictions.empty()) {
    record["predictions"] = json(nullptr);
  } else {
    json list = json::array();
    for (const auto& [role, angle] : turn.predictions) {
      list.push_back(json::array({to_string(role), angle}));
    }
    record["predictions"] = std::move(list);
  }
  return record.dump();
}

std::string serialize_transcript(const Transcript& transcript) {
  std::string out = transcript_header_line(transcript);
  out.push_back('\n');
  for (const Turn& turn : transcript.turns) {
    out += turn_line(turn);
    out.push_back('\n');
  }
  return out;
}

Transcript parse_transcript(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  std::size_t line_no = 0;
  Transcript transcript;
  bool saw_header = false;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& ex) {
      throw ParseError(std::string("transcript: ") + ex.what(), line_no);
    }
    const std::string kind = record.value("record", "");
    if (!saw_header) {
      if (kind != "header") throw ParseError("transcript must start with a header record", line_no);
      if (record.value("format_version", 0) != kFormatVersion) {
        throw ParseError("unsupported transcript format_version", line_no);
      }
      transcript.scenario_id = record.value("scenario_id", "");
      const json& config = record.at("config");
      transcript.config.tom_enabled = config.value("tom_enabled", false);
      transcript.config.critic_enabled = config.value("critic_enabled", false);
      transcript.config.max_rounds = config.value("max_rounds", 1);
      transcript.config.seed = config.value("seed", 0UL);
      const std::string label = config.value("label", "");
      if (label != transcript.config.label()) {
        throw ParseError("config label does not match the toggles", line_no);
      }
      transcript.final_synthesis = record.value("final_synthesis", "");
      if (record.contains("termination") && !record.at("termination").is_null()) {
        auto reason = termination_from_string(record.at("termination").get<std::string>());
        if (!reason) throw ParseError("unknown termination reason", line_no);
        transcript.termination = reason;
      }
      saw_header = true;
      continue;
    }
    if (kind != "turn") throw ParseError("expected a turn record", line_no);
    Turn turn;
    turn.index = record.value("index", 0UL);
    turn.round = record.value("round", 0);
    auto role = role_from_string(record.value("role", ""));
    if (!role) throw ParseError("unknown role in turn record", line_no);
    turn.role = *role;
    turn.content = record.value("content", "");
    if (record.contains("anticipation") && !record.at("anticipation").is_null()) {
      turn.anticipation = record.at("anticipation").get<std::string>();
    }
    if (record.contains("predictions") && !record.at("predictions").is_null()) {
      for (const auto& entry : record.at("predictions")) {
        auto target = role_from_string(entry.at(0).get<std::string>());
        if (!target) throw ParseError("unknown role in predictions", line_no);
        turn.predictions.emplace_back(*target, entry.at(1).get<std::string>());
      }
    }
    if (record.contains("timestamp")) {
      if (auto ts = parse_timestamp(record.at("timestamp").get<std::string>())) turn.timestamp = *ts;
    }
    try {
      append_turn(transcript, std::move(turn));
    } catch (const Error& ex) {
      throw ParseError(std::string("invalid turn: ") + ex.what(), line_no);
    }
  }
  if (!saw_header) throw ParseError("empty transcript file", line_no == 0 ? 1 : line_no);
  if (transcript.termination == TerminationReason::OrchestratorResolved && transcript.final_synthesis.empty()) {
    throw ParseError("resolved transcript must carry a final synthesis", 1);
  }
  return transcript;
}

Transcript load_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transcript file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_transcript(buffer.str());
}

void RubricScores::validate_bounds() const {
  if (argument_quality < 1.0 || argument_quality > 5.0) throw Error("argument_quality out of [1,5]");
  if (critical_engagement < 0.0 || critical_engagement > 1.0) throw Error("critical_engagement out of [0,1]");
  if (reference_cohesion < 1.0 || reference_cohesion > 3.0) throw Error("reference_cohesion out of [1,3]");
  if (risk_resolution_pct && (*risk_resolution_pct < 0.0 || *risk_resolution_pct > 100.0)) {
    throw Error("risk_resolution_pct out of [0,100]");
  }
  if (revision_triggers < 0) throw Error("revision_triggers must be non-negative");
}

}  // namespace council
