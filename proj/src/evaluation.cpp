#include "council/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace council {

using json = nlohmann::json;

std::string default_rubric_text() {
  return
      "Evaluation rubric for multi-agent deliberation transcripts.\n"
      "\n"
      "1. Argument quality (integer 1-5): how logically organized, supported and persuasive\n"
      "   the reasoning is. Higher scores require internal consistency, responsiveness to\n"
      "   prior turns, and engagement with counterarguments.\n"
      "2. Substantive counterargument (per turn, boolean): a turn earns this label when it\n"
      "   substantively challenges a claim made earlier in the conversation. Shallow or\n"
      "   purely rhetorical criticism does not count.\n"
      "3. Reference cohesion (integer 1-3): how well the participants reflect and build on\n"
      "   each other's statements; higher values for a developed, interlocking discussion.\n"
      "4. Risks: list every concrete risk or obstacle surfaced anywhere in the conversation.\n"
      "   Mark a risk as addressed only when the concluding recommendation handles it in a\n"
      "   meaningful way.\n"
      "5. Revision trigger (per turn, boolean): a turn earns this label when its author\n"
      "   substantively revises an earlier position in response to a counterargument or a\n"
      "   newly raised constraint. Rewording without a change of substance does not count.\n"
      "\n"
      "Judge strictly from these definitions and the conversation content. Do not use\n"
      "external knowledge and do not guess at how the conversation was produced.\n";
}

namespace {

bool word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool contains_word(const std::string& text, const std::string& word) {
  std::size_t pos = text.find(word);
  while (pos != std::string::npos) {
    const bool left_ok = pos == 0 || !word_char(text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right_ok = end >= text.size() || !word_char(text[end]);
    if (left_ok && right_ok) return true;
    pos = text.find(word, pos + 1);
  }
  return false;
}

}  // namespace

bool contains_config_marker(const std::string& text) {
  for (const char* label : {"FF", "TF", "FT", "TT", "ToM"}) {
    if (contains_word(text, label)) return true;
  }
  return text.find("tom_enabled") != std::string::npos ||
         text.find("critic_enabled") != std::string::npos;
}

std::string JudgePayload::to_json_text() const {
  json turn_list = json::array();
  for (const JudgeTurn& turn : turns) {
    turn_list.push_back({{"index", turn.index}, {"role", turn.role}, {"content", turn.content}});
  }
  json doc{
      {"rubric", rubric_text},
      {"scenario_brief", scenario_brief},
      {"turns", std::move(turn_list)},
  };
  return doc.dump();
}

JudgePayload build_judge_payload(const Transcript& transcript, const std::string& rubric,
                                 const std::string& scenario_brief) {
  JudgePayload payload;
  payload.rubric_text = rubric;
  payload.scenario_brief = scenario_brief;

  for (const Turn& turn : transcript.turns) {
    // content is agent-authored and kept verbatim; the config, the scenario
    // id and the anticipation/prediction gating metadata are dropped
    payload.turns.push_back({turn.index, to_string(turn.role), turn.content});
  }

  // Everything the harness authored must stay free of config markers.
  if (contains_config_marker(payload.rubric_text)) {
    throw BlindnessViolationError("rubric text contains a configuration marker");
  }
  if (contains_config_marker(payload.scenario_brief)) {
    throw BlindnessViolationError("scenario brief contains a configuration marker");
  }
  for (const JudgeTurn& turn : payload.turns) {
    if (contains_config_marker(turn.role)) {
      throw BlindnessViolationError("turn role leaks a configuration marker");
    }
  }
  return payload;
}

namespace {

std::optional<JudgeVerdictRaw> parse_judge_json(const std::string& text, std::size_t turn_count,
                                                std::string& problem) {
  const std::size_t begin = text.find('{');
  const std::size_t end = text.rfind('}');
  if (begin == std::string::npos || end == std::string::npos || end < begin) {
    problem = "no JSON object found";
    return std::nullopt;
  }
  json doc;
  try {
    doc = json::parse(text.substr(begin, end - begin + 1));
  } catch (const json::exception& ex) {
    problem = std::string("invalid JSON: ") + ex.what();
    return std::nullopt;
  }
  JudgeVerdictRaw verdict;
  try {
    verdict.argument_quality = doc.at("argument_quality").get<int>();
    verdict.reference_cohesion = doc.at("reference_cohesion").get<int>();
    for (const auto& entry : doc.at("per_turn")) {
      TurnJudgeLabel label;
      label.turn_index = entry.at("turn_index").get<std::size_t>();
      label.substantive_counterargument = entry.at("substantive_counterargument").get<bool>();
      label.revision_trigger = entry.at("revision_trigger").get<bool>();
      label.justification = entry.value("justification", "");
      verdict.per_turn.push_back(std::move(label));
    }
    if (doc.contains("risks")) {
      for (const auto& entry : doc.at("risks")) {
        verdict.risks.push_back({entry.at("risk_text").get<std::string>(), entry.at("addressed").get<bool>()});
      }
    }
  } catch (const json::exception& ex) {
    problem = std::string("missing or mistyped field: ") + ex.what();
    return std::nullopt;
  }
  if (verdict.argument_quality < 1 || verdict.argument_quality > 5) {
    problem = "argument_quality out of range 1-5";
    return std::nullopt;
  }
  if (verdict.reference_cohesion < 1 || verdict.reference_cohesion > 3) {
    problem = "reference_cohesion out of range 1-3";
    return std::nullopt;
  }
  std::set<std::size_t> seen;
  for (const auto& label : verdict.per_turn) seen.insert(label.turn_index);
  if (verdict.per_turn.size() != turn_count || seen.size() != turn_count ||
      (turn_count > 0 && (*seen.begin() != 0 || *seen.rbegin() != turn_count - 1))) {
    problem = "per_turn must cover every turn index exactly once";
    return std::nullopt;
  }
  return verdict;
}

std::string judge_instructions() {
  return
      "Evaluate the conversation in the JSON payload above against its rubric. Reply with "
      "JSON only, of the form:\n"
      "{\"argument_quality\": <1-5>, \"reference_cohesion\": <1-3>, \"per_turn\": [{\"turn_index\": "
      "<n>, \"substantive_counterargument\": <bool>, \"revision_trigger\": <bool>, "
      "\"justification\": \"...\"}], \"risks\": [{\"risk_text\": \"...\", \"addressed\": <bool>}]}\n"
      "per_turn must contain exactly one entry for every turn index in the payload.";
}

}  // namespace

JudgeVerdictRaw judge_transcript(const JudgePayload& payload, ChatBackend& gateway,
                                 const JudgeOptions& options) {
  const std::string serialized = payload.to_json_text();

  ChatRequest request;
  request.system_prompt =
      "You are an impartial evaluator of multi-agent discussions. Use only the rubric "
      "definitions and conversation content provided; do not use external knowledge. Reply "
      "with JSON only.";
  request.messages.emplace_back("user", serialized + "\n\n" + judge_instructions());
  request.temperature = 0.0;  // judge reproducibility
  request.max_output_tokens = options.max_output_tokens;
  request.request_tag = options.request_tag_prefix + "/judge/1";

  const ChatResponse first = gateway.complete(request);
  std::string problem;
  if (auto verdict = parse_judge_json(first.text, payload.turns.size(), problem)) return *verdict;

  ChatRequest retry = request;
  retry.messages.emplace_back("assistant", first.text);
  retry.messages.emplace_back("user", "Your previous reply was invalid (" + problem +
                                          "). Reply again with valid JSON only, exactly in the "
                                          "format requested.");
  retry.request_tag = options.request_tag_prefix + "/judge/2";
  const ChatResponse second = gateway.complete(retry);
  if (auto verdict = parse_judge_json(second.text, payload.turns.size(), problem)) return *verdict;
  throw JudgeUnparsableError("judge output unusable after re-ask: " + problem);
}

RubricScores compute_scores(const JudgeVerdictRaw& verdict, const Transcript& transcript) {
  const std::size_t turn_count = transcript.turns.size();
  if (turn_count == 0) throw CoverageGapError("transcript has no turns to score");
  std::set<std::size_t> expected;
  for (const Turn& turn : transcript.turns) expected.insert(turn.index);
  std::set<std::size_t> got;
  for (const auto& label : verdict.per_turn) got.insert(label.turn_index);
  if (expected != got || verdict.per_turn.size() != turn_count) {
    throw CoverageGapError("judge labels do not cover the transcript's turn indices exactly");
  }

  RubricScores scores;
  scores.argument_quality = static_cast<double>(verdict.argument_quality);
  scores.reference_cohesion = static_cast<double>(verdict.reference_cohesion);

  std::size_t substantive = 0;
  long revisions = 0;
  for (const auto& label : verdict.per_turn) {
    if (label.substantive_counterargument) ++substantive;
    if (label.revision_trigger) ++revisions;
  }
  scores.critical_engagement = static_cast<double>(substantive) / static_cast<double>(turn_count);
  scores.revision_triggers = revisions;

  if (!verdict.risks.empty()) {
    std::size_t addressed = 0;
    for (const auto& risk : verdict.risks) {
      if (risk.addressed) ++addressed;
    }
    scores.risk_resolution_pct =
        100.0 * static_cast<double>(addressed) / static_cast<double>(verdict.risks.size());
  }
  scores.per_turn = verdict.per_turn;
  scores.risks = verdict.risks;
  scores.validate_bounds();
  return scores;
}

std::string scores_to_json_text(const ScoresRecord& record) {
  json per_turn = json::array();
  for (const auto& label : record.scores.per_turn) {
    per_turn.push_back({
        {"turn_index", label.turn_index},
        {"substantive_counterargument", label.substantive_counterargument},
        {"revision_trigger", label.revision_trigger},
        {"justification", label.justification},
    });
  }
  json risks = json::array();
  for (const auto& risk : record.scores.risks) {
    risks.push_back({{"risk_text", risk.risk_text}, {"addressed", risk.addressed}});
  }
  json doc{
      {"transcript_id", record.transcript_id},
      {"label", record.label},
      {"argument_quality", record.scores.argument_quality},
      {"critical_engagement", record.scores.critical_engagement},
      {"reference_cohesion", record.scores.reference_cohesion},
      {"revision_triggers", record.scores.revision_triggers},
      {"judge_labels", json{{"per_turn", std::move(per_turn)}, {"risks", std::move(risks)}}},
  };
  doc["risk_resolution_pct"] =
      record.scores.risk_resolution_pct ? json(*record.scores.risk_resolution_pct) : json(nullptr);
  return doc.dump(2) + "\n";
}

ScoresRecord scores_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("scores: ") + ex.what(), 1);
  }
  ScoresRecord record;
  record.transcript_id = doc.value("transcript_id", "");
  record.label = doc.value("label", "");
  if (!config_from_label(record.label)) throw Error("scores record has unknown label: " + record.label);
  record.scores.argument_quality = doc.at("argument_quality").get<double>();
  record.scores.critical_engagement = doc.at("critical_engagement").get<double>();
  record.scores.reference_cohesion = doc.at("reference_cohesion").get<double>();
  record.scores.revision_triggers = doc.at("revision_triggers").get<long>();
  if (doc.contains("risk_resolution_pct") && !doc.at("risk_resolution_pct").is_null()) {
    record.scores.risk_resolution_pct = doc.at("risk_resolution_pct").get<double>();
  }
  if (doc.contains("judge_labels")) {
    const json& labels = doc.at("judge_labels");
    if (labels.contains("per_turn")) {
      for (const auto& entry : labels.at("per_turn")) {
        TurnJudgeLabel label;
        label.turn_index = entry.value("turn_index", 0UL);
        label.substantive_counterargument = entry.value("substantive_counterargument", false);
        label.revision_trigger = entry.value("revision_trigger", false);
        label.justification = entry.value("justification", "");
        record.scores.per_turn.push_back(std::move(label));
      }
    }
    if (labels.contains("risks")) {
      for (const auto& entry : labels.at("risks")) {
        record.scores.risks.push_back({entry.value("risk_text", ""), entry.value("addressed", false)});
      }
    }
  }
  record.scores.validate_bounds();
  return record;
}

ScoresRecord load_scores(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scores file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return scores_from_json_text(buffer.str());
}

namespace {

const std::vector<std::string>& label_order() {
  static const std::vector<std::string> order = {"FF", "TF", "FT", "TT"};
  return order;
}

std::string fmt2(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", value);
  return buffer;
}

}  // namespace

AggregateReport aggregate(const std::map<std::string, std::vector<RubricScores>>& scores_by_label) {
  AggregateReport report;
  for (const std::string& label : label_order()) {
    auto it = scores_by_label.find(label);
    if (it == scores_by_label.end()) continue;
    const auto& runs = it->second;
    if (runs.empty()) throw Error("aggregate: empty score list for " + label);

    CellAggregate cell;
    cell.label = label;
    cell.runs = runs.size();
    double risk_sum = 0.0;
    std::size_t risk_defined = 0;
    for (const RubricScores& scores : runs) {
      cell.argument_quality += scores.argument_quality;
      cell.critical_engagement += scores.critical_engagement;
      cell.reference_cohesion += scores.reference_cohesion;
      cell.revision_triggers += static_cast<double>(scores.revision_triggers);
      if (scores.risk_resolution_pct) {
        risk_sum += *scores.risk_resolution_pct;
        ++risk_defined;
      } else {
        ++cell.risk_exclusions;
      }
    }
    const double n = static_cast<double>(runs.size());
    cell.argument_quality /= n;
    cell.critical_engagement /= n;
    cell.reference_cohesion /= n;
    cell.revision_triggers /= n;
    if (risk_defined > 0) cell.risk_resolution_pct = risk_sum / static_cast<double>(risk_defined);
    report.rows.push_back(std::move(cell));
  }
  return report;
}

std::string AggregateReport::render_metrics_table() const {
  std::string out = "Metrics by configuration\n";
  char line[200];
  std::snprintf(line, sizeof(line), "%-8s %18s %20s %19s %20s %6s %14s\n", "config", "argument_quality",
                "critical_engagement", "reference_cohesion", "risk_resolution_pct", "runs",
                "risk_excluded");
  out += line;
  for (const CellAggregate& cell : rows) {
    const std::string risk = cell.risk_resolution_pct ? fmt2(*cell.risk_resolution_pct) : "-";
    std::snprintf(line, sizeof(line), "%-8s %18s %20s %19s %20s %6zu %14zu\n", cell.label.c_str(),
                  fmt2(cell.argument_quality).c_str(), fmt2(cell.critical_engagement).c_str(),
                  fmt2(cell.reference_cohesion).c_str(), risk.c_str(), cell.runs, cell.risk_exclusions);
    out += line;
  }
  return out;
}

std::string AggregateReport::render_triggers_table() const {
  std::string out = "Revision triggers by configuration\n";
  char line[100];
  std::snprintf(line, sizeof(line), "%-8s %17s\n", "config", "revision_triggers");
  out += line;
  for (const CellAggregate& cell : rows) {
    std::snprintf(line, sizeof(line), "%-8s %17s\n", cell.label.c_str(), fmt2(cell.revision_triggers).c_str());
    out += line;
  }
  return out;
}

std::string AggregateReport::to_json_text() const {
  json row_list = json::array();
  json trigger_list = json::array();
  for (const CellAggregate& cell : rows) {
    json row{
        {"label", cell.label},
        {"runs", cell.runs},
        {"argument_quality", cell.argument_quality},
        {"critical_engagement", cell.critical_engagement},
        {"reference_cohesion", cell.reference_cohesion},
        {"risk_excluded", cell.risk_exclusions},
    };
    row["risk_resolution_pct"] = cell.risk_resolution_pct ? json(*cell.risk_resolution_pct) : json(nullptr);
    row_list.push_back(std::move(row));
    trigger_list.push_back({{"label", cell.label}, {"revision_triggers", cell.revision_triggers}});
  }
  json doc{{"metrics", std::move(row_list)}, {"revision_triggers", std::move(trigger_list)}};
  return doc.dump(2) + "\n";
}

}  // namespace council
