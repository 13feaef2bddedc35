#include "council/knowledge_base.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "council/prompts.hpp"
#include "council/subprocess.hpp"

namespace council {

using json = nlohmann::json;

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Claim: return "Claim";
    case NodeKind::Risk: return "Risk";
    case NodeKind::Option: return "Option";
    case NodeKind::AgentUtterance: return "AgentUtterance";
    case NodeKind::Constraint: return "Constraint";
  }
  return "?";
}

std::optional<NodeKind> node_kind_from_string(const std::string& name) {
  for (NodeKind kind : {NodeKind::Claim, NodeKind::Risk, NodeKind::Option, NodeKind::AgentUtterance,
                        NodeKind::Constraint}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string to_string(Relation relation) {
  switch (relation) {
    case Relation::Supports: return "Supports";
    case Relation::Contradicts: return "Contradicts";
    case Relation::Mentions: return "Mentions";
    case Relation::Addresses: return "Addresses";
    case Relation::About: return "About";
  }
  return "?";
}

std::optional<Relation> relation_from_string(const std::string& name) {
  for (Relation relation : {Relation::Supports, Relation::Contradicts, Relation::Mentions,
                            Relation::Addresses, Relation::About}) {
    if (to_string(relation) == name) return relation;
  }
  return std::nullopt;
}

const GraphNode* KnowledgeGraph::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

std::string KnowledgeGraph::add_node(NodeKind kind, std::string text, int round, AgentRole author) {
  GraphNode node;
  node.id = "n" + std::to_string(next_id_++);
  node.kind = kind;
  node.text = std::move(text);
  node.round = round;
  node.author = author;
  index_[node.id] = nodes_.size();
  nodes_.push_back(std::move(node));
  return nodes_.back().id;
}

void KnowledgeGraph::add_edge(const std::string& from_id, const std::string& to_id, Relation relation) {
  if (!contains(from_id)) throw DanglingEdgeError("edge references unknown node " + from_id);
  if (!contains(to_id)) throw DanglingEdgeError("edge references unknown node " + to_id);
  if (from_id == to_id) throw DanglingEdgeError("self-loop on node " + from_id);
  edges_.push_back({from_id, to_id, relation});
}

bool KnowledgeGraph::well_formed() const {
  std::set<std::string> ids;
  for (const GraphNode& node : nodes_) {
    if (!ids.insert(node.id).second) return false;
  }
  for (const GraphEdge& edge : edges_) {
    if (!ids.count(edge.from_id) || !ids.count(edge.to_id) || edge.from_id == edge.to_id) return false;
  }
  return true;
}

std::string KnowledgeGraph::snapshot_text() const {
  std::string out;
  for (const GraphNode& node : nodes_) {
    json record{
        {"record", "node"}, {"id", node.id},       {"kind", to_string(node.kind)},
        {"text", node.text}, {"round", node.round}, {"author", to_string(node.author)},
    };
    out += record.dump();
    out.push_back('\n');
  }
  for (const GraphEdge& edge : edges_) {
    json record{
        {"record", "edge"}, {"from", edge.from_id}, {"to", edge.to_id}, {"relation", to_string(edge.relation)},
    };
    out += record.dump();
    out.push_back('\n');
  }
  return out;
}

std::string ingest_turn(KnowledgeGraph& graph, const Turn& turn, const ExtractionResult& extraction) {
  // Validate relation targets against the pre-ingest graph so a bad
  // extraction leaves the graph untouched.
  for (const ExtractedItem& item : extraction.items) {
    for (const auto& [relation, target] : item.relations) {
      (void)relation;
      if (!graph.contains(target)) {
        throw DanglingEdgeError("extracted relation references unknown node " + target);
      }
    }
  }
  const std::string utterance_id =
      graph.add_node(NodeKind::AgentUtterance, turn.content, turn.round, turn.role);
  for (const ExtractedItem& item : extraction.items) {
    const std::string item_id = graph.add_node(item.kind, item.text, turn.round, turn.role);
    graph.add_edge(utterance_id, item_id, Relation::Mentions);
    for (const auto& [relation, target] : item.relations) {
      graph.add_edge(item_id, target, relation);
    }
  }
  return utterance_id;
}

namespace {

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::set<std::string> token_set(const std::string& text) {
  const auto tokens = tokenize(text);
  return {tokens.begin(), tokens.end()};
}

std::size_t numeric_suffix(const std::string& id) {
  std::size_t value = 0;
  for (char c : id) {
    if (std::isdigit(static_cast<unsigned char>(c))) value = value * 10 + static_cast<std::size_t>(c - '0');
  }
  return value;
}

}  // namespace

std::vector<const GraphNode*> query_graph(const KnowledgeGraph& graph, const KbQuery& query) {
  std::vector<const GraphNode*> hits;
  if (query.structural) {
    const KbStructuralQuery& structural = *query.structural;
    for (const GraphNode& node : graph.nodes()) {
      if (structural.kind && node.kind != *structural.kind) continue;
      if (structural.author && node.author != *structural.author) continue;
      if (structural.relation) {
        const bool incident = std::any_of(graph.edges().begin(), graph.edges().end(), [&](const GraphEdge& e) {
          return e.relation == *structural.relation && (e.from_id == node.id || e.to_id == node.id);
        });
        if (!incident) continue;
      }
      hits.push_back(&node);
    }
    return hits;
  }

  const std::set<std::string> wanted = token_set(query.question);
  std::vector<std::pair<std::size_t, const GraphNode*>> ranked;
  for (const GraphNode& node : graph.nodes()) {
    const std::set<std::string> have = token_set(node.text);
    std::size_t overlap = 0;
    for (const auto& token : wanted) {
      if (have.count(token)) ++overlap;
    }
    if (overlap > 0) ranked.emplace_back(overlap, &node);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return numeric_suffix(a.second->id) < numeric_suffix(b.second->id);
  });
  hits.reserve(ranked.size());
  for (const auto& [overlap, node] : ranked) hits.push_back(node);
  return hits;
}

std::string default_asp_rules() {
  return "% support is transitive\n"
         "supports_tc(X,Y) :- supports(X,Y).\n"
         "supports_tc(X,Z) :- supports_tc(X,Y), supports(Y,Z).\n"
         "% contradiction is symmetric\n"
         "contradicts_sym(X,Y) :- contradicts(X,Y).\n"
         "contradicts_sym(X,Y) :- contradicts(Y,X).\n"
         "% a risk is addressed when something addresses it\n"
         "addressed(R) :- risk(R), addresses(X,R).\n";
}

namespace {

std::string asp_kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Claim: return "claim";
    case NodeKind::Risk: return "risk";
    case NodeKind::Option: return "option";
    case NodeKind::AgentUtterance: return "utterance";
    case NodeKind::Constraint: return "constraint";
  }
  return "node";
}

std::string asp_relation_name(Relation relation) {
  switch (relation) {
    case Relation::Supports: return "supports";
    case Relation::Contradicts: return "contradicts";
    case Relation::Mentions: return "mentions";
    case Relation::Addresses: return "addresses";
    case Relation::About: return "about";
  }
  return "rel";
}

std::string asp_author_name(AgentRole role) {
  std::string name = to_string(role);
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return name;
}

std::string quote_asp_string(const std::string& text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '\\' || c == '"') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

bool valid_asp_constant(const std::string& text) {
  if (text.empty() || !std::islower(static_cast<unsigned char>(text[0]))) return false;
  return std::all_of(text.begin(), text.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

}  // namespace

std::string AspProgram::text() const {
  std::string out = "% facts\n";
  for (const std::string& fact : facts) {
    out += fact;
    out.push_back('\n');
  }
  out += "% rules\n" + rules;
  if (!rules.empty() && rules.back() != '\n') out.push_back('\n');
  out += "% query\n";
  for (const std::string& rule : query_rules) {
    out += rule;
    out.push_back('\n');
  }
  return out;
}

AspProgram translate_to_asp(const KnowledgeGraph& graph, const KbQuery& query,
                            const std::string& rules_text) {
  AspProgram program;
  program.rules = rules_text;

  for (const GraphNode& node : graph.nodes()) {
    program.facts.push_back(asp_kind_name(node.kind) + "(" + node.id + ").");
    program.facts.push_back("author(" + node.id + "," + asp_author_name(node.author) + ").");
    std::set<std::string> emitted;
    for (const std::string& token : tokenize(node.text)) {
      if (!emitted.insert(token).second) continue;
      program.facts.push_back("token(" + node.id + "," + quote_asp_string(token) + ").");
    }
  }
  for (const GraphEdge& edge : graph.edges()) {
    program.facts.push_back(asp_relation_name(edge.relation) + "(" + edge.from_id + "," + edge.to_id + ").");
  }

  std::vector<std::string> shows = {"#show addressed/1.", "#show supports_tc/2.",
                                    "#show contradicts_sym/2."};

  if (query.structural) {
    const KbStructuralQuery& structural = *query.structural;
    if (!structural.kind && !structural.relation && !structural.author) {
      throw UntranslatableQueryError("structural query carries no filters");
    }
    std::string body;
    auto add_cond = [&body](const std::string& cond) {
      if (!body.empty()) body += ", ";
      body += cond;
    };
    if (structural.kind) {
      add_cond(asp_kind_name(*structural.kind) + "(X)");
    }
    if (structural.author) add_cond("author(X," + asp_author_name(*structural.author) + ")");
    if (structural.relation) {
      const std::string rel = asp_relation_name(*structural.relation);
      // incident in either direction
      program.query_rules.push_back("query_hit :- " + body + (body.empty() ? "" : ", ") + rel + "(X,Y).");
      program.query_rules.push_back("query_hit :- " + body + (body.empty() ? "" : ", ") + rel + "(Y,X).");
    } else {
      program.query_rules.push_back("query_hit :- " + body + ".");
    }
    program.query_atom = "query_hit";
    shows.push_back("#show query_hit/0.");
  } else {
    // recognizable free-text patterns
    const auto tokens = tokenize(query.question);
    auto find_pattern = [&tokens](const char* verb) -> std::optional<std::pair<std::string, std::string>> {
      for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        if (tokens[i] == verb) {
          const std::string before = i > 0 ? tokens[i - 1] : "";
          const std::string after = tokens[i + 1];
          return std::make_pair(before, after);
        }
      }
      return std::nullopt;
    };
    // "is <id> addressed"
    bool translated = false;
    for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
      if (tokens[i] == "is" && tokens[i + 2] == "addressed" && valid_asp_constant(tokens[i + 1])) {
        program.query_atom = "addressed(" + tokens[i + 1] + ")";
        translated = true;
        break;
      }
    }
    if (!translated) {
      if (auto pair = find_pattern("support"); pair && tokens.front() == "does" &&
                                               valid_asp_constant(pair->first) &&
                                               valid_asp_constant(pair->second)) {
        program.query_atom = "supports_tc(" + pair->first + "," + pair->second + ")";
        translated = true;
      } else if (auto contra = find_pattern("contradict"); contra && tokens.front() == "does" &&
                                                           valid_asp_constant(contra->first) &&
                                                           valid_asp_constant(contra->second)) {
        program.query_atom = "contradicts_sym(" + contra->first + "," + contra->second + ")";
        translated = true;
      }
    }
    if (!translated) {
      throw UntranslatableQueryError("no structural form and no recognizable pattern in: " + query.question);
    }
  }
  for (const std::string& show : shows) program.query_rules.push_back(show);
  return program;
}

AspSolveResult solve_asp(const AspProgram& program, const std::string& solver_path, int timeout_ms) {
  if (program.query_atom.empty()) throw SolverSyntaxError("program has no query atom", "");
  const SubprocessResult run = run_subprocess({solver_path, "-"}, program.text(), timeout_ms);
  if (run.timed_out) throw SolverError("solver timed out after " + std::to_string(timeout_ms) + " ms");

  std::istringstream lines(run.out);
  std::string line;
  bool satisfiable = false;
  bool unsatisfiable = false;
  std::vector<std::string> atoms;
  bool expect_answer_atoms = false;
  while (std::getline(lines, line)) {
    if (expect_answer_atoms) {
      std::istringstream fields(line);
      std::string atom;
      while (fields >> atom) atoms.push_back(atom);
      expect_answer_atoms = false;
      continue;
    }
    if (line.rfind("Answer:", 0) == 0) {
      if (atoms.empty()) expect_answer_atoms = true;  // only the first answer set
      continue;
    }
    if (line.rfind("SATISFIABLE", 0) == 0) satisfiable = true;
    if (line.rfind("UNSATISFIABLE", 0) == 0) unsatisfiable = true;
  }
  if (!satisfiable && !unsatisfiable) {
    throw SolverSyntaxError("solver rejected the program (exit " + std::to_string(run.exit_code) + ")",
                            run.err);
  }
  AspSolveResult result;
  if (unsatisfiable) return result;
  result.witness_atoms = std::move(atoms);
  result.satisfied = std::find(result.witness_atoms.begin(), result.witness_atoms.end(),
                               program.query_atom) != result.witness_atoms.end();
  return result;
}

namespace {

std::string findings_bullets(const std::vector<const GraphNode*>& hits) {
  std::string findings;
  for (const GraphNode* node : hits) {
    findings += "- [" + to_string(node->kind) + "] " + node->text + " (" + to_string(node->author) +
                ", round " + std::to_string(node->round) + ")\n";
  }
  if (!findings.empty()) findings.pop_back();
  return findings;
}

}  // namespace

RetrievalOutcome retrieve(const KnowledgeGraph& graph, const KbQuery& query, const KbOptions& options) {
  RetrievalOutcome outcome;
  const auto hits = query_graph(graph, query);
  if (!hits.empty()) {
    outcome.graph_hits = hits.size();
    outcome.findings = findings_bullets(hits);
    return outcome;
  }

  outcome.fallback_attempted = true;
  try {
    const AspProgram program = translate_to_asp(graph, query, options.asp_rules);
    const AspSolveResult solved = solve_asp(program, options.solver_path, options.solver_timeout_ms);
    outcome.fallback_satisfied = solved.satisfied;
    if (solved.satisfied) {
      outcome.findings = "- inference: " + program.query_atom + " holds";
      if (!solved.witness_atoms.empty()) {
        outcome.findings += "; derived: ";
        for (std::size_t i = 0; i < solved.witness_atoms.size(); ++i) {
          if (i) outcome.findings += ", ";
          outcome.findings += solved.witness_atoms[i];
        }
      }
    } else {
      outcome.findings = "- inference: " + program.query_atom + " is not derivable from the stored discussion";
    }
  } catch (const UntranslatableQueryError&) {
    outcome.fallback_untranslatable = true;
    outcome.findings = kNoFindingsMarker;
  } catch (const SolverError& ex) {
    outcome.warning = std::string("knowledge tool degraded: ") + ex.what();
    outcome.findings = kNoFindingsMarker;
  }
  return outcome;
}

ExtractionResult extract_assertions(const Turn& turn, ChatBackend& gateway, const KnowledgeGraph& graph,
                                    const std::string& request_tag) {
  if (turn.content.empty()) throw Error("extract_assertions requires non-empty turn content");

  ChatRequest request;
  request.system_prompt =
      "You convert one discussion turn into typed assertions for a knowledge graph. Reply with "
      "JSON only, no prose.";
  std::string user = "TURN (" + to_string(turn.role) + ", round " + std::to_string(turn.round) + "):\n" +
                     turn.content + "\n\nEXISTING NODES:\n";
  if (graph.nodes().empty()) {
    user += "(none)\n";
  } else {
    for (const GraphNode& node : graph.nodes()) {
      if (node.kind == NodeKind::AgentUtterance) continue;  // keep the listing short
      user += node.id + " [" + to_string(node.kind) + "] " + node.text + "\n";
    }
  }
  user +=
      "\nReturn JSON of the form {\"items\":[{\"kind\":\"Claim|Risk|Option|Constraint\","
      "\"text\":\"...\",\"relations\":[{\"relation\":\"Supports|Contradicts|Mentions|Addresses|About\","
      "\"target\":\"<existing node id>\"}]}]}. Item texts must be short quotes or close paraphrases "
      "of the turn. Omit relations you are not sure about; an empty items list is fine.";
  request.messages.emplace_back("user", std::move(user));
  request.temperature = 0.0;
  request.request_tag = request_tag;

  const ChatResponse response = gateway.complete(request);

  ExtractionResult result;
  const std::size_t begin = response.text.find('{');
  const std::size_t end = response.text.rfind('}');
  if (begin == std::string::npos || end == std::string::npos || end < begin) return result;
  json doc;
  try {
    doc = json::parse(response.text.substr(begin, end - begin + 1));
  } catch (const json::exception&) {
    return result;  // malformed extraction output: ingest the bare utterance
  }
  if (!doc.contains("items") || !doc.at("items").is_array()) return result;
  for (const auto& entry : doc.at("items")) {
    if (!entry.is_object()) continue;
    const auto kind = node_kind_from_string(entry.value("kind", ""));
    if (!kind || *kind == NodeKind::AgentUtterance) continue;
    ExtractedItem item;
    item.kind = *kind;
    item.text = entry.value("text", "");
    if (item.text.empty()) continue;
    if (entry.contains("relations") && entry.at("relations").is_array()) {
      for (const auto& rel : entry.at("relations")) {
        const auto relation = relation_from_string(rel.value("relation", ""));
        const std::string target = rel.value("target", "");
        if (!relation || target.empty()) continue;
        item.relations.emplace_back(*relation, target);
      }
    }
    result.items.push_back(std::move(item));
  }
  return result;
}

}  // namespace council
