#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "council/domain.hpp"
#include "council/gateway.hpp"

namespace council {

enum class NodeKind { Claim, Risk, Option, AgentUtterance, Constraint };
enum class Relation { Supports, Contradicts, Mentions, Addresses, About };

std::string to_string(NodeKind kind);
std::optional<NodeKind> node_kind_from_string(const std::string& name);
std::string to_string(Relation relation);
std::optional<Relation> relation_from_string(const std::string& name);

struct GraphNode {
  std::string id;
  NodeKind kind = NodeKind::Claim;
  std::string text;
  int round = 1;
  AgentRole author = AgentRole::DataLogicSpecialist;
};

struct GraphEdge {
  std::string from_id;
  std::string to_id;
  Relation relation = Relation::Mentions;
};

// Append-only in-memory property graph; one instance per deliberation run.
// Node ids are generated ("n1", "n2", ...) so insertion order and id order
// coincide.
class KnowledgeGraph {
 public:
  const std::vector<GraphNode>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const GraphNode* find(const std::string& id) const;
  bool contains(const std::string& id) const { return find(id) != nullptr; }

  std::string add_node(NodeKind kind, std::string text, int round, AgentRole author);
  void add_edge(const std::string& from_id, const std::string& to_id, Relation relation);

  bool well_formed() const;
  std::string snapshot_text() const;  // line-delimited records, nodes then edges

 private:
  std::vector<GraphNode> nodes_;
  std::vector<GraphEdge> edges_;
  std::map<std::string, std::size_t> index_;
  std::size_t next_id_ = 1;
};

struct ExtractedItem {
  NodeKind kind = NodeKind::Claim;
  std::string text;
  std::vector<std::pair<Relation, std::string>> relations;  // targets are existing node ids
};

struct ExtractionResult {
  std::vector<ExtractedItem> items;
};

struct KbStructuralQuery {
  std::optional<NodeKind> kind;
  std::optional<Relation> relation;  // node must be incident to an edge of this relation
  std::optional<AgentRole> author;
};

struct KbQuery {
  std::string question;
  std::optional<KbStructuralQuery> structural;
};

struct AspProgram {
  std::vector<std::string> facts;
  std::string rules;
  std::vector<std::string> query_rules;  // e.g. the query_hit definition + #show lines
  std::string query_atom;

  std::string text() const;
};

struct AspSolveResult {
  bool satisfied = false;
  std::vector<std::string> witness_atoms;
};

// The fixed inference ruleset: transitive support, contradiction symmetry,
// risk-addressed.
std::string default_asp_rules();

// Adds one AgentUtterance node for the turn plus one node per extracted item,
// a Mentions edge from the utterance to each item, and the item's stated
// relations. Relation targets must already exist in the graph.
std::string ingest_turn(KnowledgeGraph& graph, const Turn& turn, const ExtractionResult& extraction);

// LLM extraction of typed assertions from one turn. The graph is consulted
// read-only so relations can reference existing node ids. Unparsable backend
// output degrades to an empty result rather than aborting the run.
ExtractionResult extract_assertions(const Turn& turn, ChatBackend& gateway, const KnowledgeGraph& graph,
                                    const std::string& request_tag);

// Structural match when a structural form is present; otherwise ranked
// case-insensitive token overlap against node text (ties by node id).
std::vector<const GraphNode*> query_graph(const KnowledgeGraph& graph, const KbQuery& query);

// Fallback path, to be invoked only when query_graph returned nothing.
AspProgram translate_to_asp(const KnowledgeGraph& graph, const KbQuery& query,
                            const std::string& rules_text = default_asp_rules());

AspSolveResult solve_asp(const AspProgram& program, const std::string& solver_path,
                         int timeout_ms = 15000);

struct KbOptions {
  std::string solver_path = "council-asp";
  std::string asp_rules = default_asp_rules();
  int solver_timeout_ms = 15000;
};

struct RetrievalOutcome {
  std::string findings;
  std::size_t graph_hits = 0;
  bool fallback_attempted = false;
  bool fallback_untranslatable = false;
  bool fallback_satisfied = false;
  std::string warning;  // solver failure note; retrieval degraded to no findings
};

// Graph retrieval first; ASP inference when the graph returns nothing. Tool
// failure never aborts a deliberation: it degrades to the no-findings marker
// and a warning.
RetrievalOutcome retrieve(const KnowledgeGraph& graph, const KbQuery& query, const KbOptions& options);

}  // namespace council
