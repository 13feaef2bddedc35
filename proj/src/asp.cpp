#include "council/asp.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>

namespace council::asp {

namespace {

constexpr std::size_t kBruteForceAtomLimit = 18;

struct Token {
  enum Kind { Ident, Variable, Integer, String, LParen, RParen, Comma, Dot, If, Not, Show, Slash, End };
  Kind kind;
  std::string text;
  std::size_t line;
};

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_blank();
    if (pos_ >= text_.size()) return {Token::End, "", line_};
    const char c = text_[pos_];
    if (c == '(') return simple(Token::LParen, "(");
    if (c == ')') return simple(Token::RParen, ")");
    if (c == ',') return simple(Token::Comma, ",");
    if (c == '.') return simple(Token::Dot, ".");
    if (c == '/') return simple(Token::Slash, "/");
    if (c == ':') {
      if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '-') {
        pos_ += 2;
        return {Token::If, ":-", line_};
      }
      throw AspSyntaxError("stray ':'", line_);
    }
    if (c == '#') {
      const std::size_t start = ++pos_;
      while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      const std::string word = text_.substr(start, pos_ - start);
      if (word == "show") return {Token::Show, "#show", line_};
      throw AspSyntaxError("unsupported directive #" + word, line_);
    }
    if (c == '"') {
      std::string value = "\"";
      ++pos_;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
          value.push_back(text_[pos_++]);
        }
        if (text_[pos_] == '\n') ++line_;
        value.push_back(text_[pos_++]);
      }
      if (pos_ >= text_.size()) throw AspSyntaxError("unterminated string", line_);
      ++pos_;
      value.push_back('"');
      return {Token::String, value, line_};
    }
    if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_++;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start + 1 && c == '-') throw AspSyntaxError("stray '-'", line_);
      return {Token::Integer, text_.substr(start, pos_ - start), line_};
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_++;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      const std::string word = text_.substr(start, pos_ - start);
      if (word == "not") return {Token::Not, word, line_};
      if (std::isupper(static_cast<unsigned char>(c)) || c == '_') return {Token::Variable, word, line_};
      return {Token::Ident, word, line_};
    }
    throw AspSyntaxError(std::string("unexpected character '") + c + "'", line_);
  }

 private:
  void skip_blank() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '%') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  Token simple(Token::Kind kind, const char* text) {
    ++pos_;
    return {kind, text, line_};
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

class Parser {
 public:
  explicit Parser(const std::string& text) : lexer_(text) { advance(); }

  Program parse() {
    Program program;
    while (current_.kind != Token::End) {
      if (current_.kind == Token::Show) {
        advance();
        program.shows.push_back(parse_show());
        continue;
      }
      program.rules.push_back(parse_rule());
    }
    return program;
  }

 private:
  void advance() { current_ = lexer_.next(); }

  void expect(Token::Kind kind, const char* what) {
    if (current_.kind != kind) {
      throw AspSyntaxError(std::string("expected ") + what + ", got '" + current_.text + "'", current_.line);
    }
    advance();
  }

  std::pair<std::string, int> parse_show() {
    if (current_.kind != Token::Ident) throw AspSyntaxError("expected predicate after #show", current_.line);
    const std::string predicate = current_.text;
    advance();
    expect(Token::Slash, "'/'");
    if (current_.kind != Token::Integer) throw AspSyntaxError("expected arity after '/'", current_.line);
    const int arity = std::stoi(current_.text);
    advance();
    expect(Token::Dot, "'.'");
    return {predicate, arity};
  }

  Term parse_term() {
    Term term;
    if (current_.kind == Token::Variable) {
      term.is_variable = true;
      term.text = current_.text;
    } else if (current_.kind == Token::Ident || current_.kind == Token::Integer ||
               current_.kind == Token::String) {
      term.text = current_.text;
    } else {
      throw AspSyntaxError("expected a term, got '" + current_.text + "'", current_.line);
    }
    advance();
    return term;
  }

  Atom parse_atom() {
    if (current_.kind != Token::Ident) {
      throw AspSyntaxError("expected predicate, got '" + current_.text + "'", current_.line);
    }
    Atom atom;
    atom.predicate = current_.text;
    advance();
    if (current_.kind == Token::LParen) {
      advance();
      atom.args.push_back(parse_term());
      while (current_.kind == Token::Comma) {
        advance();
        atom.args.push_back(parse_term());
      }
      expect(Token::RParen, "')'");
    }
    return atom;
  }

  Literal parse_literal() {
    Literal literal;
    if (current_.kind == Token::Not) {
      literal.negated = true;
      advance();
    }
    literal.atom = parse_atom();
    return literal;
  }

  Rule parse_rule() {
    Rule rule;
    const std::size_t line = current_.line;
    if (current_.kind != Token::If) rule.head = parse_atom();
    if (current_.kind == Token::If) {
      advance();
      rule.body.push_back(parse_literal());
      while (current_.kind == Token::Comma) {
        advance();
        rule.body.push_back(parse_literal());
      }
    }
    expect(Token::Dot, "'.'");
    check_safety(rule, line);
    return rule;
  }

  // Every variable must occur in a positive body literal.
  static void check_safety(const Rule& rule, std::size_t line) {
    std::set<std::string> safe;
    for (const Literal& literal : rule.body) {
      if (literal.negated) continue;
      for (const Term& term : literal.atom.args) {
        if (term.is_variable) safe.insert(term.text);
      }
    }
    auto require_safe = [&](const Atom& atom) {
      for (const Term& term : atom.args) {
        if (term.is_variable && !safe.count(term.text)) {
          throw AspSyntaxError("unsafe variable " + term.text, line);
        }
      }
    };
    if (rule.head) require_safe(*rule.head);
    for (const Literal& literal : rule.body) {
      if (literal.negated) require_safe(literal.atom);
    }
  }

  Lexer lexer_;
  Token current_;
};

using Binding = std::map<std::string, std::string>;

std::string render_with(const Atom& atom, const Binding& binding) {
  std::string out = atom.predicate;
  if (atom.args.empty()) return out;
  out.push_back('(');
  for (std::size_t i = 0; i < atom.args.size(); ++i) {
    if (i) out.push_back(',');
    const Term& term = atom.args[i];
    out += term.is_variable ? binding.at(term.text) : term.text;
  }
  out.push_back(')');
  return out;
}

struct GroundLiteral {
  bool negated;
  std::string atom;
};

struct GroundRule {
  std::optional<std::string> head;
  std::vector<GroundLiteral> body;
};

// Atoms keyed by predicate for join-style matching.
struct AtomIndex {
  std::map<std::string, std::vector<std::vector<std::string>>> by_predicate;

  bool insert(const std::string& predicate, std::vector<std::string> args, std::set<std::string>& keys) {
    std::string key = predicate;
    if (!args.empty()) {
      key.push_back('(');
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (i) key.push_back(',');
        key += args[i];
      }
      key.push_back(')');
    }
    if (!keys.insert(key).second) return false;
    by_predicate[predicate].push_back(std::move(args));
    return true;
  }
};

// Matches the positive body left-to-right against `index`, invoking `emit`
// for every complete binding.
void match_positive(const std::vector<const Atom*>& body, std::size_t at, const AtomIndex& index,
                    Binding& binding, const std::function<void(const Binding&)>& emit) {
  if (at == body.size()) {
    emit(binding);
    return;
  }
  const Atom& atom = *body[at];
  auto it = index.by_predicate.find(atom.predicate);
  if (it == index.by_predicate.end()) return;
  for (const auto& args : it->second) {
    if (args.size() != atom.args.size()) continue;
    std::vector<std::string> bound_here;
    bool ok = true;
    for (std::size_t i = 0; i < args.size(); ++i) {
      const Term& term = atom.args[i];
      if (!term.is_variable) {
        if (term.text != args[i]) {
          ok = false;
          break;
        }
        continue;
      }
      auto existing = binding.find(term.text);
      if (existing == binding.end()) {
        binding[term.text] = args[i];
        bound_here.push_back(term.text);
      } else if (existing->second != args[i]) {
        ok = false;
        break;
      }
    }
    if (ok) match_positive(body, at + 1, index, binding, emit);
    for (const auto& name : bound_here) binding.erase(name);
  }
}

std::vector<std::string> atom_args_of(const Atom& atom, const Binding& binding) {
  std::vector<std::string> args;
  args.reserve(atom.args.size());
  for (const Term& term : atom.args) args.push_back(term.is_variable ? binding.at(term.text) : term.text);
  return args;
}

// Instantiates rules against an over-approximation of derivable atoms
// (negation ignored), which bounds the ground program tightly enough for
// the small discussion graphs this tool serves.
std::vector<GroundRule> ground_program(const Program& program) {
  AtomIndex possible;
  std::set<std::string> keys;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Rule& rule : program.rules) {
      if (!rule.head) continue;
      std::vector<const Atom*> positive;
      for (const Literal& literal : rule.body) {
        if (!literal.negated) positive.push_back(&literal.atom);
      }
      Binding binding;
      match_positive(positive, 0, possible, binding, [&](const Binding& bound) {
        if (possible.insert(rule.head->predicate, atom_args_of(*rule.head, bound), keys)) changed = true;
      });
    }
  }

  std::vector<GroundRule> ground;
  std::set<std::string> seen_rules;
  for (const Rule& rule : program.rules) {
    std::vector<const Atom*> positive;
    for (const Literal& literal : rule.body) {
      if (!literal.negated) positive.push_back(&literal.atom);
    }
    Binding binding;
    match_positive(positive, 0, possible, binding, [&](const Binding& bound) {
      GroundRule instance;
      if (rule.head) instance.head = render_with(*rule.head, bound);
      for (const Literal& literal : rule.body) {
        instance.body.push_back({literal.negated, render_with(literal.atom, bound)});
      }
      std::string signature = instance.head.value_or(":-");
      for (const auto& lit : instance.body) signature += "|" + std::string(lit.negated ? "~" : "") + lit.atom;
      if (seen_rules.insert(signature).second) ground.push_back(std::move(instance));
    });
  }
  return ground;
}

std::set<std::string> collect_atoms(const std::vector<GroundRule>& rules) {
  std::set<std::string> atoms;
  for (const GroundRule& rule : rules) {
    if (rule.head) atoms.insert(*rule.head);
    for (const auto& literal : rule.body) atoms.insert(literal.atom);
  }
  return atoms;
}

// True when no cycle in the atom dependency graph crosses a negative edge.
bool is_stratified(const std::vector<GroundRule>& rules, const std::set<std::string>& atoms) {
  std::map<std::string, std::vector<std::pair<std::string, bool>>> deps;  // head -> (body atom, negated)
  for (const GroundRule& rule : rules) {
    if (!rule.head) continue;
    for (const auto& literal : rule.body) deps[*rule.head].push_back({literal.atom, literal.negated});
  }
  // Tarjan-free approach: repeatedly test reachability across each negative edge.
  for (const auto& [head, edges] : deps) {
    for (const auto& [body_atom, negated] : edges) {
      if (!negated) continue;
      // negative edge head -> body_atom; cycle iff head reachable from body_atom
      std::set<std::string> visited;
      std::vector<std::string> stack{body_atom};
      while (!stack.empty()) {
        std::string at = stack.back();
        stack.pop_back();
        if (at == head) return false;
        if (!visited.insert(at).second) continue;
        auto it = deps.find(at);
        if (it == deps.end()) continue;
        for (const auto& [next, _] : it->second) stack.push_back(next);
      }
    }
  }
  (void)atoms;
  return true;
}

// Least model of a negation-free ground program.
std::set<std::string> least_model(const std::vector<GroundRule>& rules) {
  std::set<std::string> model;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const GroundRule& rule : rules) {
      if (!rule.head || model.count(*rule.head)) continue;
      bool satisfied = true;
      for (const auto& literal : rule.body) {
        if (!model.count(literal.atom)) {
          satisfied = false;
          break;
        }
      }
      if (satisfied) {
        model.insert(*rule.head);
        changed = true;
      }
    }
  }
  return model;
}

bool constraints_hold(const std::vector<GroundRule>& rules, const std::set<std::string>& model) {
  for (const GroundRule& rule : rules) {
    if (rule.head) continue;
    bool fired = true;
    for (const auto& literal : rule.body) {
      const bool in_model = model.count(literal.atom) > 0;
      if (literal.negated ? in_model : !in_model) {
        fired = false;
        break;
      }
    }
    if (fired) return false;
  }
  return true;
}

// Stratified evaluation: fixpoint where a negative literal blocks a rule
// until no rule can derive its atom anymore. With stratification guaranteed,
// evaluating rules whose negative parts refer only to already-settled atoms
// reduces to iterating the reduct against the current model,
// recomputed until stable.
std::set<std::string> perfect_model(const std::vector<GroundRule>& rules) {
  std::set<std::string> model;
  std::size_t guard = collect_atoms(rules).size() + 2;
  while (guard-- > 0) {
    // reduct against the current model, then least fixpoint
    std::vector<GroundRule> reduct;
    for (const GroundRule& rule : rules) {
      if (!rule.head) continue;
      GroundRule positive;
      positive.head = rule.head;
      bool blocked = false;
      for (const auto& literal : rule.body) {
        if (literal.negated) {
          if (model.count(literal.atom)) {
            blocked = true;
            break;
          }
        } else {
          positive.body.push_back(literal);
        }
      }
      if (!blocked) reduct.push_back(std::move(positive));
    }
    std::set<std::string> next = least_model(reduct);
    if (next == model) return model;
    model = std::move(next);
  }
  throw AspUnsupportedError("fixpoint iteration did not converge on a supposedly stratified program");
}

bool is_stable(const std::vector<GroundRule>& rules, const std::set<std::string>& candidate) {
  std::vector<GroundRule> reduct;
  for (const GroundRule& rule : rules) {
    if (!rule.head) continue;
    GroundRule positive;
    positive.head = rule.head;
    bool blocked = false;
    for (const auto& literal : rule.body) {
      if (literal.negated) {
        if (candidate.count(literal.atom)) {
          blocked = true;
          break;
        }
      } else {
        positive.body.push_back(literal);
      }
    }
    if (!blocked) reduct.push_back(std::move(positive));
  }
  return least_model(reduct) == candidate;
}

}  // namespace

bool Atom::ground() const {
  return std::none_of(args.begin(), args.end(), [](const Term& t) { return t.is_variable; });
}

std::string Atom::render() const {
  std::string out = predicate;
  if (args.empty()) return out;
  out.push_back('(');
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) out.push_back(',');
    out += args[i].text;
  }
  out.push_back(')');
  return out;
}

Program parse_program(const std::string& text) { return Parser(text).parse(); }

SolveOutcome solve(const Program& program) {
  const std::vector<GroundRule> ground = ground_program(program);
  const std::set<std::string> atoms = collect_atoms(ground);

  std::optional<std::set<std::string>> model;
  if (is_stratified(ground, atoms)) {
    std::set<std::string> candidate = perfect_model(ground);
    if (constraints_hold(ground, candidate)) model = std::move(candidate);
  } else {
    if (atoms.size() > kBruteForceAtomLimit) {
      throw AspUnsupportedError("program is not stratified and has too many atoms (" +
                                std::to_string(atoms.size()) + ") for exhaustive search");
    }
    std::vector<std::string> ordered(atoms.begin(), atoms.end());
    const std::size_t combos = static_cast<std::size_t>(1) << ordered.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
      std::set<std::string> candidate;
      for (std::size_t bit = 0; bit < ordered.size(); ++bit) {
        if (mask & (static_cast<std::size_t>(1) << bit)) candidate.insert(ordered[bit]);
      }
      if (is_stable(ground, candidate) && constraints_hold(ground, candidate)) {
        model = std::move(candidate);
        break;
      }
    }
  }

  SolveOutcome outcome;
  if (!model) return outcome;
  outcome.satisfiable = true;
  for (const std::string& atom : *model) {
    if (!program.shows.empty()) {
      const auto paren = atom.find('(');
      const std::string predicate = paren == std::string::npos ? atom : atom.substr(0, paren);
      int arity = 0;
      if (paren != std::string::npos) {
        arity = 1;
        bool in_string = false;
        for (std::size_t i = paren + 1; i + 1 < atom.size(); ++i) {
          if (atom[i] == '"') in_string = !in_string;
          if (atom[i] == ',' && !in_string) ++arity;
        }
      }
      const bool shown = std::any_of(program.shows.begin(), program.shows.end(), [&](const auto& spec) {
        return spec.first == predicate && spec.second == arity;
      });
      if (!shown) continue;
    }
    outcome.shown_atoms.push_back(atom);
  }
  std::sort(outcome.shown_atoms.begin(), outcome.shown_atoms.end());
  return outcome;
}

SolveOutcome solve_text(const std::string& program_text) { return solve(parse_program(program_text)); }

}  // namespace council::asp
