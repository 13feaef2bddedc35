#pragma once

#include <optional>
#include <string>
#include <vector>

#include "council/errors.hpp"

// A small answer-set solver for function-free normal logic programs:
// facts, rules with `not`, integrity constraints and #show directives.
// Stratified programs are evaluated by iterated fixpoint; non-stratified
// ground programs fall back to a bounded stable-model search. Backs the
// council-asp tool, which speaks the conventional solver text protocol.
namespace council::asp {

class AspSyntaxError : public Error {
 public:
  AspSyntaxError(const std::string& message, std::size_t line)
      : Error(message + " (line " + std::to_string(line) + ")"), line(line) {}
  std::size_t line;
};

class AspUnsupportedError : public Error {
 public:
  using Error::Error;
};

struct Term {
  bool is_variable = false;
  std::string text;  // constants keep their rendered form, strings keep quotes

  bool operator==(const Term& other) const { return is_variable == other.is_variable && text == other.text; }
};

struct Atom {
  std::string predicate;
  std::vector<Term> args;

  bool ground() const;
  std::string render() const;
  bool operator==(const Atom& other) const { return predicate == other.predicate && args == other.args; }
};

struct Literal {
  bool negated = false;
  Atom atom;
};

struct Rule {
  std::optional<Atom> head;  // nullopt for integrity constraints
  std::vector<Literal> body;
};

struct Program {
  std::vector<Rule> rules;
  std::vector<std::pair<std::string, int>> shows;  // (predicate, arity)
};

Program parse_program(const std::string& text);

struct SolveOutcome {
  bool satisfiable = false;
  // first answer set, filtered by #show when present, sorted for determinism
  std::vector<std::string> shown_atoms;
};

SolveOutcome solve(const Program& program);
SolveOutcome solve_text(const std::string& program_text);

}  // namespace council::asp
