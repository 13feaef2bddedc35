// council-asp: answer-set solver for ground-able normal logic programs.
// Reads a program on stdin and prints answer sets in the conventional
// solver text format, so callers written against clingo-style output can
// drive either binary.

#include <iostream>
#include <sstream>
#include <string>

#include "council/asp.hpp"

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--version") {
      std::cout << "council-asp version 1.0.0\n";
      return 0;
    }
    if (arg == "--help" || arg == "-h") {
      std::cout << "usage: council-asp [-] < program.lp\n"
                << "Reads a logic program on stdin, prints the first answer set.\n"
                << "Exit codes: 10 satisfiable, 20 unsatisfiable, 65 invalid program.\n";
      return 0;
    }
    if (arg != "-" && !arg.empty() && arg[0] == '-') {
      std::cerr << "council-asp: unknown option " << arg << "\n";
      return 65;
    }
  }

  std::stringstream buffer;
  buffer << std::cin.rdbuf();

  std::cout << "council-asp version 1.0.0\nReading from stdin\nSolving...\n";
  try {
    const auto outcome = council::asp::solve_text(buffer.str());
    if (!outcome.satisfiable) {
      std::cout << "UNSATISFIABLE\n\nModels       : 0\n";
      return 20;
    }
    std::cout << "Answer: 1\n";
    for (std::size_t i = 0; i < outcome.shown_atoms.size(); ++i) {
      if (i) std::cout << ' ';
      std::cout << outcome.shown_atoms[i];
    }
    std::cout << "\nSATISFIABLE\n\nModels       : 1+\n";
    return 10;
  } catch (const council::Error& ex) {
    std::cerr << "council-asp: error: " << ex.what() << "\n";
    return 65;
  }
}
