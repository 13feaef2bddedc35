#pragma once

#include <string>
#include <vector>

namespace council {

struct SubprocessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
};

// Runs argv[0] with the given arguments, feeding `input` on stdin and
// capturing stdout/stderr. Throws SolverUnavailableError when the executable
// cannot be spawned.
SubprocessResult run_subprocess(const std::vector<std::string>& argv, const std::string& input,
                                int timeout_ms = 15000);

}  // namespace council
