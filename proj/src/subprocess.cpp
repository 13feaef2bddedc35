#include "council/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include "council/errors.hpp"

namespace council {

namespace {

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

}  // namespace

SubprocessResult run_subprocess(const std::vector<std::string>& argv, const std::string& input,
                                int timeout_ms) {
  if (argv.empty()) throw Error("run_subprocess: empty argv");

  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0) {
    throw Error("run_subprocess: pipe() failed");
  }

  const pid_t pid = ::fork();
  if (pid < 0) throw Error("run_subprocess: fork() failed");

  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[0]);
    ::close(err_pipe[1]);
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const auto& arg : argv) args.push_back(const_cast<char*>(arg.c_str()));
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    // exec failed; 127 mirrors the shell convention for "command not found".
    _exit(127);
  }

  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  set_nonblocking(in_pipe[1]);
  set_nonblocking(out_pipe[0]);
  set_nonblocking(err_pipe[0]);
  ::signal(SIGPIPE, SIG_IGN);

  SubprocessResult result;
  std::size_t written = 0;
  bool stdin_open = true;
  bool stdout_open = true;
  bool stderr_open = true;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);

  while (stdin_open || stdout_open || stderr_open) {
    if (input.size() == written && stdin_open) {
      ::close(in_pipe[1]);
      stdin_open = false;
      continue;
    }
    struct pollfd fds[3];
    nfds_t n = 0;
    int stdin_slot = -1, stdout_slot = -1, stderr_slot = -1;
    if (stdin_open) {
      stdin_slot = n;
      fds[n++] = {in_pipe[1], POLLOUT, 0};
    }
    if (stdout_open) {
      stdout_slot = n;
      fds[n++] = {out_pipe[0], POLLIN, 0};
    }
    if (stderr_open) {
      stderr_slot = n;
      fds[n++] = {err_pipe[0], POLLIN, 0};
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                               deadline - std::chrono::steady_clock::now())
                               .count();
    if (remaining <= 0) {
      result.timed_out = true;
      break;
    }
    const int ready = ::poll(fds, n, static_cast<int>(remaining));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (ready == 0) {
      result.timed_out = true;
      break;
    }
    char buffer[4096];
    if (stdin_slot >= 0 && (fds[stdin_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
      if (fds[stdin_slot].revents & (POLLERR | POLLHUP)) {
        ::close(in_pipe[1]);
        stdin_open = false;
      } else {
        const ssize_t wrote = ::write(in_pipe[1], input.data() + written, input.size() - written);
        if (wrote > 0) {
          written += static_cast<std::size_t>(wrote);
        } else if (wrote < 0 && errno != EAGAIN && errno != EINTR) {
          ::close(in_pipe[1]);
          stdin_open = false;
        }
      }
    }
    auto drain = [&buffer](int fd, std::string& sink, bool& open_flag, short revents) {
      if (!(revents & (POLLIN | POLLHUP | POLLERR))) return;
      while (true) {
        const ssize_t got = ::read(fd, buffer, sizeof(buffer));
        if (got > 0) {
          sink.append(buffer, static_cast<std::size_t>(got));
        } else if (got == 0) {
          ::close(fd);
          open_flag = false;
          break;
        } else {
          if (errno == EAGAIN || errno == EWOULDBLOCK) break;
          if (errno == EINTR) continue;
          ::close(fd);
          open_flag = false;
          break;
        }
      }
    };
    if (stdout_slot >= 0) drain(out_pipe[0], result.out, stdout_open, fds[stdout_slot].revents);
    if (stderr_slot >= 0) drain(err_pipe[0], result.err, stderr_open, fds[stderr_slot].revents);
  }

  if (stdin_open) ::close(in_pipe[1]);
  if (stdout_open) ::close(out_pipe[0]);
  if (stderr_open) ::close(err_pipe[0]);

  if (result.timed_out) ::kill(pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
  if (WIFEXITED(status)) {
    result.exit_code = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_code = 128 + WTERMSIG(status);
  }
  if (result.exit_code == 127 && result.out.empty()) {
    throw SolverUnavailableError("cannot execute '" + argv[0] + "': not found or not executable");
  }
  return result;
}

}  // namespace council
