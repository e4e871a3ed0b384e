#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <spdlog/spdlog.h>

#include "todflow/errors.hpp"
#include "todflow/providers.hpp"

namespace todflow {

namespace {

constexpr std::size_t kTailBytes = 2048;

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

std::string command_line(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& a : argv) {
    if (!out.empty()) out += ' ';
    out += a;
  }
  return out;
}

}  // namespace

ExternalProvider::ExternalProvider(std::vector<std::string> argv, ActVocabulary vocab,
                                   std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), vocab_(std::move(vocab)), timeout_(timeout) {
  if (argv_.empty()) throw ProviderSpawnError("empty provider command");
  // A provider that dies between requests must not take us down with it.
  ::signal(SIGPIPE, SIG_IGN);
}

ExternalProvider::~ExternalProvider() { shutdown(); }

void ExternalProvider::spawn() {
  int in_pipe[2];
  int out_pipe[2];
  int err_pipe[2];
  int exec_pipe[2];
  if (::pipe(in_pipe) || ::pipe(out_pipe) || ::pipe(err_pipe) || ::pipe2(exec_pipe, O_CLOEXEC)) {
    throw ProviderSpawnError(std::string("cannot create pipes: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw ProviderSpawnError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1],
                   exec_pipe[0]}) {
      ::close(fd);
    }
    ::signal(SIGPIPE, SIG_DFL);
    std::vector<char*> args;
    for (auto& a : argv_) args.push_back(a.data());
    args.push_back(nullptr);
    ::execvp(args[0], args.data());
    const int err = errno;
    [[maybe_unused]] auto n = ::write(exec_pipe[1], &err, sizeof err);
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);
  ::close(exec_pipe[1]);
  int err = 0;
  ssize_t n;
  do {
    n = ::read(exec_pipe[0], &err, sizeof err);
  } while (n < 0 && errno == EINTR);
  ::close(exec_pipe[0]);
  if (n == static_cast<ssize_t>(sizeof err)) {
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(err_pipe[0]);
    ::waitpid(pid, nullptr, 0);
    throw ProviderSpawnError("cannot start provider '" + command_line(argv_) + "': " + std::strerror(err));
  }
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  err_child_ = err_pipe[0];
  ::fcntl(err_child_, F_SETFL, ::fcntl(err_child_, F_GETFL) | O_NONBLOCK);
  out_buf_.clear();
  err_tail_.clear();
}

void ExternalProvider::shutdown() {
  close_fd(to_child_);
  close_fd(from_child_);
  close_fd(err_child_);
  if (pid_ > 0) {
    // Closing stdin asks the provider to finish; give it a moment first.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

void ExternalProvider::drain_stderr() {
  if (err_child_ < 0) return;
  char buf[1024];
  for (;;) {
    const ssize_t n = ::read(err_child_, buf, sizeof buf);
    if (n <= 0) break;
    err_tail_.append(buf, static_cast<std::size_t>(n));
    if (err_tail_.size() > kTailBytes) err_tail_.erase(0, err_tail_.size() - kTailBytes);
  }
}

void ExternalProvider::fail_exited(const std::string& what) {
  drain_stderr();
  const std::string tail = err_tail_;
  close_fd(to_child_);
  close_fd(from_child_);
  close_fd(err_child_);
  int status = 0;
  if (pid_ > 0) ::waitpid(pid_, &status, 0);
  pid_ = -1;
  std::string msg = "provider '" + command_line(argv_) + "' " + what;
  if (WIFEXITED(status)) msg += " (exit status " + std::to_string(WEXITSTATUS(status)) + ")";
  if (!tail.empty()) msg += "; stderr: " + tail;
  throw ProviderSpawnError(msg);
}

std::string ExternalProvider::read_line(std::chrono::steady_clock::time_point deadline) {
  for (;;) {
    if (auto nl = out_buf_.find('\n'); nl != std::string::npos) {
      std::string line = out_buf_.substr(0, nl);
      out_buf_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      ::kill(pid_, SIGKILL);
      drain_stderr();
      close_fd(to_child_);
      close_fd(from_child_);
      close_fd(err_child_);
      ::waitpid(pid_, nullptr, 0);
      pid_ = -1;
      throw ProviderTimeout("provider '" + command_line(argv_) + "' did not reply within " +
                            std::to_string(timeout_.count()) + " ms");
    }
    pollfd fds[2] = {{from_child_, POLLIN, 0}, {err_child_, POLLIN, 0}};
    const int rc = ::poll(fds, 2, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProviderSpawnError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (fds[1].revents) drain_stderr();
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      const ssize_t n = ::read(from_child_, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) fail_exited("exited before replying");
      out_buf_.append(buf, static_cast<std::size_t>(n));
    }
  }
}

ProviderReply ExternalProvider::request(const ProviderRequest& request) {
  if (request.k < 1) throw UsageError("k must be at least 1");
  if (pid_ < 0) spawn();
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  const std::uint64_t id = next_id_++;
  const std::string line = request_to_json(request, id, vocab_).dump() + "\n";

  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(to_child_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail_exited("closed its input");
    }
    written += static_cast<std::size_t>(n);
  }

  const std::string reply_line = read_line(deadline);
  nlohmann::json reply;
  try {
    reply = nlohmann::json::parse(reply_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(std::string("malformed reply: ") + e.what());
  }
  if (!reply.is_object()) throw ProtocolError("reply must be a JSON object");
  if (!reply.contains("v") || reply["v"] != 1) throw ProtocolError("reply has missing or unsupported 'v'");
  if (!reply.contains("id") || !reply["id"].is_number_unsigned() || reply["id"].get<std::uint64_t>() != id) {
    throw ProtocolError("reply id does not echo request id " + std::to_string(id));
  }
  if (!reply.contains("candidates")) throw ProtocolError("reply has no 'candidates'");
  return parse_candidates(reply["candidates"], vocab_, request.k, request.mode);
}

}  // namespace todflow
