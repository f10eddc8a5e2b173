// Subprocess transport for adapter-backed models (POSIX).

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "ciu/model.hpp"

namespace ciu {

namespace {

constexpr std::size_t kMaxRowsPerRequest = 8192;

using Clock = std::chrono::steady_clock;

std::string seconds_text(std::chrono::milliseconds ms) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", static_cast<double>(ms.count()) / 1000.0);
  return buf;
}

}  // namespace

std::chrono::milliseconds default_external_timeout() {
  if (const char* env = std::getenv("CIU_EXPLAIN_TIMEOUT_SECS")) {
    char* end = nullptr;
    double secs = std::strtod(env, &end);
    if (end != env && std::isfinite(secs) && secs > 0) return std::chrono::milliseconds(static_cast<long long>(secs * 1000.0));
  }
  return std::chrono::milliseconds(30000);
}

nlohmann::json parse_protocol_line(const std::string& line) {
  std::string cleaned;
  cleaned.reserve(line.size());
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (in_string) {
      cleaned += c;
      if (c == '\\' && i + 1 < line.size()) {
        cleaned += line[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      cleaned += c;
      continue;
    }
    auto match = [&](std::string_view token) { return line.compare(i, token.size(), token) == 0; };
    if (match("-Infinity")) {
      cleaned += "null";
      i += 8;
    } else if (match("Infinity")) {
      cleaned += "null";
      i += 7;
    } else if (match("NaN")) {
      cleaned += "null";
      i += 2;
    } else {
      cleaned += c;
    }
  }
  try {
    return nlohmann::json::parse(cleaned);
  } catch (const nlohmann::json::parse_error&) {
    throw ModelError("malformed adapter response: " + line.substr(0, 200));
  }
}

ExternalModel::ExternalModel(ExternalOptions options) : options_(std::move(options)) {
  if (options_.command.empty() || options_.command.front().empty())
    throw ValidationError("external model command is empty");

  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    throw ModelError(std::string("cannot create adapter channel: ") + std::strerror(errno));
  int err_pipe[2];
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw ModelError(std::string("cannot create adapter channel: ") + std::strerror(errno));
  }

  std::vector<char*> argv;
  for (auto& a : options_.command) argv.push_back(a.data());
  argv.push_back(nullptr);
  const std::string dir = options_.working_dir.string();

  pid_ = ::fork();
  if (pid_ < 0) {
    for (int fd : {sv[0], sv[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    throw ModelError(std::string("cannot launch adapter: ") + std::strerror(errno));
  }
  if (pid_ == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    int code = 0;
    if (!dir.empty() && ::chdir(dir.c_str()) != 0) {
      code = errno;
    } else {
      ::execvp(argv[0], argv.data());
      code = errno;
    }
    [[maybe_unused]] auto n = ::write(err_pipe[1], &code, sizeof code);
    ::_exit(127);
  }

  ::close(sv[1]);
  ::close(err_pipe[1]);
  to_child_ = sv[0];
  from_child_ = sv[0];

  int exec_errno = 0;
  ssize_t got = ::read(err_pipe[0], &exec_errno, sizeof exec_errno);
  ::close(err_pipe[0]);
  if (got == static_cast<ssize_t>(sizeof exec_errno)) {
    shutdown();
    throw ModelError("cannot launch adapter '" + options_.command.front() + "': " + std::strerror(exec_errno));
  }

  try {
    auto reply = request({{"op", "hello"}, {"version", 1}});
    if (reply.value("op", "") != "hello" || !reply.contains("version") || reply["version"] != 1 ||
        !reply.contains("n_inputs") || !reply["n_inputs"].is_number_integer() || !reply.contains("n_outputs") ||
        !reply["n_outputs"].is_number_integer())
      throw ModelError("handshake failed: unexpected reply " + reply.dump());
    auto ni = reply["n_inputs"].get<long long>();
    auto no = reply["n_outputs"].get<long long>();
    if (ni <= 0 || no <= 0) throw ModelError("handshake failed: adapter reports non-positive arity");
    n_inputs_ = static_cast<std::size_t>(ni);
    n_outputs_ = static_cast<std::size_t>(no);
  } catch (const ModelError& e) {
    shutdown();
    std::string what = e.what();
    if (what.rfind("handshake failed", 0) == 0) throw;
    throw ModelError("handshake failed: " + what);
  }
}

ExternalModel::~ExternalModel() { shutdown(); }

void ExternalModel::shutdown() noexcept {
  if (to_child_ >= 0) {
    try {
      std::lock_guard lock(mutex_);
      send_line(R"({"op":"bye"})");
    } catch (...) {
    }
    ::close(to_child_);
  }
  to_child_ = -1;
  from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 100 && !reaped; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        reaped = true;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!reaped) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
}

std::string ExternalModel::fingerprint() const {
  std::string cmd;
  for (const auto& a : options_.command) cmd += (cmd.empty() ? "" : " ") + a;
  return "external:" + cmd + ":" + std::to_string(n_inputs_) + "x" + std::to_string(n_outputs_);
}

void ExternalModel::send_line(const std::string& line) const {
  std::string payload = line + "\n";
  std::size_t sent = 0;
  while (sent < payload.size()) {
    ssize_t n = ::send(to_child_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ModelError(std::string("transport error writing to adapter: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::string ExternalModel::read_line() const {
  const auto deadline = Clock::now() + options_.timeout;
  for (;;) {
    auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) throw ModelError("adapter timed out after " + seconds_text(options_.timeout) + " s");
    pollfd pfd{from_child_, POLLIN, 0};
    int ready = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw ModelError(std::string("transport error: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[65536];
    ssize_t n = ::read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ModelError(std::string("transport error reading from adapter: ") + std::strerror(errno));
    }
    if (n == 0) throw ModelError("transport error: adapter closed the stream");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json ExternalModel::request(const nlohmann::json& message) const {
  if (to_child_ < 0) throw ModelError("adapter connection is closed");
  send_line(message.dump());
  auto reply = parse_protocol_line(read_line());
  ++calls_;
  if (!reply.is_object()) throw ModelError("malformed adapter response: not an object");
  if (reply.value("op", "") == "error") {
    auto msg = reply.contains("message") && reply["message"].is_string() ? reply["message"].get<std::string>()
                                                                          : reply.dump();
    throw ModelError("adapter error: " + msg);
  }
  return reply;
}

Matrix ExternalModel::predict_rows(const Matrix& inputs) const {
  std::lock_guard lock(mutex_);
  Matrix out(inputs.rows, n_outputs_);
  for (std::size_t start = 0; start < inputs.rows; start += kMaxRowsPerRequest) {
    const std::size_t count = std::min(kMaxRowsPerRequest, inputs.rows - start);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = start; r < start + count; ++r) {
      auto row = inputs.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    auto reply = request({{"op", "predict"}, {"inputs", std::move(rows)}});
    if (reply.value("op", "") != "result" || !reply.contains("outputs") || !reply["outputs"].is_array())
      throw ModelError("malformed adapter response: expected a result with outputs");
    const auto& outs = reply["outputs"];
    if (outs.size() != count)
      throw ModelError("malformed adapter response: expected " + std::to_string(count) + " output vectors, got " +
                       std::to_string(outs.size()));
    for (std::size_t i = 0; i < count; ++i) {
      const auto& vec = outs[i];
      if (!vec.is_array() || vec.size() != n_outputs_)
        throw ModelError("malformed adapter response: output vector " + std::to_string(start + i) + " has the wrong length");
      for (std::size_t k = 0; k < n_outputs_; ++k) {
        const auto& v = vec[k];
        if (v.is_null())
          out(start + i, k) = std::nan("");
        else if (v.is_number())
          out(start + i, k) = v.get<double>();
        else
          throw ModelError("malformed adapter response: non-numeric output at batch position " + std::to_string(start + i));
      }
    }
  }
  return out;
}

}  // namespace ciu
