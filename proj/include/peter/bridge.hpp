// Copyright 2026 The PETER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Client side of the external scorer protocol.
//
// Transport: one JSON object per line, over a child process' stdio or a
// TCP connection. Every request carries a client-assigned integer "id" that
// the bridge echoes. Requests and their successful replies:
//
//   handshake {protocol, verbalizer: [word...]}
//       -> {protocol, accepted, rejected: [word...], capacity, defaults}
//   score     {rendered_tokens, mask_index, candidates, target_position}
//       -> {logits: [one per candidate]}
//   train     {config, examples: [{rendered_tokens, mask_index, candidates,
//              target_position, gold | target}]}
//       -> {loss}
//   save      {}        -> {handle}
//   load      {handle}  -> {ok}
//
// A failed request is answered with
//   {id, kind: "error", error: {type, message}}
// and unknown kinds get type "unknown_kind".
//
// Addresses: "host:port" for TCP, "exec:<shell command>" to spawn a child.

#pragma once

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

#include <netdb.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include "json.hpp"
#include "peter/error.hpp"
#include "peter/scorer.hpp"

namespace peter {

inline constexpr int kProtocolVersion = 1;

/// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Next line without its terminator; throws ConnectionError on EOF.
  virtual std::string recv_line() = 0;
  virtual const std::string& address() const = 0;
};

namespace detail {

/// Line reader/writer over a pair of file descriptors.
class FdChannel : public LineChannel {
 public:
  FdChannel(int in_fd, int out_fd, std::string address)
      : in_(in_fd), out_(out_fd), address_(std::move(address)) {}

  void send_line(const std::string& line) override {
    std::string buf = line + '\n';
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      ssize_t n = send_or_write(out_, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ConnectionError(address_, std::string("write failed: ") + std::strerror(errno));
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
  }

  std::string recv_line() override {
    for (;;) {
      auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      char chunk[4096];
      ssize_t n = ::read(in_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ConnectionError(address_, std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ConnectionError(address_, "connection closed by bridge");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  const std::string& address() const override { return address_; }

 protected:
  static ssize_t send_or_write(int fd, const char* p, std::size_t n) {
#ifdef MSG_NOSIGNAL
    ssize_t r = ::send(fd, p, n, MSG_NOSIGNAL);
    if (r >= 0 || errno != ENOTSOCK) return r;
#endif
    return ::write(fd, p, n);
  }

  int in_;
  int out_;
  std::string address_;
  std::string buffer_;
};

}  // namespace detail

class TcpChannel : public detail::FdChannel {
 public:
  TcpChannel(const std::string& host, const std::string& port)
      : FdChannel(-1, -1, host + ":" + port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res);
    if (rc != 0) throw ConnectionError(address_, ::gai_strerror(rc));
    std::string last = "no addresses";
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      last = std::strerror(errno);
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw ConnectionError(address_, last);
    in_ = out_ = fd;
  }

  ~TcpChannel() override {
    if (in_ >= 0) ::close(in_);
  }

  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;
};

/// Spawns `/bin/sh -c command` and talks over its stdin/stdout.
class ProcessChannel : public detail::FdChannel {
 public:
  explicit ProcessChannel(const std::string& command) : FdChannel(-1, -1, "exec:" + command) {
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0) throw ConnectionError(address_, std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw ConnectionError(address_, std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) throw ConnectionError(address_, std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    out_ = to_child[1];
    in_ = from_child[0];
    std::signal(SIGPIPE, SIG_IGN);
  }

  ~ProcessChannel() override {
    if (out_ >= 0) ::close(out_);
    if (in_ >= 0) ::close(in_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

 private:
  pid_t pid_ = -1;
};

/// "exec:<command>" or "host:port".
inline std::unique_ptr<LineChannel> open_channel(const std::string& address) {
  if (address.rfind("exec:", 0) == 0) return std::make_unique<ProcessChannel>(address.substr(5));
  auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
    throw ConfigError("bridge address '" + address + "' is neither host:port nor exec:<command>");
  return std::make_unique<TcpChannel>(address.substr(0, colon), address.substr(colon + 1));
}

struct Handshake {
  int protocol = 0;
  bool accepted = false;
  std::vector<std::string> rejected;
  std::size_t capacity = 1;
  nlohmann::json defaults;
};

/// Request/response layer: id assignment, echo checks, error decoding and
/// optional transcript capture. One request in flight per client.
class BridgeClient {
 public:
  explicit BridgeClient(std::unique_ptr<LineChannel> channel) : channel_(std::move(channel)) {}

  /// Every request and reply line is appended to `out` as "> " / "< ".
  void record_transcript(std::ostream* out) { transcript_ = out; }

  nlohmann::json call(const std::string& kind, nlohmann::ordered_json body = nlohmann::ordered_json::object()) {
    std::lock_guard<std::mutex> lock(mu_);
    const std::int64_t id = next_id_++;
    nlohmann::ordered_json req;
    req["id"] = id;
    req["kind"] = kind;
    for (auto& [k, v] : body.items()) req[k] = v;
    const std::string line = req.dump();
    if (transcript_) *transcript_ << "> " << line << '\n';
    channel_->send_line(line);
    const std::string reply_line = channel_->recv_line();
    if (transcript_) *transcript_ << "< " << reply_line << '\n';

    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(reply_line);
    } catch (const nlohmann::json::exception&) {
      throw ProtocolError("malformed_reply", "bridge sent a line that is not JSON");
    }
    if (!reply.is_object() || !reply.contains("id") || !reply["id"].is_number_integer())
      throw ProtocolError("malformed_reply", "reply has no integer id");
    if (reply["id"].get<std::int64_t>() != id)
      throw ProtocolError("id_mismatch", "expected id " + std::to_string(id) + ", got " +
                                             reply["id"].dump());
    const std::string rkind = reply.value("kind", "");
    if (rkind == "error") {
      const auto& e = reply.contains("error") ? reply["error"] : nlohmann::json::object();
      throw ProtocolError(e.value("type", "error"), e.value("message", "bridge reported an error"));
    }
    if (rkind != kind)
      throw ProtocolError("kind_mismatch", "sent '" + kind + "', got '" + rkind + "'");
    return reply;
  }

  Handshake handshake(std::span<const std::string> verbalizer) {
    auto r = call("handshake", {{"protocol", kProtocolVersion},
                                {"verbalizer", std::vector<std::string>(verbalizer.begin(), verbalizer.end())}});
    Handshake h;
    h.protocol = r.value("protocol", 0);
    h.accepted = r.value("accepted", false);
    h.rejected = r.value("rejected", std::vector<std::string>{});
    h.capacity = r.value("capacity", std::size_t{1});
    h.defaults = r.value("defaults", nlohmann::json::object());
    if (h.protocol != kProtocolVersion)
      throw ProtocolError("version", "bridge speaks protocol " + std::to_string(h.protocol));
    return h;
  }

  const std::string& address() const { return channel_->address(); }

 private:
  std::unique_ptr<LineChannel> channel_;
  std::mutex mu_;
  std::int64_t next_id_ = 1;
  std::ostream* transcript_ = nullptr;
};

inline nlohmann::ordered_json cloze_request_fields(const ClozeExample& ex,
                                                   std::span<const std::string> candidates) {
  nlohmann::ordered_json j;
  j["rendered_tokens"] = ex.rendered_tokens;
  j["mask_index"] = ex.mask_index;
  j["candidates"] = std::vector<std::string>(candidates.begin(), candidates.end());
  j["target_position"] = {{"sentence_id", ex.sentence_id}, {"token_index", ex.token_index}};
  return j;
}

inline LogitVector parse_logits(const nlohmann::json& reply, std::size_t expected) {
  if (!reply.contains("logits") || !reply["logits"].is_array())
    throw ProtocolError("malformed_reply", "score reply has no logits array");
  const auto& arr = reply["logits"];
  if (arr.size() != expected)
    throw ProtocolError("arity", "expected " + std::to_string(expected) + " logits, got " +
                                     std::to_string(arr.size()));
  LogitVector z;
  for (const auto& v : arr) {
    if (!v.is_number()) throw ProtocolError("malformed_reply", "non-numeric logit");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw ProtocolError("malformed_reply", "non-finite logit");
    z.push_back(d);
  }
  return z;
}

/// Scorer backed by an external bridge process.
class BridgeScorer : public Scorer {
 public:
  explicit BridgeScorer(std::unique_ptr<LineChannel> channel) : client_(std::move(channel)) {}

  static std::unique_ptr<BridgeScorer> connect(const std::string& address) {
    return std::make_unique<BridgeScorer>(open_channel(address));
  }

  void prepare(std::span<const std::string> candidates) override {
    handshake_ = client_.handshake(candidates);
    if (!handshake_.accepted || !handshake_.rejected.empty()) {
      std::string list;
      for (const auto& w : handshake_.rejected) list += (list.empty() ? "" : ", ") + w;
      throw ProtocolError("vocabulary", "bridge rejected verbalizer words: " + list);
    }
    candidates_.assign(candidates.begin(), candidates.end());
  }

  LogitVector score(const ScoreRequest& request) override {
    auto reply = client_.call("score", cloze_request_fields(request.example, request.candidates));
    return parse_logits(reply, request.candidates.size());
  }

  double train(const std::vector<LabeledCloze>& examples, const TrainConfig& config) override {
    if (examples.empty()) throw Error("cannot train a scorer on zero examples");
    nlohmann::ordered_json batch = nlohmann::ordered_json::array();
    for (const auto& e : examples) {
      auto j = cloze_request_fields(e.example, candidates_);
      j["gold"] = e.gold;
      batch.push_back(std::move(j));
    }
    auto reply = client_.call("train", {{"config", config.to_json()}, {"examples", batch}});
    if (!reply.contains("loss") || !reply["loss"].is_number())
      throw ProtocolError("malformed_reply", "train reply has no loss");
    return reply["loss"].get<double>();
  }

  nlohmann::ordered_json save() override {
    auto reply = client_.call("save");
    if (!reply.contains("handle")) throw ProtocolError("malformed_reply", "save reply has no handle");
    return {{"kind", "bridge-checkpoint"}, {"address", client_.address()}, {"handle", reply["handle"]}};
  }

  void load(const nlohmann::json& handle) { client_.call("load", {{"handle", handle}}); }

  std::size_t capacity() const override { return handshake_.capacity; }
  const Handshake& handshake() const { return handshake_; }
  BridgeClient& client() { return client_; }

 private:
  BridgeClient client_;
  Handshake handshake_;
  std::vector<std::string> candidates_;
};

}  // namespace peter
