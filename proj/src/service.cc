/* Copyright 2026 The oosguard Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "oosguard/service.h"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sodium.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>

#include "oosguard/dataset.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

json error_response(const json& id, const std::string& message) {
  json out = {{"error", message}};
  if (!id.is_null()) out["id"] = id;
  return out;
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  std::vector<unsigned char> out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr,
                        &len, &end, sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != text.data() + text.size()) {
    throw DataError("embedding is not valid base64");
  }
  out.resize(len);
  return out;
}

json handle_request(const FittedScorer& scorer, const json& request) {
  const json id = request.is_object() && request.contains("id") ? request["id"]
                                                                 : json(nullptr);
  if (!request.is_object()) return error_response(id, "request must be a JSON object");
  if (!scorer.threshold()) return error_response(id, "model has no threshold");
  const double tau = *scorer.threshold();
  ScoreResult result;
  try {
    const bool has_text = request.contains("text");
    const bool has_embedding = request.contains("embedding");
    if (has_text == has_embedding) {
      return error_response(id, "request needs exactly one of \"text\" or \"embedding\"");
    }
    if (has_text) {
      if (!request["text"].is_string()) return error_response(id, "\"text\" must be a string");
      if (!scorer.featurizer().accepts_text()) {
        return error_response(id, "text scoring unavailable");
      }
      result = scorer.score_text(request["text"].get<std::string>());
    } else {
      const json& e = request["embedding"];
      std::vector<double> features;
      if (e.is_string()) {
        features = decode_emb_record(base64_decode(e.get<std::string>()),
                                     scorer.feature_dim());
      } else if (e.is_array()) {
        for (const auto& v : e) {
          if (!v.is_number()) return error_response(id, "embedding values must be numbers");
          features.push_back(v.get<double>());
        }
      } else {
        return error_response(id, "\"embedding\" must be a base64 string or an array");
      }
      if (features.size() != scorer.feature_dim()) {
        return error_response(id, "embedding has dim " + std::to_string(features.size()) +
                                      ", expected " +
                                      std::to_string(scorer.feature_dim()));
      }
      result = scorer.score_features(features);
    }
  } catch (const Error& e) {
    return error_response(id, e.what());
  }
  const Decision decision = decide(result, tau);
  json out;
  if (!id.is_null()) out["id"] = id;
  const bool in_scope = decision.verdict == Verdict::kInScope;
  out["verdict"] = in_scope ? "in-scope" : "oos";
  out["intent"] = in_scope ? scorer.labels()[*decision.intent]
                           : std::string(kOosLabelName);
  out["d_min"] = result.d_min;
  out["tau"] = tau;
  return out;
}

std::string handle_line(const FittedScorer& scorer, std::string_view line) {
  json request;
  try {
    request = json::parse(line);
  } catch (const json::exception&) {
    return error_response(nullptr, "malformed JSON request").dump();
  }
  return handle_request(scorer, request).dump();
}

void serve_stream(const FittedScorer& scorer, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out << handle_line(scorer, line) << '\n';
    out.flush();
  }
}

Address Address::parse(std::string_view text) {
  Address a;
  std::string_view port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string_view::npos) {
    if (colon > 0) a.host = std::string(text.substr(0, colon));
    port_text = text.substr(colon + 1);
  }
  unsigned value = 0;
  const auto [ptr, ec] =
      std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
  if (port_text.empty() || ec != std::errc() ||
      ptr != port_text.data() + port_text.size() || value > 65535) {
    throw ConfigError("invalid address '" + std::string(text) +
                      "' (expected host:port)");
  }
  a.port = static_cast<std::uint16_t>(value);
  return a;
}

TcpServer::TcpServer(std::shared_ptr<const FittedScorer> scorer,
                     const Address& address)
    : scorer_(std::move(scorer)) {
  if (!scorer_->threshold()) {
    throw ConfigError("model has no threshold; run calibrate first");
  }
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(address.port);
  if (::getaddrinfo(address.host.c_str(), port.c_str(), &hints, &found) != 0 ||
      found == nullptr) {
    throw ConfigError("cannot resolve host '" + address.host + "'");
  }
  listen_fd_ = ::socket(found->ai_family, found->ai_socktype, found->ai_protocol);
  if (listen_fd_ < 0) {
    ::freeaddrinfo(found);
    throw Error(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, found->ai_addr, found->ai_addrlen) != 0 ||
      ::listen(listen_fd_, 128) != 0) {
    const std::string message = std::strerror(errno);
    ::freeaddrinfo(found);
    ::close(listen_fd_);
    throw Error("cannot listen on " + address.host + ":" + port + ": " + message);
  }
  ::freeaddrinfo(found);
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpServer::~TcpServer() {
  stop();
  workers_.clear();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR && !stopping_) continue;
      break;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    connections_.push_back(fd);
    workers_.emplace_back([this, fd] { handle_connection(fd); });
  }
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  std::lock_guard lock(mu_);
  for (int fd : connections_) ::shutdown(fd, SHUT_RDWR);
}

void TcpServer::handle_connection(int fd) {
  std::string buffer;
  char chunk[4096];
  for (;;) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    std::string replies;
    for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos;
         start = nl + 1) {
      std::string_view line(buffer.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
      replies += handle_line(*scorer_, line);
      replies += '\n';
    }
    buffer.erase(0, start);
    if (!replies.empty() && !send_all(fd, replies)) break;
  }
  {
    std::lock_guard lock(mu_);
    connections_.erase(std::remove(connections_.begin(), connections_.end(), fd),
                       connections_.end());
  }
  ::close(fd);
}

}  // namespace oosguard
