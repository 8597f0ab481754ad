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

#ifndef OOSGUARD_SERVICE_H_
#define OOSGUARD_SERVICE_H_

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "oosguard/scorer.h"

namespace oosguard {

// Standard base64 alphabet with padding.
std::string base64_encode(std::span<const unsigned char> bytes);
// DataError on malformed input.
std::vector<unsigned char> base64_decode(std::string_view text);

// Response to one request object:
//   {"text": "..."}  or  {"embedding": "<base64 EMB1 record>"}  or
//   {"embedding": [numbers]}, optionally with an "id" that is echoed back.
// Success: {"id", "verdict": "in-scope"|"oos", "intent": label|"oos",
// "d_min", "tau"}. Failure: {"id", "error": message}.
// The scorer must carry a threshold.
nlohmann::json handle_request(const FittedScorer& scorer,
                              const nlohmann::json& request);
// Parses one line; malformed JSON yields an error response.
std::string handle_line(const FittedScorer& scorer, std::string_view line);

// One response line per non-blank request line until end of input.
void serve_stream(const FittedScorer& scorer, std::istream& in, std::ostream& out);

struct Address {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7878;

  // "host:port", ":port" or "port". ConfigError when malformed.
  static Address parse(std::string_view text);
};

// Newline-delimited JSON over TCP, one handler thread per connection.
class TcpServer {
 public:
  // Binds and listens immediately; port 0 picks a free port. Throws
  // ConfigError without a threshold and Error when binding fails.
  TcpServer(std::shared_ptr<const FittedScorer> scorer, const Address& address);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }

  // Accepts connections until stop().
  void run();
  // Safe from any thread; closes the listener and open connections.
  void stop();

 private:
  void handle_connection(int fd);

  std::shared_ptr<const FittedScorer> scorer_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::vector<int> connections_;
  std::vector<std::jthread> workers_;
};

}  // namespace oosguard

#endif  // OOSGUARD_SERVICE_H_
