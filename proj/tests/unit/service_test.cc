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

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "oosguard/dataset.h"
#include "oosguard/service.h"

namespace oosguard {
namespace {

using json = nlohmann::json;

// Means (0,0) "alarm" and (10,0) "weather", identity precision, tau 1.
FittedScorer two_class_scorer(std::optional<double> tau = 1.0) {
  ClassStatistics stats;
  stats.means = Matrix{{0, 0}, {10, 0}};
  stats.covariance = Matrix::identity(2);
  stats.precision = Matrix::identity(2);
  return FittedScorer({FeaturizerKind::kPassthrough, 2, 0}, identity_encoder(2), stats,
                      {"alarm", "weather"}, tau);
}

TEST(Base64Test, KnownVectorsAndRoundTrip) {
  const std::string text = "foobar";
  const std::vector<unsigned char> bytes(text.begin(), text.end());
  EXPECT_EQ(base64_encode(bytes), "Zm9vYmFy");
  EXPECT_EQ(base64_encode(std::span(bytes).first(4)), "Zm9vYg==");
  EXPECT_EQ(base64_encode(std::span(bytes).first(5)), "Zm9vYmE=");
  EXPECT_EQ(base64_encode({}), "");
  EXPECT_EQ(base64_decode("Zm9vYg=="), std::vector<unsigned char>(bytes.begin(), bytes.begin() + 4));
  std::vector<unsigned char> all(256);
  for (int i = 0; i < 256; ++i) all[i] = static_cast<unsigned char>(i);
  EXPECT_EQ(base64_decode(base64_encode(all)), all);
  EXPECT_THROW(base64_decode("Zm9v!"), DataError);
  EXPECT_THROW(base64_decode("Zm9vYg"), DataError);
}

TEST(HandleRequestTest, MeanOfClassZeroIsInScope) {
  const json r = handle_request(two_class_scorer(), {{"id", 7}, {"embedding", {0.0, 0.0}}});
  EXPECT_EQ(r, (json{{"id", 7}, {"verdict", "in-scope"}, {"intent", "alarm"},
                     {"d_min", 0.0}, {"tau", 1.0}}));
}

TEST(HandleRequestTest, FarPointIsOos) {
  const json r = handle_request(two_class_scorer(), {{"embedding", {5.0, 5.0}}});
  EXPECT_EQ(r["verdict"], "oos");
  EXPECT_EQ(r["intent"], "oos");
  EXPECT_DOUBLE_EQ(r["d_min"].get<double>(), std::sqrt(50.0));
  EXPECT_FALSE(r.contains("id"));
}

TEST(HandleRequestTest, BoundaryCountsAsInScope) {
  const json r = handle_request(two_class_scorer(), {{"embedding", {10.0, 1.0}}});
  EXPECT_EQ(r["verdict"], "in-scope");
  EXPECT_EQ(r["intent"], "weather");
}

TEST(HandleRequestTest, Base64EmbeddingRecord) {
  const auto record = encode_emb_record(std::vector<double>{9.5, 0.0});
  const json r = handle_request(two_class_scorer(), {{"id", "q"}, {"embedding", base64_encode(record)}});
  EXPECT_EQ(r["intent"], "weather");
  EXPECT_EQ(r["id"], "q");
  EXPECT_DOUBLE_EQ(r["d_min"].get<double>(), 0.5);
}

TEST(HandleRequestTest, Errors) {
  const FittedScorer s = two_class_scorer();
  auto error_of = [&](const json& req) {
    const json r = handle_request(s, req);
    EXPECT_FALSE(r.contains("verdict")) << r;
    return r.value("error", std::string());
  };
  EXPECT_EQ(error_of({{"text", "set an alarm"}}), "text scoring unavailable");
  EXPECT_EQ(error_of({{"embedding", {1.0, 2.0, 3.0}}}), "embedding has dim 3, expected 2");
  EXPECT_NE(error_of(json::object()), "");
  EXPECT_NE(error_of({{"text", "a"}, {"embedding", {0.0, 0.0}}}), "");
  EXPECT_NE(error_of({{"embedding", "%%%"}}), "");
  EXPECT_NE(error_of({{"embedding", {"a", "b"}}}), "");
  EXPECT_NE(error_of(json::array()), "");
  const json with_id = handle_request(s, {{"id", 3}, {"text", "x"}});
  EXPECT_EQ(with_id["id"], 3);
  EXPECT_EQ(handle_request(two_class_scorer(std::nullopt), {{"embedding", {0.0, 0.0}}})["error"],
            "model has no threshold");
}

TEST(HandleLineTest, MalformedLineGetsAnErrorAndStreamContinues) {
  const FittedScorer s = two_class_scorer();
  EXPECT_EQ(json::parse(handle_line(s, "{not json")), (json{{"error", "malformed JSON request"}}));
  std::istringstream in("{\"id\":1,\"embedding\":[0,0]}\n\n{oops\n{\"id\":2,\"embedding\":[10,0]}\n");
  std::ostringstream out;
  serve_stream(s, in, out);
  std::istringstream lines(out.str());
  std::vector<json> responses;
  for (std::string line; std::getline(lines, line);) responses.push_back(json::parse(line));
  ASSERT_EQ(responses.size(), 3u);
  EXPECT_EQ(responses[0]["intent"], "alarm");
  EXPECT_TRUE(responses[1].contains("error"));
  EXPECT_EQ(responses[2]["intent"], "weather");
}

TEST(AddressTest, Parse) {
  const Address full = Address::parse("0.0.0.0:9000");
  EXPECT_EQ(full.host, "0.0.0.0");
  EXPECT_EQ(full.port, 9000);
  EXPECT_EQ(Address::parse(":81").host, "127.0.0.1");
  EXPECT_EQ(Address::parse(":81").port, 81);
  EXPECT_EQ(Address::parse("0").port, 0);
  EXPECT_EQ(Address{}.port, 7878);
  EXPECT_THROW(Address::parse("host:"), ConfigError);
  EXPECT_THROW(Address::parse("host:70000"), ConfigError);
  EXPECT_THROW(Address::parse("x:y"), ConfigError);
}

int connect_to(std::uint16_t port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

// Sends every request on one connection, then reads one line per request.
std::vector<std::string> exchange(std::uint16_t port, const std::vector<std::string>& requests) {
  const int fd = connect_to(port);
  if (fd < 0) return {};
  std::string payload;
  for (const auto& r : requests) payload += r + "\n";
  for (std::size_t sent = 0; sent < payload.size();) {
    const ssize_t n = ::send(fd, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) break;
    sent += static_cast<std::size_t>(n);
  }
  std::vector<std::string> lines;
  std::string buffer;
  char chunk[4096];
  while (lines.size() < requests.size()) {
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    for (std::size_t nl; (nl = buffer.find('\n')) != std::string::npos;) {
      lines.push_back(buffer.substr(0, nl));
      buffer.erase(0, nl + 1);
    }
  }
  ::close(fd);
  return lines;
}

TEST(TcpServerTest, ConcurrentClientsGetMatchingResponses) {
  auto scorer = std::make_shared<const FittedScorer>(two_class_scorer());
  TcpServer server(scorer, Address::parse("127.0.0.1:0"));
  ASSERT_NE(server.port(), 0);
  std::thread loop([&] { server.run(); });

  constexpr int kClients = 8;
  constexpr int kPerClient = 125;
  std::vector<std::vector<std::string>> requests(kClients), replies(kClients);
  for (int c = 0; c < kClients; ++c) {
    for (int i = 0; i < kPerClient; ++i) {
      const int id = c * kPerClient + i;
      requests[c].push_back(
          json{{"id", id}, {"embedding", {0.02 * (id % 700), 0.5 * (id % 3)}}}.dump());
    }
  }
  {
    std::vector<std::jthread> clients;
    for (int c = 0; c < kClients; ++c) {
      clients.emplace_back([&, c] { replies[c] = exchange(server.port(), requests[c]); });
    }
  }
  server.stop();
  loop.join();

  std::size_t checked = 0;
  for (int c = 0; c < kClients; ++c) {
    ASSERT_EQ(replies[c].size(), requests[c].size()) << "client " << c;
    for (int i = 0; i < kPerClient; ++i) {
      const json expected = handle_request(*scorer, json::parse(requests[c][i]));
      EXPECT_EQ(json::parse(replies[c][i]), expected);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 1000u);
}

TEST(TcpServerTest, RequiresThresholdAndStopsIdle) {
  EXPECT_THROW(TcpServer(std::make_shared<const FittedScorer>(two_class_scorer(std::nullopt)),
                         Address::parse(":0")),
               ConfigError);
  TcpServer server(std::make_shared<const FittedScorer>(two_class_scorer()), Address::parse(":0"));
  std::thread loop([&] { server.run(); });
  const int fd = connect_to(server.port());
  ASSERT_GE(fd, 0);
  server.stop();
  loop.join();
  char c;
  EXPECT_LE(::recv(fd, &c, 1, 0), 0);
  ::close(fd);
}

}  // namespace
}  // namespace oosguard
