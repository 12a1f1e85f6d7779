// Copyright 2026 The hredgan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hredgan/config.hpp"
#include "hredgan/generator.hpp"
#include "hredgan/inference.hpp"

namespace hredgan {

class Model;

/// Carries the HTTP status the error maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct TranscriptEntry {
  std::string speaker;  // "user" or "model"
  std::string text;
  std::optional<std::size_t> rank;  // model turns only
  std::vector<TokenId> ids;         // what was folded into the state
};

struct CandidateView {
  std::string text;
  double d_score = 0.0;
  double log_prob = 0.0;
  std::size_t rank = 0;
  std::vector<TokenId> ids;
};

struct SessionView {
  std::string id;
  std::vector<TranscriptEntry> transcript;
  std::vector<CandidateView> pending;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

struct ServiceOptions {
  InferenceConfig inference;
  std::uint64_t seed = 1;
  std::chrono::milliseconds idle_timeout = std::chrono::minutes(30);
  std::function<std::chrono::system_clock::time_point()> clock;  // default: now
};

/// In-memory chat sessions over a frozen model. Calls may come from any
/// thread; each session serves one request at a time.
class ChatService {
 public:
  ChatService(Model& model, ServiceOptions options);
  ~ChatService();

  std::string create_session();
  /// Folds the user's text into the history and proposes ranked replies.
  std::vector<CandidateView> post_message(const std::string& id,
                                          const std::string& text,
                                          std::optional<double> alpha = {},
                                          std::optional<std::size_t> samples = {});
  /// Commits pending candidate `rank`; throws 422 when out of range.
  TranscriptEntry commit(const std::string& id, std::size_t rank);
  SessionView get(const std::string& id);
  void remove(const std::string& id);

  /// Dialogue state of a session, for inspection.
  DialogueState state(const std::string& id);
  /// Rebuilds a state from scratch by folding every transcript entry.
  DialogueState replay(const std::vector<TranscriptEntry>& transcript);

  std::size_t evict_idle();
  std::size_t session_count();
  const InferenceConfig& defaults() const { return options_.inference; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id);
  std::int64_t now_ms() const;

  Model& model_;
  ServiceOptions options_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  RandomStream id_rng_;
  std::uint64_t created_ = 0;
};

struct HttpResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Routes one request of the JSON API without any socket involved.
HttpResponse handle_request(ChatService& service, const std::string& method,
                            const std::string& path, const std::string& body);

/// Blocking HTTP server bound to host:port.
class HttpServer {
 public:
  explicit HttpServer(ChatService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hredgan
