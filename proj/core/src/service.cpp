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

#include "hredgan/service.hpp"

#include <cstdio>
#include <regex>

#include "hredgan/model.hpp"
#include "httplib.h"
#include "json.hpp"

namespace hredgan {

using nlohmann::json;

struct ChatService::Session {
  std::mutex mutex;
  std::string id;
  DialogueState state;
  RandomStream rng{0};
  std::vector<TranscriptEntry> transcript;
  std::vector<CandidateView> pending;
  std::int64_t created_ms = 0;
  std::int64_t updated_ms = 0;
};

ChatService::ChatService(Model& model, ServiceOptions options)
    : model_(model), options_(std::move(options)), id_rng_(options_.seed) {
  options_.inference.validate();
  if (!options_.clock) options_.clock = [] { return std::chrono::system_clock::now(); };
}

ChatService::~ChatService() = default;

std::int64_t ChatService::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             options_.clock().time_since_epoch())
      .count();
}

std::string ChatService::create_session() {
  evict_idle();
  auto s = std::make_shared<Session>();
  std::lock_guard lock(mutex_);
  char buf[17];
  do {
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(id_rng_.next_u64()));
  } while (sessions_.contains(buf));
  s->id = buf;
  s->state = model_.generator().zero_state(1);
  s->rng = RandomStream(options_.seed).derive(++created_);
  s->created_ms = s->updated_ms = now_ms();
  sessions_.emplace(s->id, s);
  return s->id;
}

std::shared_ptr<ChatService::Session> ChatService::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

std::vector<CandidateView> ChatService::post_message(const std::string& id,
                                                     const std::string& text,
                                                     std::optional<double> alpha,
                                                     std::optional<std::size_t> samples) {
  evict_idle();
  std::shared_ptr<Session> s = find(id);
  Tokens tokens = tokenize(text);
  if (tokens.empty()) throw ServiceError(400, "message text is empty");
  InferenceConfig config = options_.inference;
  if (alpha) config.alpha = *alpha;
  if (samples) config.samples = *samples;
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ServiceError(400, e.what());
  }

  std::lock_guard lock(s->mutex);
  const Vocab& vocab = model_.vocab();
  std::vector<TokenId> ids = vocab.encode(tokens);
  DialogueState next = commit_utterance(model_, s->state, ids);
  std::vector<RankedCandidate> ranked = propose(model_, next, config, s->rng);
  s->state = std::move(next);
  s->transcript.push_back({"user", detokenize(tokens), std::nullopt, std::move(ids)});
  s->pending.clear();
  for (RankedCandidate& c : ranked) {
    CandidateView v;
    v.text = detokenize(vocab.decode(c.tokens));
    v.d_score = c.d_score;
    v.log_prob = c.log_prob;
    v.rank = c.rank;
    v.ids = std::move(c.tokens);
    s->pending.push_back(std::move(v));
  }
  s->updated_ms = now_ms();
  return s->pending;
}

TranscriptEntry ChatService::commit(const std::string& id, std::size_t rank) {
  std::shared_ptr<Session> s = find(id);
  std::lock_guard lock(s->mutex);
  if (rank >= s->pending.size()) {
    throw ServiceError(422, "rank " + std::to_string(rank) + " out of range (" +
                                std::to_string(s->pending.size()) +
                                " pending candidates)");
  }
  const CandidateView& c = s->pending[rank];
  s->state = commit_utterance(model_, s->state, c.ids);
  s->transcript.push_back({"model", c.text, rank, c.ids});
  s->pending.clear();
  s->updated_ms = now_ms();
  return s->transcript.back();
}

SessionView ChatService::get(const std::string& id) {
  std::shared_ptr<Session> s = find(id);
  std::lock_guard lock(s->mutex);
  return {s->id, s->transcript, s->pending, s->created_ms, s->updated_ms};
}

void ChatService::remove(const std::string& id) {
  std::lock_guard lock(mutex_);
  if (sessions_.erase(id) == 0) {
    throw ServiceError(404, "unknown session '" + id + "'");
  }
}

DialogueState ChatService::state(const std::string& id) {
  std::shared_ptr<Session> s = find(id);
  std::lock_guard lock(s->mutex);
  return s->state;
}

DialogueState ChatService::replay(const std::vector<TranscriptEntry>& transcript) {
  DialogueState state = model_.generator().zero_state(1);
  for (const TranscriptEntry& e : transcript) {
    state = commit_utterance(model_, state, e.ids);
  }
  return state;
}

std::size_t ChatService::evict_idle() {
  const std::int64_t cutoff = now_ms() - options_.idle_timeout.count();
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    // a session mid-request is never idle
    std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
    if (session_lock.owns_lock() && it->second->updated_ms < cutoff) {
      session_lock.unlock();
      it = sessions_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  return n;
}

std::size_t ChatService::session_count() {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

namespace {

json candidate_json(const CandidateView& c) {
  return {{"text", c.text}, {"d_score", c.d_score}, {"log_prob", c.log_prob},
          {"rank", c.rank}};
}

json session_json(const SessionView& v) {
  json transcript = json::array();
  for (const TranscriptEntry& e : v.transcript) {
    transcript.push_back({{"speaker", e.speaker},
                          {"text", e.text},
                          {"rank", e.rank ? json(*e.rank) : json(nullptr)}});
  }
  json pending = json::array();
  for (const CandidateView& c : v.pending) pending.push_back(candidate_json(c));
  return {{"id", v.id},
          {"transcript", transcript},
          {"pending", pending},
          {"created_ms", v.created_ms},
          {"updated_ms", v.updated_ms}};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ServiceError(400, "request body must be a JSON object");
  }
  return j;
}

HttpResponse error_response(int status, const std::string& message) {
  return {status, json{{"error", message}}.dump()};
}

}  // namespace

HttpResponse handle_request(ChatService& service, const std::string& method,
                            const std::string& path, const std::string& body) {
  static const std::regex kSession(R"(^/sessions/([A-Za-z0-9_-]+)$)");
  static const std::regex kAction(R"(^/sessions/([A-Za-z0-9_-]+)/(messages|commit)$)");
  try {
    std::smatch m;
    if (path == "/sessions") {
      if (method != "POST") return error_response(405, "method not allowed");
      return {201, json{{"id", service.create_session()}}.dump()};
    }
    if (std::regex_match(path, m, kAction)) {
      if (method != "POST") return error_response(405, "method not allowed");
      const std::string id = m[1];
      const json j = parse_body(body);
      if (m[2] == "messages") {
        if (!j.contains("text") || !j["text"].is_string()) {
          throw ServiceError(400, "field 'text' (string) is required");
        }
        std::optional<double> alpha;
        std::optional<std::size_t> samples;
        if (j.contains("alpha")) {
          if (!j["alpha"].is_number()) throw ServiceError(400, "'alpha' must be a number");
          alpha = j["alpha"].get<double>();
        }
        if (j.contains("L")) {
          if (!j["L"].is_number_unsigned()) {
            throw ServiceError(400, "'L' must be a positive integer");
          }
          samples = j["L"].get<std::size_t>();
        }
        json candidates = json::array();
        for (const CandidateView& c :
             service.post_message(id, j["text"].get<std::string>(), alpha, samples)) {
          candidates.push_back(candidate_json(c));
        }
        return {200, json{{"session_id", id}, {"candidates", candidates}}.dump()};
      }
      if (!j.contains("rank") || !j["rank"].is_number_integer()) {
        throw ServiceError(400, "field 'rank' (integer) is required");
      }
      const auto rank = j["rank"].get<std::int64_t>();
      if (rank < 0) throw ServiceError(422, "rank must be >= 0");
      TranscriptEntry e = service.commit(id, static_cast<std::size_t>(rank));
      return {200, json{{"session_id", id},
                        {"speaker", e.speaker},
                        {"text", e.text},
                        {"rank", rank}}
                       .dump()};
    }
    if (std::regex_match(path, m, kSession)) {
      const std::string id = m[1];
      if (method == "GET") return {200, session_json(service.get(id)).dump()};
      if (method == "DELETE") {
        service.remove(id);
        return {200, json{{"deleted", id}}.dump()};
      }
      return error_response(405, "method not allowed");
    }
    return error_response(404, "no route for " + path);
  } catch (const ServiceError& e) {
    return error_response(e.status(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

struct HttpServer::Impl {
  explicit Impl(ChatService& s) : service(s) {}
  ChatService& service;
  httplib::Server server;
};

HttpServer::HttpServer(ChatService& service)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods",
                            "GET, POST, DELETE, OPTIONS"}});
  auto route = [this](const httplib::Request& req, httplib::Response& res) {
    HttpResponse r = handle_request(impl_->service, req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json; charset=utf-8");
  };
  const std::string pattern = R"(/sessions(/.*)?)";
  srv.Get(pattern, route);
  srv.Post(pattern, route);
  srv.Delete(pattern, route);
  srv.Options(pattern, [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace hredgan
