/*
 * Copyright 2026 The CPR Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "cpr/dataio.h"
#include "cpr/dialogue.h"

namespace httplib {
class Server;
}

namespace cpr::service {

using Clock = std::function<std::chrono::steady_clock::time_point()>;

struct ServiceConfig {
  int top_k = 10;
  int max_turns = 15;
  std::chrono::seconds idle_timeout{30 * 60};
  RewardConfig rewards;
  // Seeds session tokens and per-turn nonces.
  std::uint64_t seed = 0;
  // Served under "/" when non-empty.
  std::string static_dir;
};

// HTTP status plus JSON body. Errors carry {"code", "message"}.
struct Reply {
  int status = 200;
  nlohmann::json body;
};

// In-memory store of live conversations. Graph, embeddings and policy are
// fixed at construction; each session is guarded by its own mutex.
class SessionService {
 public:
  SessionService(const HeteroGraph& g, const EmbeddingTable& emb, Policy policy,
                 NameTable names, ServiceConfig config, Clock clock = nullptr);
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  // {"initial_attribute": id, "user_id": id?}
  Reply CreateSession(const nlohmann::json& request);
  // {"accept": bool, "nonce": str?, "item": id?}. A repeated nonce of the
  // previous turn returns the previous reply without a new transition.
  Reply PostAnswer(const std::string& session_id, const nlohmann::json& request);
  // Reading a session counts as activity for idle expiry.
  Reply GetSession(const std::string& session_id);
  // Attributes with at least one item whose name contains `query`
  // (case-insensitive), at most `limit` entries.
  Reply ListAttributes(const std::string& query, std::size_t limit) const;
  Reply Health() const;

  // Episode log of the session so far (policy name, user, turns, outcome).
  std::optional<EpisodeLog> SessionLog(const std::string& session_id);

  void Mount(httplib::Server& server);

  UserId cold_user() const { return g_.counts().users; }
  std::size_t live_sessions();

 private:
  struct Session;

  std::shared_ptr<Session> Find(const std::string& id, Reply& error);
  nlohmann::json Snapshot(const Session& s) const;
  nlohmann::json MoveJson(const Session& s) const;
  nlohmann::json Named(VertexKind kind, std::uint32_t index) const;
  std::string Token();
  void Sweep(std::chrono::steady_clock::time_point now);

  const HeteroGraph& g_;
  EmbeddingTable emb_;  // with the cold-start row appended
  Policy policy_;
  NameTable names_;
  ServiceConfig config_;
  Clock clock_;

  std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::set<std::string> expired_;
  std::mutex token_mu_;
  std::mt19937_64 token_rng_;
};

}  // namespace cpr::service
