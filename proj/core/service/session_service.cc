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

#include "session_service.h"

#include <algorithm>
#include <cctype>
#include <cstdio>

#include <glog/logging.h>
#include <httplib.h>

#include "cpr/error.h"

namespace cpr::service {

namespace {

using json = nlohmann::json;
using TimePoint = std::chrono::steady_clock::time_point;

Reply Fail(int status, std::string code, std::string message) {
  return {status, json{{"code", std::move(code)}, {"message", std::move(message)}}};
}

std::string_view StatusName(EpisodeStatus s) {
  switch (s) {
    case EpisodeStatus::kRunning: return "awaiting_user";
    case EpisodeStatus::kSucceeded: return "succeeded";
    case EpisodeStatus::kFailed: return "failed";
  }
  return "failed";
}

std::string Lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Reads an id field; -1 when absent, -2 when malformed.
std::int64_t IdField(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return -1;
  const json& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) return -2;
  return v.get<std::int64_t>();
}

}  // namespace

struct SessionService::Session {
  Session(const HeteroGraph& g, const EmbeddingTable& emb, const Policy& policy,
          UserId user, AttributeId p0, const ServiceConfig& cfg, std::uint64_t seed)
      : conv(g, emb, policy, user, p0, cfg.top_k, cfg.max_turns, cfg.rewards),
        rng(seed),
        initial_attribute(p0) {}

  std::mutex mu;
  std::string id;
  Conversation conv;
  std::mt19937_64 rng;
  AttributeId initial_attribute;
  json transcript = json::array();
  std::string nonce;  // of the pending move
  std::string last_nonce;
  json last_reply;
  std::optional<ItemId> accepted_item;
  TimePoint last_active;
  bool expired = false;
};

SessionService::SessionService(const HeteroGraph& g, const EmbeddingTable& emb,
                               Policy policy, NameTable names,
                               ServiceConfig config, Clock clock)
    : g_(g),
      emb_(emb.WithColdUser()),
      policy_(std::move(policy)),
      names_(std::move(names)),
      config_(std::move(config)),
      clock_(clock ? std::move(clock) : Clock(&std::chrono::steady_clock::now)),
      token_rng_(config_.seed) {
  if (emb.counts().users != g.counts().users ||
      emb.counts().items != g.counts().items ||
      emb.counts().attributes != g.counts().attributes) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding table does not match the graph's vertex counts");
  }
}

SessionService::~SessionService() = default;

std::string SessionService::Token() {
  std::lock_guard lock(token_mu_);
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx",
                static_cast<unsigned long long>(token_rng_()),
                static_cast<unsigned long long>(token_rng_()));
  return buf;
}

json SessionService::Named(VertexKind kind, std::uint32_t index) const {
  return json{{"id", index}, {"name", names_.Name(kind, index)}};
}

json SessionService::MoveJson(const Session& s) const {
  const Move& m = *s.conv.pending();
  json j{{"turn", s.conv.state().turn + 1},
         {"action", ActionName(m.action)},
         {"forced", m.forced},
         {"nonce", s.nonce}};
  if (m.action == Action::kAsk) {
    j["attribute"] = Named(VertexKind::kAttribute, m.attribute);
  } else {
    json items = json::array();
    for (ItemId v : m.items) items.push_back(Named(VertexKind::kItem, v));
    j["items"] = std::move(items);
  }
  return j;
}

json SessionService::Snapshot(const Session& s) const {
  const SessionState& st = s.conv.state();
  json path = json::array();
  for (AttributeId p : st.path) path.push_back(Named(VertexKind::kAttribute, p));
  json j{{"session_id", s.id},
         {"status", StatusName(s.conv.status())},
         {"turn", st.turn},
         {"max_turns", s.conv.max_turns()},
         {"path", std::move(path)},
         {"candidate_count", st.candidate_items.size()}};
  if (st.user < g_.counts().users) {
    j["user_id"] = st.user;
  } else {
    j["user_id"] = nullptr;
  }
  if (s.conv.status() == EpisodeStatus::kRunning) {
    j["move"] = MoveJson(s);
  } else if (s.conv.status() == EpisodeStatus::kSucceeded) {
    const TurnRecord& last = s.conv.turns().back();
    json items = json::array();
    for (ItemId v : last.items) items.push_back(Named(VertexKind::kItem, v));
    j["outcome"] = {{"items", std::move(items)},
                    {"item", s.accepted_item ? Named(VertexKind::kItem, *s.accepted_item)
                                             : json(nullptr)}};
  } else {
    j["reason"] = FailReasonName(s.conv.fail_reason());
  }
  return j;
}

void SessionService::Sweep(TimePoint now) {
  std::unique_lock lock(mu_);
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    Session& s = *it->second;
    std::unique_lock slock(s.mu, std::try_to_lock);
    if (slock.owns_lock() && now - s.last_active > config_.idle_timeout) {
      s.expired = true;
      expired_.insert(it->first);
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::shared_ptr<SessionService::Session> SessionService::Find(
    const std::string& id, Reply& error) {
  std::shared_ptr<Session> s;
  {
    std::shared_lock lock(mu_);
    if (expired_.count(id)) {
      error = Fail(410, "session_expired", "session " + id + " has expired");
      return nullptr;
    }
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
      error = Fail(404, "unknown_session", "no session " + id);
      return nullptr;
    }
    s = it->second;
  }
  bool stale = false;
  {
    std::lock_guard slock(s->mu);
    stale = s->expired || clock_() - s->last_active > config_.idle_timeout;
    if (stale) s->expired = true;
  }
  if (stale) {
    std::unique_lock lock(mu_);
    sessions_.erase(id);
    expired_.insert(id);
    error = Fail(410, "session_expired", "session " + id + " has expired");
    return nullptr;
  }
  return s;
}

Reply SessionService::CreateSession(const json& request) {
  if (!request.is_object()) {
    return Fail(400, "bad_request", "request body must be a JSON object");
  }
  const std::int64_t p0 = IdField(request, "initial_attribute");
  if (p0 == -1) return Fail(400, "bad_request", "initial_attribute is required");
  if (p0 == -2) return Fail(400, "bad_request", "initial_attribute must be a non-negative integer");
  if (p0 >= g_.counts().attributes) {
    return Fail(404, "unknown_attribute", "no attribute " + std::to_string(p0));
  }
  const auto p = static_cast<AttributeId>(p0);
  if (g_.ItemsWithAttribute(p).empty()) {
    return Fail(422, "attribute_without_items",
                "attribute " + std::to_string(p0) + " is attached to no item");
  }
  const std::int64_t u = IdField(request, "user_id");
  if (u == -2) return Fail(400, "bad_request", "user_id must be a non-negative integer");
  if (u >= g_.counts().users) {
    return Fail(404, "unknown_user", "no user " + std::to_string(u));
  }
  const UserId user = u < 0 ? cold_user() : static_cast<UserId>(u);

  const TimePoint now = clock_();
  Sweep(now);

  const std::string id = Token();
  auto s = std::make_shared<Session>(g_, emb_, policy_, user, p, config_,
                                     std::hash<std::string>{}(id));
  s->id = id;
  s->last_active = now;
  std::lock_guard slock(s->mu);
  s->conv.Propose(s->rng);
  s->nonce = Token();
  json entry = MoveJson(*s);
  entry["type"] = "move";
  s->transcript.push_back(std::move(entry));
  Reply reply{201, Snapshot(*s)};
  {
    std::unique_lock lock(mu_);
    sessions_.emplace(id, s);
  }
  LOG(INFO) << "session " << id << " created (user " << user << ", attribute " << p << ")";
  return reply;
}

Reply SessionService::PostAnswer(const std::string& session_id, const json& request) {
  if (!request.is_object() || !request.contains("accept") ||
      !request.at("accept").is_boolean()) {
    return Fail(400, "bad_request", "body must be {\"accept\": bool}");
  }
  std::optional<std::string> nonce;
  if (request.contains("nonce") && !request.at("nonce").is_null()) {
    if (!request.at("nonce").is_string()) {
      return Fail(400, "bad_request", "nonce must be a string");
    }
    nonce = request.at("nonce").get<std::string>();
  }
  const std::int64_t item = IdField(request, "item");
  if (item == -2) return Fail(400, "bad_request", "item must be a non-negative integer");

  Reply error;
  auto s = Find(session_id, error);
  if (!s) return error;
  std::lock_guard slock(s->mu);
  s->last_active = clock_();

  if (nonce && !s->last_nonce.empty() && *nonce == s->last_nonce) {
    return {200, s->last_reply};
  }
  if (s->conv.status() != EpisodeStatus::kRunning) {
    return Fail(409, "session_finished",
                "session " + session_id + " is " +
                    std::string(StatusName(s->conv.status())));
  }
  if (nonce && *nonce != s->nonce) {
    return Fail(409, "stale_nonce", "nonce does not match the pending move");
  }
  const bool accept = request.at("accept").get<bool>();
  const Move& move = *s->conv.pending();
  if (item >= 0) {
    if (move.action != Action::kRecommend || !accept ||
        std::find(move.items.begin(), move.items.end(), static_cast<ItemId>(item)) ==
            move.items.end()) {
      return Fail(400, "bad_request", "item must be one of the accepted recommendations");
    }
    s->accepted_item = static_cast<ItemId>(item);
  }

  const TurnRecord& rec = s->conv.Respond(accept ? Answer::kAccept : Answer::kReject);
  s->transcript.push_back(
      {{"type", "answer"}, {"turn", rec.turn}, {"accept", accept}, {"reward", rec.reward}});
  s->last_nonce = s->nonce;
  s->nonce.clear();
  if (s->conv.status() == EpisodeStatus::kRunning) {
    s->conv.Propose(s->rng);
    s->nonce = Token();
    json entry = MoveJson(*s);
    entry["type"] = "move";
    s->transcript.push_back(std::move(entry));
  }
  s->last_reply = Snapshot(*s);
  return {200, s->last_reply};
}

Reply SessionService::GetSession(const std::string& session_id) {
  Reply error;
  auto s = Find(session_id, error);
  if (!s) return error;
  std::lock_guard slock(s->mu);
  s->last_active = clock_();
  json j = Snapshot(*s);
  j["transcript"] = s->transcript;
  j["policy"] = PolicyName(policy_);
  return {200, std::move(j)};
}

std::optional<EpisodeLog> SessionService::SessionLog(const std::string& session_id) {
  Reply error;
  auto s = Find(session_id, error);
  if (!s) return std::nullopt;
  std::lock_guard slock(s->mu);
  EpisodeLog log;
  log.policy = PolicyName(policy_);
  log.spec.user = s->conv.state().user;
  log.spec.initial_attribute = s->initial_attribute;
  log.spec.top_k = s->conv.top_k();
  log.spec.max_turns = s->conv.max_turns();
  log.turns = s->conv.turns();
  log.success = s->conv.status() == EpisodeStatus::kSucceeded;
  log.success_turn = log.success ? s->conv.state().turn : 0;
  log.fail_reason = s->conv.fail_reason();
  log.final_state = s->conv.state();
  return log;
}

Reply SessionService::ListAttributes(const std::string& query, std::size_t limit) const {
  const std::string needle = Lower(query);
  json out = json::array();
  for (AttributeId p = 0; p < g_.counts().attributes && out.size() < limit; ++p) {
    const std::size_t n = g_.ItemsWithAttribute(p).size();
    if (n == 0) continue;
    const std::string name = names_.Name(VertexKind::kAttribute, p);
    if (!needle.empty() && Lower(name).find(needle) == std::string::npos) continue;
    out.push_back({{"id", p}, {"name", name}, {"items", n}});
  }
  return {200, json{{"attributes", std::move(out)}}};
}

Reply SessionService::Health() const {
  return {200, json{{"status", "ok"},
                    {"policy", PolicyName(policy_)},
                    {"users", g_.counts().users},
                    {"items", g_.counts().items},
                    {"attributes", g_.counts().attributes}}};
}

std::size_t SessionService::live_sessions() {
  std::shared_lock lock(mu_);
  return sessions_.size();
}

void SessionService::Mount(httplib::Server& server) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req, json& out) {
    out = json::parse(req.body, nullptr, /*allow_exceptions=*/false);
    return !out.is_discarded();
  };
  auto guarded = [send](auto fn) {
    return [fn, send](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const std::exception& e) {
        LOG(ERROR) << req.method << " " << req.path << ": " << e.what();
        send(res, Fail(500, "internal", e.what()));
      }
    };
  };

  server.Post("/sessions", guarded([this, send, parse](const httplib::Request& req,
                                                       httplib::Response& res) {
    json body;
    if (!parse(req, body)) return send(res, Fail(400, "bad_request", "malformed JSON"));
    send(res, CreateSession(body));
  }));
  server.Post(R"(/sessions/([^/]+)/answer)",
              guarded([this, send, parse](const httplib::Request& req,
                                          httplib::Response& res) {
                json body;
                if (!parse(req, body)) {
                  return send(res, Fail(400, "bad_request", "malformed JSON"));
                }
                send(res, PostAnswer(req.matches[1], body));
              }));
  server.Get(R"(/sessions/([^/]+))",
             guarded([this, send](const httplib::Request& req, httplib::Response& res) {
               send(res, GetSession(req.matches[1]));
             }));
  server.Get("/meta/attributes",
             guarded([this, send](const httplib::Request& req, httplib::Response& res) {
               std::size_t limit = 50;
               if (req.has_param("limit")) {
                 try {
                   limit = std::stoul(req.get_param_value("limit"));
                 } catch (const std::exception&) {
                   return send(res, Fail(400, "bad_request", "limit must be an integer"));
                 }
               }
               send(res, ListAttributes(req.get_param_value("q"), limit));
             }));
  server.Get("/healthz",
             guarded([this, send](const httplib::Request&, httplib::Response& res) {
               send(res, Health());
             }));
  if (!config_.static_dir.empty() &&
      !server.set_mount_point("/", config_.static_dir)) {
    throw Error(ErrorCode::kNotFound, "static directory " + config_.static_dir +
                                          " does not exist");
  }
}

}  // namespace cpr::service
