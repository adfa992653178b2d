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

#include "commands.h"

#include <algorithm>
#include <cctype>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <glog/logging.h>
#include <httplib.h>

#include "cpr/dataio.h"
#include "cpr/dialogue.h"
#include "cpr/error.h"
#include "cpr/evalkit.h"
#include "cpr/fm_trainer.h"
#include "session_service.h"

namespace cpr::cli {

namespace fs = std::filesystem;

namespace {

struct RunData {
  HeteroGraph graph;
  InteractionSplit split;
};

// Chat and serve only need the graph; the split is skipped for them.
RunData LoadRunData(const RunConfig& cfg, bool split = true) {
  if (cfg.data.empty() == cfg.synthetic.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "exactly one of --data or --synthetic is required");
  }
  Dataset d = cfg.data.empty()
                  ? GenerateSynthetic(LoadSyntheticSpec(cfg.synthetic)).data
                  : LoadDataset(cfg.data);
  if (cfg.min_attribute_freq > 1) {
    d.graph = PruneRareAttributes(d.graph, cfg.min_attribute_freq).graph;
    d.interactions = d.graph.Interactions();
  }
  RunData r;
  if (split) r.split = SplitInteractions(d.interactions, kDefaultSplitRatios, cfg.seed);
  r.graph = std::move(d.graph);
  return r;
}

void RequireFile(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kNotFound, what + " " + path + " not found");
  }
}

EmbeddingTable LoadMatchingEmbeddings(const RunConfig& cfg, const HeteroGraph& g) {
  const std::string path = cfg.EmbeddingsPath();
  RequireFile(path, "embedding checkpoint");
  EmbeddingTable emb = LoadEmbeddings(path).table;
  const VertexCounts& a = emb.counts();
  const VertexCounts& b = g.counts();
  if (a.users != b.users || a.items != b.items || a.attributes != b.attributes) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding checkpoint " + path + " does not match the dataset's vertex counts");
  }
  return emb;
}

std::ofstream OpenOutput(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / name;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error(ErrorCode::kNotFound, "cannot write " + path.string());
  os.precision(17);
  return os;
}

// Owns loaded networks so Policy values can point into it.
struct PolicySet {
  std::deque<QNetwork> networks;
  std::vector<Policy> policies;
};

Policy ResolvePolicy(const RunConfig& cfg, const std::string& spec, PolicySet& set) {
  const std::string name = [&] {
    std::string s = spec;
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
  }();
  if (name == "maxent" || name == "max-entropy") return MaxEntropyPolicy{};
  if (name == "absgreedy" || name == "abs-greedy") return AbsGreedyPolicy{};
  std::string path;
  if (name == "scpr") {
    path = cfg.PolicyPath();
  } else if (fs::exists(spec)) {
    path = spec;
  } else {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown policy '" + spec + "' (scpr, maxent, absgreedy or a checkpoint path)");
  }
  RequireFile(path, "policy checkpoint");
  PolicyCheckpoint ck = LoadPolicy(path);
  if (ck.max_turns != cfg.max_turns) {
    throw Error(ErrorCode::kInvalidArgument,
                "policy " + path + " was trained for T=" + std::to_string(ck.max_turns) +
                    " but T=" + std::to_string(cfg.max_turns) + " was requested");
  }
  set.networks.push_back(std::move(ck.network));
  ScprPolicy p;
  p.network = &set.networks.back();
  return p;
}

NameTable LoadNameTable(const RunConfig& cfg, const VertexCounts& counts) {
  if (cfg.names.empty()) return {};
  return LoadNames(cfg.names, counts);
}

struct InputClosed {};

// Human Responder on a terminal: y/n per move, re-prompting on anything else.
class TerminalResponder final : public Responder {
 public:
  TerminalResponder(std::istream& in, std::ostream& out, const NameTable& names)
      : in_(in), out_(out), names_(names) {}

  Answer AnswerAttribute(AttributeId p) override {
    out_ << "Do you like " << names_.Name(VertexKind::kAttribute, p) << "? [y/n] ";
    return Read();
  }

  Answer AnswerRecommendation(std::span<const ItemId> items) override {
    out_ << "How about:";
    for (std::size_t i = 0; i < items.size(); ++i) {
      out_ << (i == 0 ? " " : ", ") << names_.Name(VertexKind::kItem, items[i]);
    }
    out_ << "? [y/n] ";
    return Read();
  }

 private:
  Answer Read() {
    std::string line;
    while (true) {
      out_.flush();
      if (!std::getline(in_, line)) throw InputClosed{};
      std::string token;
      for (char c : line) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
          token += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        }
      }
      if (token == "y" || token == "yes") return Answer::kAccept;
      if (token == "n" || token == "no") return Answer::kReject;
      out_ << "Please answer y or n: ";
    }
  }

  std::istream& in_;
  std::ostream& out_;
  const NameTable& names_;
};

std::string PathString(const std::vector<AttributeId>& path, const NameTable& names) {
  std::string s = "[";
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (i > 0) s += ", ";
    s += names.Name(VertexKind::kAttribute, path[i]);
  }
  return s + "]";
}

// INI reader that folds [fm], [dqn] and [reward] keys into prefixed flags
// (fm.epochs -> --fm-epochs) and treats command sections as top-level.
class SectionedConfig : public CLI::ConfigINI {
 public:
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::vector<CLI::ConfigItem> items = CLI::ConfigINI::from_config(input);
    std::vector<CLI::ConfigItem> out;
    for (CLI::ConfigItem& item : items) {
      if (item.parents.empty()) {
        out.push_back(std::move(item));
        continue;
      }
      if (item.name == "++" || item.name == "--") continue;  // section markers
      std::string prefix;
      for (const std::string& p : item.parents) {
        if (p == "fm" || p == "dqn" || p == "reward") prefix += p + "-";
      }
      item.name = prefix + item.name;
      item.parents.clear();
      out.push_back(std::move(item));
    }
    return out;
  }
};

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kOutOfRange:
    case ErrorCode::kNotFound:
    case ErrorCode::kFailedPrecondition:
      return 2;
    case ErrorCode::kDataLoss:
    case ErrorCode::kInternal:
      return 1;
  }
  return 1;
}

}  // namespace

std::string RunConfig::EmbeddingsPath() const {
  return embeddings.empty() ? (fs::path(out) / "embeddings.cpremb").string() : embeddings;
}

std::string RunConfig::PolicyPath() const {
  return policy_checkpoint.empty() ? (fs::path(out) / "policy.cprpol").string()
                                   : policy_checkpoint;
}

int TrainFm(const RunConfig& cfg, std::ostream& out) {
  const RunData d = LoadRunData(cfg);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const FmTrainingResult r = TrainEmbeddings(d.graph, d.split.train, tc);
  fs::create_directories(cfg.out);
  SaveEmbeddings(cfg.EmbeddingsPath(), r.table, tc);
  std::ofstream loss = OpenOutput(cfg, "fm_loss.csv");
  loss << "epoch,loss\n";
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    loss << e + 1 << ',' << r.epoch_losses[e] << '\n';
  }
  out << "trained " << tc.epochs << " epochs on " << d.split.train.size()
      << " interactions; final loss "
      << (r.epoch_losses.empty() ? 0.0 : r.epoch_losses.back()) << "\n"
      << "wrote " << cfg.EmbeddingsPath() << "\n";
  return 0;
}

int TrainPolicyCommand(const RunConfig& cfg, std::ostream& out) {
  const RunData d = LoadRunData(cfg);
  const EmbeddingTable emb = LoadMatchingEmbeddings(cfg, d.graph);
  DqnConfig dc = cfg.dqn;
  dc.seed = cfg.seed;
  const PolicyTrainingResult r = TrainPolicy(d.graph, emb, d.split.validation, dc,
                                             cfg.episodes, cfg.top_k, cfg.max_turns);
  fs::create_directories(cfg.out);
  SavePolicy(cfg.PolicyPath(), r.network, dc, cfg.max_turns);
  std::ofstream returns = OpenOutput(cfg, "policy_returns.csv");
  returns << "episode,return\n";
  for (std::size_t e = 0; e < r.episode_returns.size(); ++e) {
    returns << e + 1 << ',' << r.episode_returns[e] << '\n';
  }
  out << "trained " << cfg.episodes << " episodes\nwrote " << cfg.PolicyPath() << "\n";
  return 0;
}

int Evaluate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.report != "csv" && cfg.report != "json") {
    throw Error(ErrorCode::kInvalidArgument, "--report must be csv or json");
  }
  const RunData d = LoadRunData(cfg);
  const EmbeddingTable emb = LoadMatchingEmbeddings(cfg, d.graph);
  const std::vector<EpisodeSpec> specs =
      MakeEpisodeSpecs(d.graph, d.split.test, cfg.top_k, cfg.max_turns, cfg.seed);
  if (specs.empty()) {
    throw Error(ErrorCode::kFailedPrecondition, "test split has no evaluable interactions");
  }
  const std::vector<std::string> requested =
      cfg.policies.empty() ? std::vector<std::string>{"scpr", "maxent", "absgreedy"}
                           : cfg.policies;
  PolicySet set;
  for (const std::string& p : requested) set.policies.push_back(ResolvePolicy(cfg, p, set));

  MetricReport report;
  report.max_turns = cfg.max_turns;
  for (const Policy& policy : set.policies) {
    const std::vector<EpisodeLog> logs =
        EvaluatePolicy(d.graph, emb, policy, specs, cfg.threads);
    std::ofstream jl = OpenOutput(cfg, "episodes_" + PolicyName(policy) + ".jsonl");
    WriteEpisodeLogJsonl(jl, logs);
    report.runs.push_back(
        ComputeMetrics(PolicyName(policy), cfg.seed, Outcomes(logs), cfg.max_turns));
  }
  if (report.runs.size() > 1 || !cfg.reference.empty()) {
    report.reference = cfg.reference.empty() ? report.runs.front().policy : cfg.reference;
    AttachRelativeSuccess(report.runs, report.reference);
  }
  CheckMetricIdentities(report);

  std::ofstream os = OpenOutput(cfg, "report." + cfg.report);
  if (cfg.report == "csv") {
    WriteReportCsv(os, report);
  } else {
    WriteReportJson(os, report);
  }
  out << specs.size() << " test episodes per policy\n";
  for (const PolicyMetrics& m : report.runs) {
    out << m.policy << ": SR@" << cfg.max_turns << " = " << m.success_rate.back()
        << ", AT = " << m.average_turns << "\n";
  }
  return 0;
}

int Chat(const RunConfig& cfg, std::istream& in, std::ostream& out) {
  if (!cfg.attribute) {
    throw Error(ErrorCode::kInvalidArgument, "chat needs --attribute (the opening attribute)");
  }
  const RunData d = LoadRunData(cfg, /*split=*/false);
  const EmbeddingTable base = LoadMatchingEmbeddings(cfg, d.graph);
  const NameTable names = LoadNameTable(cfg, d.graph.counts());
  PolicySet set;
  const Policy policy = ResolvePolicy(
      cfg, cfg.policies.empty() ? std::string("scpr") : cfg.policies.front(), set);

  UserId user;
  EmbeddingTable emb;
  if (cfg.user) {
    user = *cfg.user;
    if (user >= d.graph.counts().users) {
      throw Error(ErrorCode::kOutOfRange, "no user " + std::to_string(user));
    }
    emb = base;
  } else {
    emb = base.WithColdUser();
    user = d.graph.counts().users;
  }
  if (*cfg.attribute >= d.graph.counts().attributes ||
      d.graph.ItemsWithAttribute(*cfg.attribute).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "attribute " + std::to_string(*cfg.attribute) + " does not exist or has no items");
  }

  Conversation conv(d.graph, emb, policy, user, *cfg.attribute, cfg.top_k,
                    cfg.max_turns, cfg.dqn.rewards);
  TerminalResponder responder(in, out, names);
  std::mt19937_64 rng(cfg.seed);
  out << "Starting from " << names.Name(VertexKind::kAttribute, *cfg.attribute)
      << ". Answer y or n.\n";
  bool aborted = false;
  try {
    while (conv.status() == EpisodeStatus::kRunning) {
      const Move& m = conv.Propose(rng);
      out << "Turn " << conv.state().turn + 1 << ": ";
      const Answer a = m.action == Action::kAsk ? responder.AnswerAttribute(m.attribute)
                                                : responder.AnswerRecommendation(m.items);
      conv.Respond(a);
    }
  } catch (const InputClosed&) {
    aborted = true;
  }
  out << "\n";
  if (conv.status() == EpisodeStatus::kSucceeded) {
    out << "Recommendation accepted at turn " << conv.state().turn << ".\n";
  } else if (aborted) {
    out << "Input closed; the session failed without a recommendation.\n";
  } else {
    out << "Recommendation failed (" << FailReasonName(conv.fail_reason()) << ").\n";
  }
  out << "Path: " << PathString(conv.state().path, names) << "\n";
  return 0;
}

int Serve(const RunConfig& cfg, std::ostream& out) {
  const RunData d = LoadRunData(cfg, /*split=*/false);
  const EmbeddingTable emb = LoadMatchingEmbeddings(cfg, d.graph);
  PolicySet set;
  const Policy policy = ResolvePolicy(
      cfg, cfg.policies.empty() ? std::string("scpr") : cfg.policies.front(), set);
  service::ServiceConfig sc;
  sc.top_k = cfg.top_k;
  sc.max_turns = cfg.max_turns;
  sc.idle_timeout = std::chrono::minutes(cfg.idle_minutes);
  sc.rewards = cfg.dqn.rewards;
  sc.seed = std::random_device{}();
  sc.static_dir = cfg.static_dir;
  service::SessionService svc(d.graph, emb, policy, LoadNameTable(cfg, d.graph.counts()),
                              sc);
  httplib::Server server;
  svc.Mount(server);
  out << "serving on http://" << cfg.host << ":" << cfg.port << "\n" << std::flush;
  if (!server.listen(cfg.host, cfg.port)) {
    throw Error(ErrorCode::kFailedPrecondition,
                "cannot listen on " + cfg.host + ":" + std::to_string(cfg.port));
  }
  return 0;
}

int RunCli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
           std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Conversational path reasoning recommender"};
  app.config_formatter(std::make_shared<SectionedConfig>());
  app.set_config("--config", "", "INI file; flags given on the command line win");
  app.require_subcommand(1);
  app.fallthrough();

  app.add_option("--data", cfg.data, "Edge-list dataset");
  app.add_option("--synthetic", cfg.synthetic, "Synthetic dataset spec (JSON)");
  app.add_option("--out", cfg.out, "Output directory")->capture_default_str();
  app.add_option("--seed", cfg.seed)->capture_default_str();
  app.add_option("--k", cfg.top_k, "Items per recommendation")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--max-turns", cfg.max_turns, "Turn budget T")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--min-attr-freq", cfg.min_attribute_freq,
                 "Drop attributes on fewer items")->capture_default_str();
  app.add_option("--embeddings", cfg.embeddings, "Embedding checkpoint path");
  app.add_option("--policy-checkpoint", cfg.policy_checkpoint, "Policy checkpoint path");
  app.add_option("--policy", cfg.policies,
                 "scpr, maxent, absgreedy or a policy checkpoint (repeatable)");
  app.add_option("--reference", cfg.reference, "Reference policy for SR*");
  app.add_option("--report", cfg.report, "Report format: csv or json")->capture_default_str();
  app.add_option("--names", cfg.names, "Display names (kind:index<TAB>name)");
  app.add_option("--threads", cfg.threads)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--episodes", cfg.episodes, "Policy training episodes")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--user", cfg.user, "User id (chat); cold-start user when omitted");
  app.add_option("--attribute", cfg.attribute, "Opening attribute id (chat)");
  app.add_option("--host", cfg.host)->capture_default_str();
  app.add_option("--port", cfg.port)->capture_default_str();
  app.add_option("--idle-minutes", cfg.idle_minutes, "Session idle expiry")
      ->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--static-dir", cfg.static_dir, "Static files served under /");

  TrainConfig& tc = cfg.train;
  app.add_option("--fm-dim", tc.dimension)->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--fm-epochs", tc.epochs)->check(CLI::NonNegativeNumber)->capture_default_str();
  app.add_option("--fm-lr-item", tc.lr_item)->capture_default_str();
  app.add_option("--fm-lr-attr", tc.lr_attr)->capture_default_str();
  app.add_option("--fm-l2", tc.l2)->capture_default_str();
  app.add_option("--fm-init-range", tc.init_range)->capture_default_str();

  DqnConfig& dc = cfg.dqn;
  app.add_option("--dqn-batch", dc.batch_size)->capture_default_str();
  app.add_option("--dqn-replay", dc.replay_capacity)->capture_default_str();
  app.add_option("--dqn-gamma", dc.gamma)->capture_default_str();
  app.add_option("--dqn-sync-every", dc.target_sync_every)->capture_default_str();
  app.add_option("--dqn-hidden", dc.hidden_dim)->capture_default_str();
  app.add_option("--dqn-lr", dc.learning_rate)->capture_default_str();
  app.add_option("--dqn-epsilon-start", dc.epsilon_start)->capture_default_str();
  app.add_option("--dqn-epsilon-end", dc.epsilon_end)->capture_default_str();
  app.add_option("--dqn-epsilon-decay", dc.epsilon_decay_steps)->capture_default_str();
  app.add_option("--reward-rec-success", dc.rewards.rec_success)->capture_default_str();
  app.add_option("--reward-rec-fail", dc.rewards.rec_fail)->capture_default_str();
  app.add_option("--reward-ask-success", dc.rewards.ask_success)->capture_default_str();
  app.add_option("--reward-ask-fail", dc.rewards.ask_fail)->capture_default_str();
  app.add_option("--reward-quit", dc.rewards.quit)->capture_default_str();

  CLI::App* train_fm = app.add_subcommand("train-fm", "Train FM embeddings on the train split");
  CLI::App* train_policy =
      app.add_subcommand("train-policy", "Train the DQN policy on the validation split");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Simulate test episodes and report metrics");
  CLI::App* chat = app.add_subcommand("chat", "Answer the recommender's questions on the terminal");
  CLI::App* serve = app.add_subcommand("serve", "Run the HTTP session service");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_fm->parsed()) return TrainFm(cfg, out);
    if (train_policy->parsed()) return TrainPolicyCommand(cfg, out);
    if (evaluate->parsed()) return Evaluate(cfg, out);
    if (chat->parsed()) return Chat(cfg, in, out);
    if (serve->parsed()) return Serve(cfg, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace cpr::cli
