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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cpr/embedding.h"
#include "cpr/policy.h"

namespace cpr::cli {

// Everything a command needs. Flags override the --config file, which
// overrides these defaults.
struct RunConfig {
  std::string data;       // edge-list file
  std::string synthetic;  // synthetic spec (JSON)
  std::string out = ".";
  std::uint64_t seed = 0;
  int top_k = 10;
  int max_turns = 15;
  std::uint32_t min_attribute_freq = 1;
  TrainConfig train;
  DqnConfig dqn;
  int episodes = 2000;
  std::string embeddings;         // default <out>/embeddings.cpremb
  std::string policy_checkpoint;  // default <out>/policy.cprpol
  std::vector<std::string> policies;
  std::string reference;
  std::string report = "csv";
  std::string names;
  int threads = 1;
  std::optional<std::uint32_t> user;
  std::optional<std::uint32_t> attribute;
  std::string host = "127.0.0.1";
  int port = 8080;
  int idle_minutes = 30;
  std::string static_dir;

  std::string EmbeddingsPath() const;
  std::string PolicyPath() const;
};

int TrainFm(const RunConfig& cfg, std::ostream& out);
int TrainPolicyCommand(const RunConfig& cfg, std::ostream& out);
int Evaluate(const RunConfig& cfg, std::ostream& out);
int Chat(const RunConfig& cfg, std::istream& in, std::ostream& out);
int Serve(const RunConfig& cfg, std::ostream& out);

// Parses argv and dispatches. Exit codes: 0 success, 1 internal error,
// 2 usage or configuration error.
int RunCli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
           std::ostream& err);

}  // namespace cpr::cli
