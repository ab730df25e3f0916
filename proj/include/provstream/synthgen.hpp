#pragma once

// Deterministic desk-scale audit-log generator: repetitive benign behavior
// templates over a stable entity population, with an optional injected attack
// chain (inbound socket exploit, privilege-escalation exec, sensitive-file
// reads, exfil send) whose process entities carry the attack labels.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "provstream/types.hpp"

namespace provstream::synthgen {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AttackConfig {
  bool enabled = false;
  int chain_length = 6;       // >= 3 edges
  int spacing = 2000;         // benign events between consecutive attack steps
  double start_fraction = 0.5;
};

struct ScenarioConfig {
  uint64_t seed = 1;
  int n_benign_behaviors = 5;
  int events_per_behavior = 10000;
  int n_entities = 400;
  AttackConfig attack;
};

struct Scenario {
  std::vector<Event> events;                         // ordered, legal
  std::vector<std::pair<std::string, bool>> labels;  // every entity, attack flag
};

Scenario generate(const ScenarioConfig& cfg);

void write_jsonl(std::ostream& out, const std::vector<Event>& events);

}  // namespace provstream::synthgen
