#include "provstream/synthgen.hpp"

#include <algorithm>

#include "provstream/ingest.hpp"
#include "provstream/seqmodel.hpp"

namespace provstream::synthgen {

namespace {

const char* kNouns[] = {"browser", "indexer", "backupd", "mailer",
                        "builder", "telemetry", "scanner", "syncer"};
constexpr size_t kNounCount = sizeof(kNouns) / sizeof(kNouns[0]);

const char* kSensitiveFiles[] = {"/etc/shadow", "/etc/sudoers", "/etc/ssl/private/host.key"};
const char* kImplantPaths[] = {"/usr/local/sbin/elevate", "/tmp/.payload/implant",
                               "/tmp/.payload/dropper"};

struct BehaviorPool {
  std::vector<EntityDescriptor> procs, files, socks;
  uint64_t rng;
  uint64_t step = 0;
};

uint64_t rng_next(uint64_t& s) { return seqmodel::splitmix64(s); }

EntityDescriptor make(const std::string& id, EntityKind kind, const std::string& path) {
  return EntityDescriptor{id, kind, path};
}

}  // namespace

Scenario generate(const ScenarioConfig& cfg) {
  const int B = cfg.n_benign_behaviors;
  if (B < 1) throw ConfigError("need at least one benign behavior");
  if (cfg.events_per_behavior < 1) throw ConfigError("events_per_behavior must be >= 1");
  if (cfg.n_entities < 5 * B)
    throw ConfigError("need at least 5 entities per behavior (2 processes, 2 files, 1 socket)");
  if (cfg.attack.enabled) {
    if (cfg.attack.chain_length < 3) throw ConfigError("attack chain needs >= 3 steps");
    if (cfg.attack.spacing < 0) throw ConfigError("attack spacing must be >= 0");
    if (cfg.attack.start_fraction <= 0.0 || cfg.attack.start_fraction >= 1.0)
      throw ConfigError("attack start_fraction must be in (0,1)");
  }

  Scenario sc;
  std::vector<BehaviorPool> pools(static_cast<size_t>(B));
  uint64_t master = cfg.seed ? cfg.seed : 0x6d35f1c4e2b9a780ull;

  auto add_entity = [&](const EntityDescriptor& d) { sc.labels.emplace_back(d.id, false); };

  for (int b = 0; b < B; ++b) {
    BehaviorPool& pool = pools[static_cast<size_t>(b)];
    pool.rng = rng_next(master) ^ (0x1234567u + static_cast<uint64_t>(b));
    const std::string noun = kNouns[static_cast<size_t>(b) % kNounCount];
    int quota = cfg.n_entities / B + (b < cfg.n_entities % B ? 1 : 0);
    int n_proc = std::max(2, quota / 5);
    int n_sock = std::max(1, quota / 6);
    int n_file = std::max(2, quota - n_proc - n_sock);
    auto tag = [&](char k, int i) {
      return "b" + std::to_string(b) + ":" + k + std::to_string(i);
    };
    for (int i = 0; i < n_proc; ++i)
      pool.procs.push_back(make(tag('p', i), EntityKind::Process,
                                "/usr/bin/" + noun + "-" + std::to_string(i)));
    for (int i = 0; i < n_file; ++i) {
      std::string path = (i % 3 == 0)
                             ? "/etc/" + noun + "/main-" + std::to_string(i) + ".conf"
                             : "/home/user/" + noun + "/doc-" + std::to_string(i) + ".dat";
      pool.files.push_back(make(tag('f', i), EntityKind::File, path));
    }
    for (int i = 0; i < n_sock; ++i)
      pool.socks.push_back(make(tag('s', i), EntityKind::Socket,
                                "srv-" + std::to_string(i) + "." + noun + ".internal:443"));
    for (auto& d : pool.procs) add_entity(d);
    for (auto& d : pool.files) add_entity(d);
    for (auto& d : pool.socks) add_entity(d);
  }

  auto benign_event = [&](BehaviorPool& pool) -> Event {
    auto pick = [&](const std::vector<EntityDescriptor>& v) -> const EntityDescriptor& {
      return v[rng_next(pool.rng) % v.size()];
    };
    auto pick_other = [&](const std::vector<EntityDescriptor>& v,
                          const EntityDescriptor& not_this) -> const EntityDescriptor& {
      for (;;) {
        const EntityDescriptor& d = pick(v);
        if (d.id != not_this.id) return d;
      }
    };
    Event e;
    switch (pool.step++ % 8) {
      case 0: e = {pick(pool.files), pick(pool.procs), Relation::Read, 0}; break;
      case 1: e = {pick(pool.files), pick(pool.procs), Relation::Read, 0}; break;
      case 2: e = {pick(pool.procs), pick(pool.files), Relation::Write, 0}; break;
      case 3: {
        const EntityDescriptor& f = pick(pool.files);
        e = {f, pick(pool.procs), Relation::Read, 0};
        break;
      }
      case 4: e = {pick(pool.procs), pick(pool.socks), Relation::Send, 0}; break;
      case 5: e = {pick(pool.procs), pick(pool.files), Relation::Write, 0}; break;
      case 6: {
        const EntityDescriptor& a = pick(pool.procs);
        e = {a, pick_other(pool.procs, a), Relation::Exec, 0};
        break;
      }
      default: e = {pick(pool.socks), pick(pool.procs), Relation::Recv, 0}; break;
    }
    return e;
  };

  // Attack chain: inbound exploit, then alternating privilege-escalation
  // execs and sensitive reads, closed by the exfil send.
  std::vector<Event> chain;
  std::vector<std::string> chain_processes;
  if (cfg.attack.enabled) {
    const int len = cfg.attack.chain_length;
    uint64_t arng = rng_next(master);
    EntityDescriptor c2 = make("atk:s0", EntityKind::Socket,
                               "203.0.113." + std::to_string(10 + arng % 200) + ":4444");
    EntityDescriptor exfil = make("atk:s1", EntityKind::Socket,
                                  "198.51.100." + std::to_string(10 + arng % 100) + ":8443");
    sc.labels.emplace_back(c2.id, false);
    sc.labels.emplace_back(exfil.id, false);

    // The victim runs the same binary as a benign process; only its history
    // and roots can separate it.
    EntityDescriptor victim = make("atk:p0", EntityKind::Process, pools[0].procs[0].path);
    std::vector<EntityDescriptor> procs{victim};
    chain.push_back({c2, victim, Relation::Recv, 0});
    int file_i = 0, proc_i = 0;
    for (int j = 1; j <= len - 2; ++j) {
      EntityDescriptor& cur = procs.back();
      if (j % 2 == 1) {
        const char* base = kImplantPaths[static_cast<size_t>(proc_i) % 3];
        ++proc_i;
        EntityDescriptor next =
            make("atk:p" + std::to_string(procs.size()), EntityKind::Process,
                 std::string(base) + "-" + std::to_string(proc_i));
        chain.push_back({cur, next, Relation::Exec, 0});
        procs.push_back(next);
      } else {
        EntityDescriptor sens = make("atk:f" + std::to_string(file_i), EntityKind::File,
                                     kSensitiveFiles[static_cast<size_t>(file_i) % 3]);
        ++file_i;
        chain.push_back({sens, cur, Relation::Read, 0});
        sc.labels.emplace_back(sens.id, false);
      }
    }
    chain.push_back({procs.back(), exfil, Relation::Send, 0});
    for (const auto& p : procs) {
      sc.labels.emplace_back(p.id, true);
      chain_processes.push_back(p.id);
    }
  }

  const uint64_t benign_total = static_cast<uint64_t>(B) * cfg.events_per_behavior;
  const uint64_t total = benign_total + chain.size();
  std::vector<uint64_t> attack_pos;
  if (!chain.empty()) {
    uint64_t start = static_cast<uint64_t>(cfg.attack.start_fraction * static_cast<double>(total));
    uint64_t stride = static_cast<uint64_t>(cfg.attack.spacing) + 1;
    for (size_t k = 0; k < chain.size(); ++k) attack_pos.push_back(start + k * stride);
    if (attack_pos.back() >= total)
      throw ConfigError("attack chain does not fit: raise events_per_behavior or lower spacing");
  }

  sc.events.reserve(total);
  size_t next_attack = 0;
  uint64_t benign_emitted = 0;
  for (uint64_t i = 0; i < total; ++i) {
    Event e;
    if (next_attack < attack_pos.size() && i == attack_pos[next_attack]) {
      e = chain[next_attack++];
    } else {
      e = benign_event(pools[benign_emitted % static_cast<uint64_t>(B)]);
      ++benign_emitted;
    }
    e.t = static_cast<Timestamp>((i + 1) * 1000000ull);  // 1 ms apart
    sc.events.push_back(std::move(e));
  }
  return sc;
}

void write_jsonl(std::ostream& out, const std::vector<Event>& events) {
  for (const Event& e : events) out << ingest::serialize_jsonl(e) << '\n';
}

}  // namespace provstream::synthgen
