#include <doctest.h>

#include <set>
#include <sstream>

#include "provstream/provgraph.hpp"
#include "provstream/seqmodel.hpp"

using namespace provstream;
using provgraph::StreamingGraph;
using provgraph::VersionedNode;

namespace {

EntityDescriptor proc(const std::string& id) { return {id, EntityKind::Process, "/bin/" + id}; }
EntityDescriptor file(const std::string& id) { return {id, EntityKind::File, "/f/" + id}; }
EntityDescriptor sock(const std::string& id) { return {id, EntityKind::Socket, id + ":443"}; }

Event ev(const EntityDescriptor& s, const EntityDescriptor& d, Relation r, Timestamp t) {
  return Event{s, d, r, t};
}

// basis-vector features make root means exactly checkable
StreamingGraph::FeatureFn basis_features(int dim) {
  return [dim](const EntityDescriptor& d) {
    std::vector<double> v(static_cast<size_t>(dim), 0.0);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : d.id) {
      h ^= c;
      h *= 1099511628211ull;
    }
    v[h % static_cast<uint64_t>(dim)] = 1.0;
    return v;
  };
}

}  // namespace

TEST_CASE("write then read versions the reader, not the file") {
  StreamingGraph g(8, 32, true);
  auto feat = basis_features(8);
  // firefox writes its cache: file has no outgoing yet, so no version bump
  auto tr1 = g.apply_event(ev(proc("firefox"), file("cache"), Relation::Write, 1), feat);
  CHECK_FALSE(tr1.dst_versioned);
  CHECK(g.status(tr1.dst_idx).version == 0);
  CHECK(g.status(tr1.src_idx).has_outgoing);
  // firefox reads the cache back: firefox had outgoing, so firefox versions
  auto tr2 = g.apply_event(ev(file("cache"), proc("firefox"), Relation::Read, 2), feat);
  CHECK(tr2.dst_versioned);
  CHECK(g.status(tr2.dst_idx).version == 1);
  CHECK_FALSE(g.status(tr2.dst_idx).has_outgoing);
  // the oracle graph stayed acyclic through the cycle-breaking
  CHECK(g.oracle().is_acyclic());
  CHECK(g.oracle().temporal_ok());
}

TEST_CASE("fresh source becomes its own root; destination inherits") {
  StreamingGraph g(8, 32, false);
  auto feat = basis_features(8);
  auto tr = g.apply_event(ev(file("F"), proc("A"), Relation::Read, 1), feat);
  const auto& froots = g.status(tr.src_idx).roots;
  CHECK(froots.count == 1);
  REQUIRE(froots.ids.size() == 1);
  CHECK(froots.ids[0] == tr.src_idx);
  const auto& aroots = g.status(tr.dst_idx).roots;
  CHECK(aroots.count == 1);
  REQUIRE(aroots.ids.size() == 1);
  CHECK(aroots.ids[0] == tr.src_idx);
  CHECK(aroots.mean(8) == feat(file("F")));
}

TEST_CASE("merge_roots is idempotent per id and averages singletons") {
  int dim = 4;
  std::vector<std::vector<double>> vecs = {{1, 0, 0, 0}, {0, 1, 0, 0}};
  auto vec_of = [&](uint32_t i) -> const std::vector<double>& { return vecs[i]; };

  provgraph::RootSummary a;
  a.sum = vecs[0];
  a.count = 1;
  a.ids = {0};
  provgraph::RootSummary same = a;
  provgraph::merge_roots(a, same, vec_of, 32);
  CHECK(a.count == 1);
  CHECK(a.mean(dim) == vecs[0]);

  provgraph::RootSummary b;
  b.sum = vecs[1];
  b.count = 1;
  b.ids = {1};
  provgraph::merge_roots(a, b, vec_of, 32);
  CHECK(a.count == 2);
  CHECK(a.ids == std::vector<uint32_t>{0, 1});
  CHECK(a.mean(dim) == std::vector<double>{0.5, 0.5, 0, 0});
}

TEST_CASE("chain propagates the sole root and its exact vector") {
  StreamingGraph g(8, 32, true);
  auto feat = basis_features(8);
  // a -> b -> c -> d, a is the only in-degree-0 entity
  g.apply_event(ev(proc("a"), proc("b"), Relation::Exec, 1), feat);
  g.apply_event(ev(proc("b"), proc("c"), Relation::Exec, 2), feat);
  g.apply_event(ev(proc("c"), proc("d"), Relation::Exec, 3), feat);
  uint32_t d_idx = *g.interner().find("d");
  uint32_t a_idx = *g.interner().find("a");
  const auto& roots = g.status(d_idx).roots;
  CHECK(roots.ids == std::vector<uint32_t>{a_idx});
  CHECK(roots.count == 1);
  CHECK(roots.mean(8) == feat(proc("a")));
  // streaming ids equal the oracle roots
  auto oracle_roots = g.oracle().roots_of({d_idx, 0});
  REQUIRE(oracle_roots.size() == 1);
  CHECK(oracle_roots.begin()->entity == a_idx);
}

TEST_CASE("backward trace covers chains and diamonds") {
  StreamingGraph g(8, 32, true);
  auto feat = basis_features(8);
  g.apply_event(ev(proc("a"), proc("b"), Relation::Exec, 1), feat);
  g.apply_event(ev(proc("a"), proc("c"), Relation::Exec, 2), feat);
  g.apply_event(ev(proc("b"), proc("d"), Relation::Exec, 3), feat);
  g.apply_event(ev(proc("c"), proc("d"), Relation::Exec, 4), feat);
  uint32_t d_idx = *g.interner().find("d");
  auto tr = g.oracle().backward_trace({d_idx, 0});
  CHECK(tr.nodes.size() == 4);
  CHECK(tr.edges.size() == 4);
  auto roots = g.oracle().roots_of({d_idx, 0});
  REQUIRE(roots.size() == 1);
  CHECK(roots.begin()->entity == *g.interner().find("a"));

  // isolated source: trace of a root is itself
  uint32_t a_idx = *g.interner().find("a");
  auto ta = g.oracle().backward_trace({a_idx, 0});
  CHECK(ta.nodes.size() == 1);
  CHECK(ta.edges.empty());
  auto ra = g.oracle().roots_of({a_idx, 0});
  REQUIRE(ra.size() == 1);
  CHECK(ra.begin()->entity == a_idx);

  CHECK_THROWS_AS(g.oracle().backward_trace({999, 0}), DataError);
}

namespace {

// random legal event log over a small population
std::vector<Event> random_log(uint64_t seed, int n_events, int n_procs, int n_files,
                              int n_socks) {
  uint64_t rng = seed;
  std::vector<Event> log;
  for (int i = 0; i < n_events; ++i) {
    Timestamp t = i + 1;
    switch (seqmodel::splitmix64(rng) % 5) {
      case 0:
        log.push_back(ev(file("f" + std::to_string(seqmodel::splitmix64(rng) % n_files)),
                         proc("p" + std::to_string(seqmodel::splitmix64(rng) % n_procs)),
                         Relation::Read, t));
        break;
      case 1:
        log.push_back(ev(proc("p" + std::to_string(seqmodel::splitmix64(rng) % n_procs)),
                         file("f" + std::to_string(seqmodel::splitmix64(rng) % n_files)),
                         Relation::Write, t));
        break;
      case 2: {
        uint64_t a = seqmodel::splitmix64(rng) % n_procs;
        uint64_t b = seqmodel::splitmix64(rng) % n_procs;
        if (a == b) b = (b + 1) % n_procs;
        log.push_back(ev(proc("p" + std::to_string(a)), proc("p" + std::to_string(b)),
                         Relation::Exec, t));
        break;
      }
      case 3:
        log.push_back(ev(sock("s" + std::to_string(seqmodel::splitmix64(rng) % n_socks)),
                         proc("p" + std::to_string(seqmodel::splitmix64(rng) % n_procs)),
                         Relation::Recv, t));
        break;
      default:
        log.push_back(ev(proc("p" + std::to_string(seqmodel::splitmix64(rng) % n_procs)),
                         sock("s" + std::to_string(seqmodel::splitmix64(rng) % n_socks)),
                         Relation::Send, t));
        break;
    }
  }
  return log;
}

}  // namespace

TEST_CASE("random logs build acyclic, temporally ordered oracle graphs") {
  for (uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    StreamingGraph g(8, 32, true);
    auto feat = basis_features(8);
    for (const Event& e : random_log(seed, 3000, 6, 10, 3)) g.apply_event(e, feat);
    CHECK(g.oracle().is_acyclic());
    CHECK(g.oracle().temporal_ok());
  }
}

TEST_CASE("superseded versions are immutable") {
  StreamingGraph g(8, 32, true);
  auto feat = basis_features(8);
  std::vector<Event> log = random_log(77, 500, 4, 6, 2);
  std::map<VersionedNode, std::pair<size_t, size_t>> degree_at_supersede;
  auto degrees = [&](VersionedNode n) {
    size_t in = 0, out = 0;
    for (const auto& e : g.oracle().edges()) {
      if (e.dst == n) ++in;
      if (e.src == n) ++out;
    }
    return std::pair{in, out};
  };
  for (const Event& e : log) {
    auto tr = g.apply_event(e, feat);
    if (tr.dst_versioned)
      degree_at_supersede[{tr.dst_idx, tr.dst_version - 1}] = degrees({tr.dst_idx, tr.dst_version - 1});
  }
  for (auto& [node, deg] : degree_at_supersede) CHECK(degrees(node) == deg);
}

TEST_CASE("streaming root ids agree with the materialized oracle under the cap") {
  for (uint64_t seed = 100; seed < 110; ++seed) {
    StreamingGraph g(8, 32, true);
    auto feat = basis_features(8);
    for (const Event& e : random_log(seed, 1500, 5, 8, 3)) g.apply_event(e, feat);
    for (uint32_t idx = 0; idx < g.entity_count(); ++idx) {
      const auto& rs = g.status(idx).roots;
      if (rs.count == 0 || rs.count > g.k_roots()) continue;
      auto oracle = g.oracle().roots_of({idx, g.status(idx).version});
      std::set<uint32_t> oracle_ids;
      for (const auto& n : oracle) oracle_ids.insert(n.entity);
      std::set<uint32_t> stream_ids(rs.ids.begin(), rs.ids.end());
      CHECK(stream_ids == oracle_ids);
    }
  }
}

TEST_CASE("root id set is capped with first-seen retention, mean stays exact") {
  const int dim = 4;
  std::vector<std::vector<double>> vecs;
  for (int i = 0; i < 8; ++i) {
    std::vector<double> v(dim, 0.0);
    v[i % dim] = 1.0;
    vecs.push_back(v);
  }
  auto vec_of = [&](uint32_t i) -> const std::vector<double>& { return vecs[i]; };
  provgraph::RootSummary dst;
  for (uint32_t i = 0; i < 6; ++i) {
    provgraph::RootSummary s;
    s.sum = vecs[i];
    s.count = 1;
    s.ids = {i};
    provgraph::merge_roots(dst, s, vec_of, 4);
  }
  CHECK(dst.ids == std::vector<uint32_t>{0, 1, 2, 3});  // capped, first seen win
  CHECK(dst.count == 6);                                // mean still counts all six
  double sum0 = 0;
  for (double x : dst.sum) sum0 += x;
  CHECK(sum0 == doctest::Approx(6.0));
}

TEST_CASE("streaming state is one entry per entity id, not per version") {
  StreamingGraph g(8, 32, false);
  auto feat = basis_features(8);
  // ping-pong between two processes forces many versions of each
  for (int i = 0; i < 100; ++i) {
    g.apply_event(ev(proc("a"), proc("b"), Relation::Exec, 2 * i + 1), feat);
    g.apply_event(ev(proc("b"), proc("a"), Relation::Exec, 2 * i + 2), feat);
  }
  CHECK(g.entity_count() == 2);
  CHECK(g.status(0).version + g.status(1).version > 100);
  size_t bytes_2 = g.state_bytes();
  g.apply_event(ev(proc("a"), proc("c"), Relation::Exec, 999), feat);
  CHECK(g.entity_count() == 3);
  CHECK(g.state_bytes() > bytes_2);
}

TEST_CASE("oracle export emits one edge per line with versions") {
  StreamingGraph g(8, 32, true);
  auto feat = basis_features(8);
  g.apply_event(ev(proc("firefox"), file("cache"), Relation::Write, 1), feat);
  g.apply_event(ev(file("cache"), proc("firefox"), Relation::Read, 2), feat);
  std::ostringstream out;
  g.oracle().export_tsv(out, g.interner());
  CHECK(out.str() ==
        "firefox#0\tcache#0\tWrite\t1\n"
        "cache#0\tfirefox#1\tRead\t2\n");
}

TEST_CASE("streaming graph state serializes and restores bit for bit") {
  StreamingGraph g(8, 16, false);
  auto feat = basis_features(8);
  for (const Event& e : random_log(55, 400, 4, 5, 2)) g.apply_event(e, feat);
  std::stringstream buf;
  g.save(buf);
  StreamingGraph g2(8, 16, false);
  g2.load(buf);
  REQUIRE(g2.entity_count() == g.entity_count());
  for (uint32_t i = 0; i < g.entity_count(); ++i) {
    CHECK(g2.status(i).version == g.status(i).version);
    CHECK(g2.status(i).has_outgoing == g.status(i).has_outgoing);
    CHECK(g2.status(i).roots.sum == g.status(i).roots.sum);
    CHECK(g2.status(i).roots.count == g.status(i).roots.count);
    CHECK(g2.status(i).roots.ids == g.status(i).roots.ids);
  }
  // both continue identically
  Event e = ev(proc("p0"), file("f99"), Relation::Write, 100000);
  auto t1 = g.apply_event(e, feat);
  auto t2 = g2.apply_event(e, feat);
  CHECK(t1.dst_versioned == t2.dst_versioned);
  CHECK(t1.dst_version == t2.dst_version);
}
