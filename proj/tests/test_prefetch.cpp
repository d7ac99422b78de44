#include "doctest.h"
#include "remsim/prefetch.hpp"
#include "remsim/sim.hpp"
#include "remsim/trace.hpp"

using namespace remsim;

TEST_CASE("stream prefetcher follows a detected stride") {
  StreamPrefetcher s;
  CHECK(s.train(100, 4).empty());
  CHECK(s.train(101, 4) == std::vector<std::uint64_t>{102, 103, 104, 105});
  CHECK(s.train(102, 4) == std::vector<std::uint64_t>{106, 107, 108, 109});

  StreamPrefetcher down;
  down.train(500, 2);
  CHECK(down.train(498, 2) == std::vector<std::uint64_t>{496, 494});
}

TEST_CASE("stream prefetcher stays within its distance") {
  StreamPrefetcher s;
  s.train(0, 32);
  auto first = s.train(1, 32);
  CHECK(first.size() == 32);
  CHECK(first.back() == 33);
  // Already 32 lines ahead of the next access: nothing more to issue.
  CHECK(s.train(1, 32).empty());
  for (std::uint64_t x : s.train(2, 32)) CHECK(x <= 2 + StreamPrefetcher::kDistance);
}

TEST_CASE("GHB replays the delta sequence after a matching pair") {
  GhbPrefetcher g;
  // Deltas 8, 16, 8, 16: the last pair (8, 16) was seen before and was
  // followed by 8.
  for (std::uint64_t l : {0, 8, 24, 32}) g.train(l, 4);
  auto p = g.train(48, 4);
  REQUIRE(!p.empty());
  CHECK(p[0] == 56);
  CHECK(p == std::vector<std::uint64_t>{56, 72});
  CHECK(g.occupancy() == 5);

  GhbPrefetcher fresh;
  for (std::uint64_t l : {1, 2, 4, 7, 11}) CHECK(fresh.train(l, 4).empty());
}

TEST_CASE("Markov prefetcher emits recorded successors") {
  MarkovPrefetcher m;
  CHECK(m.train(10, 4).empty());
  CHECK(m.train(77, 4).empty());
  CHECK(m.train(10, 4) == std::vector<std::uint64_t>{77});
  m.train(99, 4);
  // Most recent successor first.
  CHECK(m.train(10, 4) == std::vector<std::uint64_t>{99, 77});
  CHECK(MarkovPrefetcher::table_entries() == 16384);
}

TEST_CASE("FDP adjusts the degree by accuracy") {
  CHECK(fdp_adjust(32, 0.9) == 32);
  CHECK(fdp_adjust(4, 0.2) == 2);
  CHECK(fdp_adjust(1, 0.2) == 1);
  CHECK(fdp_adjust(4, 0.75) == 8);
  CHECK(fdp_adjust(4, 0.40) == 4);
  CHECK(fdp_adjust(4, 0.39) == 2);
}

TEST_CASE("FDP degree stays within bounds over random sequences") {
  Rng rng(3);
  for (int seq = 0; seq < 10000; ++seq) {
    unsigned d = 1 + unsigned(rng.below(32));
    for (int i = 0; i < 20; ++i) {
      d = fdp_adjust(d, rng.unit());
      REQUIRE(d >= kMinDegree);
      REQUIRE(d <= kMaxDegree);
    }
  }
}

TEST_CASE("prefetch unit: throttling and interval accounting") {
  PrefetchUnit u(PrefetcherKind::GHB, 8);
  CHECK(u.effective_degree() == 8);
  u.set_throttle(true);
  CHECK(u.effective_degree() == 4);
  PrefetchUnit s(PrefetcherKind::STREAM, 8);
  s.set_throttle(true);
  CHECK(s.effective_degree() == 8);

  for (int i = 0; i < 10; ++i) u.note_issued();
  for (int i = 0; i < 9; ++i) u.note_useful();
  CHECK(u.interval_accuracy() == doctest::Approx(0.9));
  CHECK(u.end_interval() == 16);
  CHECK(u.interval_accuracy() == 0.0);
  CHECK(u.end_interval() == 16);  // no prefetches, no change
  CHECK(PrefetchUnit(PrefetcherKind::NONE).train(5, 0).empty());
}

TEST_CASE("each trigger issues at most the current degree") {
  for (auto k : {PrefetcherKind::STREAM, PrefetcherKind::GHB, PrefetcherKind::MARKOV_STREAM}) {
    PrefetchUnit u(k, 4);
    Rng rng(9);
    std::uint64_t line = 1000;
    for (int i = 0; i < 5000; ++i) {
      line = rng.below(4) ? line + 1 + rng.below(3) : rng.below(1 << 20);
      CHECK(u.train(line, 0).size() <= u.effective_degree());
    }
  }
}

TEST_CASE("prefetcher names round trip") {
  for (auto k : {PrefetcherKind::NONE, PrefetcherKind::STREAM, PrefetcherKind::GHB, PrefetcherKind::MARKOV_STREAM})
    CHECK(prefetcher_from_name(prefetcher_name(k)) == k);
  CHECK_FALSE(prefetcher_from_name("tage"));
}

TEST_CASE("prefetching in the system: useful never exceeds issued, state unchanged") {
  StreamParams sp;
  sp.lines = 4000;
  sp.work = 30;
  Trace t = gen_stream(sp);
  SimConfig base;
  auto ref = simulate(base, {&t});
  for (auto k : {PrefetcherKind::STREAM, PrefetcherKind::GHB, PrefetcherKind::MARKOV_STREAM}) {
    SimConfig c;
    c.prefetcher = k;
    auto r = simulate(c, {&t});
    CHECK(r.digests == ref.digests);
    CHECK(r.stats.global.pf_useful <= r.stats.global.pf_issued);
    CHECK(r.stats.global.pf_issued > 0);
  }
  SimConfig c;
  c.prefetcher = PrefetcherKind::STREAM;
  auto r = simulate(c, {&t});
  CHECK(r.stats.cores[0].cycles < ref.stats.cores[0].cycles);
  CHECK(r.stats.cores[0].llc_misses < ref.stats.cores[0].llc_misses / 2);
}
