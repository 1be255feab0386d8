#include <doctest.h>

#include <algorithm>
#include <map>

#include "coaplab/capture.hpp"
#include "coaplab/error.hpp"
#include "coaplab/traffic.hpp"

using namespace coaplab;

namespace {

std::int64_t count_requests_from(const std::vector<PacketRecord>& packets, Ipv4 ip) {
  return std::count_if(packets.begin(), packets.end(), [&](const PacketRecord& p) { return p.src_ip == ip; });
}

}  // namespace

TEST_CASE("benign actions stay inside the configured ranges") {
  ScenarioConfig cfg;
  Rng rng(42);
  std::map<coap::Method, int> seen;
  for (int i = 0; i < 5000; ++i) {
    const BenignAction a = benign_next_action(rng, cfg);
    CHECK(a.payload_len >= 100);
    CHECK(a.payload_len <= 300);
    CHECK(a.sleep >= 2.0);
    CHECK(a.sleep <= 7.0);
    ++seen[a.method];
  }
  // Roughly uniform over the three methods.
  for (const auto& [method, n] : seen) CHECK(std::abs(n - 5000 / 3) < 200);
  CHECK(seen.size() == 3);
}

TEST_CASE("benign action sequence is reproducible") {
  ScenarioConfig cfg;
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(benign_next_action(a, cfg) == benign_next_action(b, cfg));
}

TEST_CASE("attacker bursts") {
  ScenarioConfig cfg;
  Rng rng(1);
  SUBCASE("defaults") {
    const auto burst = attacker_burst(rng, cfg, 65530);
    REQUIRE(burst.size() == 300);
    std::size_t bytes = 0;
    for (std::size_t i = 0; i < burst.size(); ++i) {
      CHECK(burst[i].code == coap::Code::Put);
      CHECK(burst[i].payload.size() == 9203);
      CHECK(burst[i].message_id == static_cast<std::uint16_t>(65530 + i));
      bytes += burst[i].payload.size();
    }
    CHECK(bytes == 300u * 9203u);
    CHECK(bytes == 2'760'900u);
  }
  SUBCASE("single packet") {
    cfg.attack_burst_count = 1;
    const auto burst = attacker_burst(rng, cfg);
    REQUIRE(burst.size() == 1);
    CHECK(burst[0].code == coap::Code::Put);
  }
}

TEST_CASE("attack schedule") {
  ScenarioConfig cfg;
  const auto attackers = attacker_ips(cfg);
  REQUIRE(attackers.size() == 2);

  SUBCASE("30 minutes") {
    cfg.duration = 1800;
    const auto s = attack_schedule(cfg);
    CHECK(s.size() == 6);
    for (const Ipv4 ip : attackers) {
      std::vector<double> starts;
      for (const auto& e : s) {
        if (e.attacker_ip == ip) starts.push_back(e.start);
      }
      CHECK(starts == std::vector<double>{0, 600, 1200});
    }
  }
  SUBCASE("shorter than one interval") {
    cfg.duration = 599;
    const auto s = attack_schedule(cfg);
    REQUIRE(s.size() == 2);
    CHECK(s[0].start == 0);
    CHECK(s[1].start == 0);
  }
  SUBCASE("1000.68 minutes") {
    cfg.duration = 60'041;
    const auto s = attack_schedule(cfg);
    // floor(duration / interval) + 1 slots per attacker
    CHECK(s.size() == 2 * (60'041 / 600 + 1));
    CHECK(s.size() == 202);
  }
  SUBCASE("coordinated: both attackers share start times") {
    cfg.duration = 3601;
    const auto s = attack_schedule(cfg);
    std::map<double, int> per_start;
    for (const auto& e : s) ++per_start[e.start];
    for (const auto& [t, n] : per_start) CHECK(n == 2);
    CHECK(per_start.size() == 7);
  }
}

TEST_CASE("mixed attacker steps") {
  ScenarioConfig cfg;
  cfg.attacker_mode = AttackerMode::Mixed;

  SUBCASE("burst count matches an independent replay of the random stream") {
    cfg.p_attack = 0.05;
    Rng rng(77);
    int bursts = 0;
    for (int i = 0; i < 1000; ++i) bursts += std::holds_alternative<DosBurst>(mixed_attacker_step(rng, cfg)) ? 1 : 0;

    // Replay: one uniform draw per step, and three more (method, length, sleep) for benign steps.
    Rng replay(77);
    int expected = 0;
    for (int i = 0; i < 1000; ++i) {
      if (replay.uniform01() < 0.05) {
        ++expected;
      } else {
        replay.uniform_int(0, 2);
        replay.uniform_int(cfg.benign_payload_min, cfg.benign_payload_max);
        replay.uniform_real(cfg.benign_sleep_min, cfg.benign_sleep_max);
      }
    }
    CHECK(bursts == expected);
    CHECK(bursts > 20);
    CHECK(bursts < 90);
  }
  SUBCASE("p_attack 0 behaves as the benign client") {
    cfg.p_attack = 0;
    Rng a(5), b(5);
    for (int i = 0; i < 200; ++i) {
      const AttackerStep step = mixed_attacker_step(a, cfg);
      b.uniform01();  // the burst decision
      const BenignAction expected = benign_next_action(b, cfg);
      REQUIRE(std::holds_alternative<BenignAction>(step));
      CHECK(std::get<BenignAction>(step) == expected);
    }
  }
  SUBCASE("p_attack 1 always bursts") {
    cfg.p_attack = 1;
    Rng rng(5);
    for (int i = 0; i < 100; ++i) CHECK(std::holds_alternative<DosBurst>(mixed_attacker_step(rng, cfg)));
  }
  SUBCASE("coordinated mode rejects mixed steps") {
    cfg.attacker_mode = AttackerMode::Coordinated;
    Rng rng(5);
    CHECK_THROWS_AS(mixed_attacker_step(rng, cfg), ConfigError);
  }
}

TEST_CASE("default one-hour scenario") {
  const ScenarioConfig cfg;
  const ScenarioOutput out = run_scenario(cfg);
  const auto attackers = attacker_ips(cfg);
  const Ipv4 server = cfg.endpoints[0].ip;

  std::int64_t attack_requests = 0;
  for (const auto& p : out.packets) {
    if (std::find(attackers.begin(), attackers.end(), p.src_ip) != attackers.end() && p.dst_ip == server) {
      ++attack_requests;
    }
  }
  const auto slots = static_cast<std::int64_t>(attack_schedule(cfg).size());
  CHECK(attack_requests == slots * cfg.attack_burst_count);
  CHECK(attack_requests == 2 * 7 * 300);
  CHECK(out.attack_log.size() == 14);

  SUBCASE("packets are time ordered and inside the run") {
    CHECK(std::is_sorted(out.packets.begin(), out.packets.end(),
                         [](const PacketRecord& a, const PacketRecord& b) { return a.ts < b.ts; }));
    CHECK(out.packets.back().ts <= static_cast<Micros>(cfg.duration * 1e6));
  }
  SUBCASE("every request has a response") {
    std::int64_t to_server = 0, from_server = 0;
    for (const auto& p : out.packets) {
      to_server += p.dst_ip == server ? 1 : 0;
      from_server += p.src_ip == server ? 1 : 0;
    }
    CHECK(to_server == from_server);
  }
  SUBCASE("attack events contain exactly their packets") {
    for (const auto& e : out.attack_log) {
      CHECK(e.start <= e.end);
      CHECK(e.packets_sent == cfg.attack_burst_count);
      const auto inside = std::count_if(out.packets.begin(), out.packets.end(), [&](const PacketRecord& p) {
        return p.src_ip == e.attacker_ip && p.ts >= e.start && p.ts <= e.end;
      });
      CHECK(inside == e.packets_sent);
    }
  }
  SUBCASE("benign request gaps lie in the sleep range plus service time") {
    const Ipv4 benign = cfg.endpoints[3].ip;
    std::vector<Micros> times;
    for (const auto& p : out.packets) {
      if (p.src_ip == benign) times.push_back(p.ts);
    }
    REQUIRE(times.size() > 100);
    const Micros service = static_cast<Micros>(cfg.response_latency * 1e6);
    for (std::size_t i = 1; i < times.size(); ++i) {
      const Micros gap = times[i] - times[i - 1];
      CHECK(gap >= 2'000'000 + service);
      CHECK(gap <= 7'000'000 + service + 1);
    }
  }
  SUBCASE("every frame has valid checksums") {
    CHECK(std::all_of(out.packets.begin(), out.packets.end(), verify_checksums));
  }
  SUBCASE("attack fraction is computable") {
    std::unordered_set<Ipv4> mal(attackers.begin(), attackers.end());
    CHECK(count_requests_from(out.packets, attackers[0]) == 7 * 300);
    const auto s = dataset_stats(out.packets, mal);
    CHECK(s.attack_requests == 4200);
  }
}

TEST_CASE("scenario output is a pure function of the config") {
  ScenarioConfig cfg;
  cfg.duration = 900;
  const auto a = run_scenario(cfg);
  const auto b = run_scenario(cfg);
  CHECK(pcap_bytes(a.packets) == pcap_bytes(b.packets));
  CHECK(a.attack_log == b.attack_log);
  cfg.rng_seed = 43;
  CHECK(pcap_bytes(run_scenario(cfg).packets) != pcap_bytes(a.packets));
}

TEST_CASE("mixed-mode scenario bursts are logged") {
  ScenarioConfig cfg;
  cfg.duration = 1200;
  cfg.attacker_mode = AttackerMode::Mixed;
  cfg.p_attack = 0.05;
  const auto out = run_scenario(cfg);
  CHECK_FALSE(out.attack_log.empty());
  std::int64_t logged = 0;
  for (const auto& e : out.attack_log) logged += e.packets_sent;
  std::int64_t big = 0;
  for (const auto& p : out.packets) big += p.payload.size() > 9203 ? 1 : 0;
  CHECK(big == logged);
}

TEST_CASE("zero duration yields an empty run") {
  ScenarioConfig cfg;
  cfg.duration = 0;
  const auto out = run_scenario(cfg);
  CHECK(out.packets.empty());
  CHECK(out.attack_log.empty());
}

TEST_CASE("config validation") {
  ScenarioConfig cfg;
  SUBCASE("payload range") {
    cfg.benign_payload_min = 400;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("sleep range") {
    cfg.benign_sleep_min = 8;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("burst count") {
    cfg.attack_burst_count = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("duplicate ip") {
    cfg.endpoints[1].ip = cfg.endpoints[0].ip;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("no server") {
    cfg.endpoints.erase(cfg.endpoints.begin());
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("negative duration") {
    cfg.duration = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("scenario JSON round trip and overrides") {
  ScenarioConfig cfg;
  cfg.duration = 1234.5;
  cfg.attacker_mode = AttackerMode::Mixed;
  cfg.rng_seed = 99;
  const ScenarioConfig back = scenario_from_json(scenario_to_json(cfg));
  CHECK(back.duration == 1234.5);
  CHECK(back.attacker_mode == AttackerMode::Mixed);
  CHECK(back.rng_seed == 99);
  CHECK(back.endpoints.size() == 4);
  CHECK(back.endpoints[0].port == 8080);
  const ScenarioConfig partial = scenario_from_json(R"({"scenario": {"attack_interval": 300}})");
  CHECK(partial.attack_interval == 300);
  CHECK(partial.attack_burst_count == 300);
  CHECK_THROWS_AS(scenario_from_json("{"), ConfigError);
}

TEST_CASE("virtual clock is monotone") {
  VirtualClock clock;
  clock.advance_to(5);
  clock.advance_to(5);
  CHECK(clock.now() == 5);
  CHECK_THROWS_AS(clock.advance_to(4), std::logic_error);
}
