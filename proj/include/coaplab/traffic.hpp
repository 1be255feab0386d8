#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "coaplab/capture.hpp"
#include "coaplab/coap.hpp"
#include "coaplab/net.hpp"
#include "coaplab/random.hpp"

namespace coaplab {

enum class AttackerMode { Coordinated, Mixed };

inline constexpr Micros kMicrosPerSecond = 1'000'000;

/// Defaults reproduce the four-host testbed: server .9:8080, attackers .12 and .5, benign client .2.
struct ScenarioConfig {
  // One hour of traffic plus the closing burst scheduled at t = 3600 s.
  double duration = 3601.0;
  double attack_interval = 600.0;
  std::int64_t attack_burst_count = 300;
  std::int64_t attack_payload_len = 9203;
  std::int64_t benign_payload_min = 100;
  std::int64_t benign_payload_max = 300;
  double benign_sleep_min = 2.0;
  double benign_sleep_max = 7.0;
  AttackerMode attacker_mode = AttackerMode::Coordinated;
  double p_attack = 0.02;
  double burst_spacing = 0.001;
  double response_latency = 0.002;
  std::uint64_t rng_seed = 42;
  std::vector<EndpointConfig> endpoints = default_endpoints();

  static std::vector<EndpointConfig> default_endpoints();
  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

ScenarioConfig scenario_from_json(std::string_view text);
std::string scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_scenario(const std::filesystem::path& path);

struct BenignAction {
  coap::Method method = coap::Method::Get;
  std::int64_t payload_len = 0;  // as drawn; GET sends none of it
  double sleep = 0.0;
  bool operator==(const BenignAction&) const = default;
};

struct DosBurst {
  bool operator==(const DosBurst&) const = default;
};

using AttackerStep = std::variant<BenignAction, DosBurst>;

/// Draw order: method, payload length, sleep.
BenignAction benign_next_action(Rng& rng, const ScenarioConfig& cfg);

/// One uniform draw decides the burst; otherwise a benign action follows.
AttackerStep mixed_attacker_step(Rng& rng, const ScenarioConfig& cfg);

/// attack_burst_count PUT requests with consecutive message ids starting at first_message_id.
std::vector<coap::Message> attacker_burst(Rng& rng, const ScenarioConfig& cfg, std::uint16_t first_message_id = 0);

struct ScheduledAttack {
  Ipv4 attacker_ip;
  double start = 0.0;
  bool operator==(const ScheduledAttack&) const = default;
};

/// Starts at 0, interval, 2*interval, ... strictly below duration, for every attacker; sorted by start.
std::vector<ScheduledAttack> attack_schedule(const ScenarioConfig& cfg);

enum class ClockPolicy { Instant, RealTime };

/// Monotone simulation time. Instant jumps; RealTime paces against the wall clock.
class VirtualClock {
 public:
  explicit VirtualClock(ClockPolicy policy = ClockPolicy::Instant);

  Micros now() const { return now_; }
  ClockPolicy policy() const { return policy_; }
  /// Throws std::logic_error when asked to move backwards.
  void advance_to(Micros t);

 private:
  ClockPolicy policy_;
  Micros now_ = 0;
  std::chrono::steady_clock::time_point origin_;
};

struct ScenarioOutput {
  std::vector<PacketRecord> packets;
  std::vector<AttackEvent> attack_log;
};

inline constexpr std::string_view kUriPath = "data";

ScenarioOutput run_scenario(const ScenarioConfig& cfg, ClockPolicy policy = ClockPolicy::Instant);

/// IPs of every Attacker endpoint.
std::vector<Ipv4> attacker_ips(const ScenarioConfig& cfg);

}  // namespace coaplab
