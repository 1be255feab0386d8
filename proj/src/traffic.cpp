#include "coaplab/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <queue>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "coaplab/error.hpp"

namespace coaplab {
namespace {

using json = nlohmann::json;

Micros to_micros(double seconds) { return static_cast<Micros>(std::llround(seconds * 1e6)); }

coap::Bytes random_text(Rng& rng, std::int64_t length) {
  static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  coap::Bytes out(static_cast<std::size_t>(length));
  for (auto& c : out) c = static_cast<std::uint8_t>(alphabet[rng.uniform_int(0, alphabet.size() - 1)]);
  return out;
}

coap::Bytes random_token(Rng& rng) {
  const auto v = static_cast<std::uint16_t>(rng.uniform_int(0, 0xFFFF));
  return {static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v & 0xFF)};
}

std::string_view mode_name(AttackerMode m) { return m == AttackerMode::Coordinated ? "coordinated" : "mixed"; }

AttackerMode parse_mode(std::string_view s) {
  if (s == "coordinated") return AttackerMode::Coordinated;
  if (s == "mixed") return AttackerMode::Mixed;
  throw ConfigError("unknown attacker_mode: " + std::string(s));
}

const coap::Bytes kResourceBody = {'o', 'k'};

}  // namespace

std::vector<EndpointConfig> ScenarioConfig::default_endpoints() {
  return {
      {Role::Server, Ipv4(192, 168, 1, 9), 8080, mac_for_index(0)},
      {Role::Attacker, Ipv4(192, 168, 1, 12), 50012, mac_for_index(1)},
      {Role::Attacker, Ipv4(192, 168, 1, 5), 50005, mac_for_index(2)},
      {Role::Benign, Ipv4(192, 168, 1, 2), 50002, mac_for_index(3)},
  };
}

void ScenarioConfig::validate() const {
  if (!(duration > 0)) throw ConfigError("duration must be positive");
  if (!(attack_interval > 0)) throw ConfigError("attack_interval must be positive");
  if (attack_burst_count <= 0) throw ConfigError("attack_burst_count must be positive");
  if (attack_payload_len < 0 || benign_payload_min < 0) throw ConfigError("payload lengths must be non-negative");
  if (benign_payload_min > benign_payload_max) throw ConfigError("benign_payload_min exceeds benign_payload_max");
  if (!(benign_sleep_min >= 0) || benign_sleep_min > benign_sleep_max) {
    throw ConfigError("benign sleep range is invalid");
  }
  if (!(p_attack >= 0 && p_attack <= 1)) throw ConfigError("p_attack must lie in [0, 1]");
  if (!(burst_spacing >= 0) || !(response_latency >= 0)) throw ConfigError("timing constants must be non-negative");
  // 4-byte header, 2-byte token, Uri-Path option, payload marker.
  if (attack_payload_len + 4 + 2 + 1 + static_cast<std::int64_t>(kUriPath.size()) + 1 >
      static_cast<std::int64_t>(kMaxUdpPayload)) {
    throw ConfigError("attack payload does not fit one datagram");
  }
  std::unordered_set<Ipv4> seen;
  int servers = 0;
  for (const auto& e : endpoints) {
    if (!seen.insert(e.ip).second) throw ConfigError("duplicate endpoint IP " + e.ip.to_string());
    servers += e.role == Role::Server ? 1 : 0;
  }
  if (servers != 1) throw ConfigError("scenario needs exactly one server endpoint");
}

std::string scenario_to_json(const ScenarioConfig& cfg) {
  json eps = json::array();
  for (const auto& e : cfg.endpoints) {
    eps.push_back({{"role", role_name(e.role)}, {"ip", e.ip.to_string()}, {"port", e.port}, {"mac", mac_to_string(e.mac)}});
  }
  json doc = {{"duration", cfg.duration},
              {"attack_interval", cfg.attack_interval},
              {"attack_burst_count", cfg.attack_burst_count},
              {"attack_payload_len", cfg.attack_payload_len},
              {"benign_payload_min", cfg.benign_payload_min},
              {"benign_payload_max", cfg.benign_payload_max},
              {"benign_sleep_min", cfg.benign_sleep_min},
              {"benign_sleep_max", cfg.benign_sleep_max},
              {"attacker_mode", mode_name(cfg.attacker_mode)},
              {"p_attack", cfg.p_attack},
              {"burst_spacing", cfg.burst_spacing},
              {"response_latency", cfg.response_latency},
              {"rng_seed", cfg.rng_seed},
              {"endpoints", eps}};
  return doc.dump(2);
}

namespace {

MacAddress parse_mac(const std::string& s) {
  MacAddress mac{};
  unsigned v[6];
  if (std::sscanf(s.c_str(), "%x:%x:%x:%x:%x:%x", &v[0], &v[1], &v[2], &v[3], &v[4], &v[5]) != 6) {
    throw ConfigError("malformed MAC address: " + s);
  }
  for (int i = 0; i < 6; ++i) {
    if (v[i] > 255) throw ConfigError("malformed MAC address: " + s);
    mac[i] = static_cast<std::uint8_t>(v[i]);
  }
  return mac;
}

template <typename T>
void read_field(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

ScenarioConfig scenario_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed scenario config: ") + e.what());
  }
  // Pipeline configs nest the scenario; plain scenario files are accepted as-is.
  if (doc.contains("scenario")) doc = doc.at("scenario");
  ScenarioConfig cfg;
  try {
    read_field(doc, "duration", cfg.duration);
    read_field(doc, "attack_interval", cfg.attack_interval);
    read_field(doc, "attack_burst_count", cfg.attack_burst_count);
    read_field(doc, "attack_payload_len", cfg.attack_payload_len);
    read_field(doc, "benign_payload_min", cfg.benign_payload_min);
    read_field(doc, "benign_payload_max", cfg.benign_payload_max);
    read_field(doc, "benign_sleep_min", cfg.benign_sleep_min);
    read_field(doc, "benign_sleep_max", cfg.benign_sleep_max);
    read_field(doc, "p_attack", cfg.p_attack);
    read_field(doc, "burst_spacing", cfg.burst_spacing);
    read_field(doc, "response_latency", cfg.response_latency);
    read_field(doc, "rng_seed", cfg.rng_seed);
    if (doc.contains("attacker_mode")) cfg.attacker_mode = parse_mode(doc.at("attacker_mode").get<std::string>());
    if (doc.contains("endpoints")) {
      cfg.endpoints.clear();
      std::size_t index = 0;
      for (const auto& e : doc.at("endpoints")) {
        EndpointConfig ep;
        ep.role = parse_role(e.at("role").get<std::string>());
        ep.ip = Ipv4::parse(e.at("ip").get<std::string>());
        ep.port = e.at("port").get<std::uint16_t>();
        ep.mac = e.contains("mac") ? parse_mac(e.at("mac").get<std::string>()) : mac_for_index(index);
        cfg.endpoints.push_back(ep);
        ++index;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid scenario config: ") + e.what());
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  try {
    return scenario_from_json(read_text_file(path));
  } catch (const CaptureError& e) {
    throw ConfigError(e.what());
  }
}

BenignAction benign_next_action(Rng& rng, const ScenarioConfig& cfg) {
  BenignAction a;
  switch (rng.uniform_int(0, 2)) {
    case 0:
      a.method = coap::Method::Get;
      break;
    case 1:
      a.method = coap::Method::Put;
      break;
    default:
      a.method = coap::Method::Post;
      break;
  }
  a.payload_len = rng.uniform_int(cfg.benign_payload_min, cfg.benign_payload_max);
  a.sleep = rng.uniform_real(cfg.benign_sleep_min, cfg.benign_sleep_max);
  return a;
}

AttackerStep mixed_attacker_step(Rng& rng, const ScenarioConfig& cfg) {
  if (cfg.attacker_mode != AttackerMode::Mixed) throw ConfigError("mixed_attacker_step requires Mixed mode");
  if (rng.uniform01() < cfg.p_attack) return DosBurst{};
  return benign_next_action(rng, cfg);
}

std::vector<coap::Message> attacker_burst(Rng& rng, const ScenarioConfig& cfg, std::uint16_t first_message_id) {
  const coap::Bytes payload = random_text(rng, cfg.attack_payload_len);
  std::vector<coap::Message> burst;
  burst.reserve(static_cast<std::size_t>(cfg.attack_burst_count));
  for (std::int64_t i = 0; i < cfg.attack_burst_count; ++i) {
    const auto mid = static_cast<std::uint16_t>(first_message_id + i);
    burst.push_back(coap::make_request(coap::Method::Put, payload, mid, random_token(rng), kUriPath));
  }
  return burst;
}

std::vector<Ipv4> attacker_ips(const ScenarioConfig& cfg) {
  std::vector<Ipv4> ips;
  for (const auto& e : cfg.endpoints) {
    if (e.role == Role::Attacker) ips.push_back(e.ip);
  }
  return ips;
}

std::vector<ScheduledAttack> attack_schedule(const ScenarioConfig& cfg) {
  if (!(cfg.duration > 0) || !(cfg.attack_interval > 0)) throw ConfigError("duration and interval must be positive");
  const Micros duration = to_micros(cfg.duration);
  const Micros interval = to_micros(cfg.attack_interval);
  std::vector<ScheduledAttack> schedule;
  for (Micros t = 0; t < duration; t += interval) {
    for (const Ipv4 ip : attacker_ips(cfg)) schedule.push_back({ip, static_cast<double>(t) / 1e6});
  }
  return schedule;
}

VirtualClock::VirtualClock(ClockPolicy policy) : policy_(policy), origin_(std::chrono::steady_clock::now()) {}

void VirtualClock::advance_to(Micros t) {
  if (t < now_) throw std::logic_error("virtual clock cannot move backwards");
  now_ = t;
  if (policy_ == ClockPolicy::RealTime) std::this_thread::sleep_until(origin_ + std::chrono::microseconds(t));
}

namespace {

// Discrete-event core. Events are ordered by (time, insertion sequence) so ties resolve
// deterministically in scheduling order.
class Simulation {
 public:
  Simulation(const ScenarioConfig& cfg, ClockPolicy policy)
      : cfg_(cfg),
        clock_(policy),
        duration_(to_micros(cfg.duration)),
        latency_(to_micros(cfg.response_latency)),
        spacing_(to_micros(cfg.burst_spacing)) {
    for (std::size_t i = 0; i < cfg.endpoints.size(); ++i) {
      Rng seed_rng(mix_seed(cfg.rng_seed, 1000 + i));
      ip_ids_.push_back(static_cast<std::uint16_t>(seed_rng.uniform_int(0, 0xFFFF)));
      next_mid_.push_back(static_cast<std::uint16_t>(seed_rng.uniform_int(0, 0xFFFF)));
      rngs_.emplace_back(mix_seed(cfg.rng_seed, i));
      if (cfg.endpoints[i].role == Role::Server) server_ = i;
    }
  }

  ScenarioOutput run() {
    for (std::size_t i = 0; i < cfg_.endpoints.size(); ++i) {
      const Role role = cfg_.endpoints[i].role;
      if (role == Role::Benign) {
        schedule(0, [this, i] { benign_step(i); });
      } else if (role == Role::Attacker && cfg_.attacker_mode == AttackerMode::Mixed) {
        schedule(0, [this, i] { mixed_step(i); });
      }
    }
    if (cfg_.attacker_mode == AttackerMode::Coordinated) {
      for (const auto& slot : attack_schedule(cfg_)) {
        const std::size_t attacker = endpoint_index(slot.attacker_ip);
        const Micros start = to_micros(slot.start);
        schedule(start, [this, attacker, start] { launch_burst(attacker, start); });
      }
    }
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      clock_.advance_to(ev.time);
      ev.action();
    }
    std::stable_sort(out_.attack_log.begin(), out_.attack_log.end(),
                     [](const AttackEvent& a, const AttackEvent& b) { return a.start < b.start; });
    return std::move(out_);
  }

 private:
  struct Event {
    Micros time;
    std::uint64_t seq;
    std::function<void()> action;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void schedule(Micros t, std::function<void()> action) { queue_.push({t, seq_++, std::move(action)}); }

  std::size_t endpoint_index(Ipv4 ip) const {
    for (std::size_t i = 0; i < cfg_.endpoints.size(); ++i) {
      if (cfg_.endpoints[i].ip == ip) return i;
    }
    throw ConfigError("unknown endpoint " + ip.to_string());
  }

  // A request is only sent when its response also lands inside the capture.
  bool fits(Micros t) const { return t + latency_ <= duration_; }

  void emit(std::size_t from, std::size_t to, const coap::Message& msg) {
    FrameOptions opts;
    opts.ip_id = ip_ids_[from]++;
    out_.packets.push_back(frame_packet(msg, cfg_.endpoints[from], cfg_.endpoints[to], clock_.now(), opts));
  }

  void send_request(std::size_t client, coap::Message msg) {
    emit(client, server_, msg);
    schedule(clock_.now() + latency_, [this, client, req = std::move(msg)] {
      emit(server_, client, coap::make_response(req, req.code == coap::Code::Get ? kResourceBody : coap::Bytes{}));
    });
  }

  void send_benign(std::size_t client, const BenignAction& action) {
    Rng& rng = rngs_[client];
    coap::Bytes payload;
    if (action.method != coap::Method::Get) payload = random_text(rng, action.payload_len);
    send_request(client, coap::make_request(action.method, std::move(payload), next_mid_[client]++,
                                            random_token(rng), kUriPath));
  }

  void benign_step(std::size_t client) {
    if (!fits(clock_.now())) return;
    const BenignAction action = benign_next_action(rngs_[client], cfg_);
    send_benign(client, action);
    const Micros next = clock_.now() + latency_ + to_micros(action.sleep);
    schedule(next, [this, client] { benign_step(client); });
  }

  void mixed_step(std::size_t attacker) {
    if (!fits(clock_.now())) return;
    const AttackerStep step = mixed_attacker_step(rngs_[attacker], cfg_);
    if (const auto* action = std::get_if<BenignAction>(&step)) {
      send_benign(attacker, *action);
      schedule(clock_.now() + latency_ + to_micros(action->sleep), [this, attacker] { mixed_step(attacker); });
      return;
    }
    const Micros start = clock_.now();
    launch_burst(attacker, start);
    const Micros last = start + (cfg_.attack_burst_count - 1) * spacing_;
    schedule(last + latency_ + to_micros(cfg_.benign_sleep_min), [this, attacker] { mixed_step(attacker); });
  }

  void launch_burst(std::size_t attacker, Micros start) {
    auto burst = attacker_burst(rngs_[attacker], cfg_, next_mid_[attacker]);
    next_mid_[attacker] = static_cast<std::uint16_t>(next_mid_[attacker] + burst.size());
    AttackEvent event{cfg_.endpoints[attacker].ip, start, start, 0};
    for (std::size_t k = 0; k < burst.size(); ++k) {
      const Micros t = start + static_cast<Micros>(k) * spacing_;
      if (!fits(t)) break;
      event.end = t;
      ++event.packets_sent;
      schedule(t, [this, attacker, msg = std::move(burst[k])]() mutable { send_request(attacker, std::move(msg)); });
    }
    out_.attack_log.push_back(event);
  }

  const ScenarioConfig& cfg_;
  VirtualClock clock_;
  Micros duration_;
  Micros latency_;
  Micros spacing_;
  std::size_t server_ = 0;
  std::vector<std::uint16_t> ip_ids_;
  std::vector<std::uint16_t> next_mid_;
  std::vector<Rng> rngs_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  ScenarioOutput out_;
};

}  // namespace

ScenarioOutput run_scenario(const ScenarioConfig& cfg, ClockPolicy policy) {
  if (cfg.duration == 0) return {};
  cfg.validate();
  return Simulation(cfg, policy).run();
}

}  // namespace coaplab
