#include <doctest.h>

#include <filesystem>
#include <unordered_set>

#include <json.hpp>

#include "coaplab/capture.hpp"
#include "coaplab/error.hpp"
#include "coaplab/random.hpp"
#include "coaplab/traffic.hpp"

using namespace coaplab;
namespace fs = std::filesystem;

namespace {

// Straightforward RFC 1071 reference: 32-bit accumulate of big-endian words, fold, invert.
std::uint16_t reference_checksum(const std::vector<std::uint8_t>& bytes) {
  std::uint32_t sum = 0;
  for (std::size_t i = 0; i < bytes.size(); i += 2) {
    const std::uint32_t hi = bytes[i];
    const std::uint32_t lo = i + 1 < bytes.size() ? bytes[i + 1] : 0;
    sum += (hi << 8) | lo;
  }
  while (sum > 0xFFFF) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(~sum & 0xFFFF);
}

// UDP checksum over pseudo-header + UDP header (checksum zeroed) + payload, from the wire bytes.
std::uint16_t reference_udp_checksum(const Bytes& frame) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), frame.begin() + 26, frame.begin() + 34);  // src + dst IP
  buf.push_back(0);
  buf.push_back(frame[23]);                                        // protocol
  buf.insert(buf.end(), frame.begin() + 38, frame.begin() + 40);  // UDP length
  std::vector<std::uint8_t> udp(frame.begin() + 34, frame.end());
  udp[6] = udp[7] = 0;
  buf.insert(buf.end(), udp.begin(), udp.end());
  const std::uint16_t c = reference_checksum(buf);
  return c == 0 ? 0xFFFF : c;
}

EndpointConfig endpoint(const char* ip, std::uint16_t port, std::size_t index) {
  return {Role::Benign, Ipv4::parse(ip), port, mac_for_index(index)};
}

fs::path temp_path(const std::string& name) { return fs::temp_directory_path() / ("coaplab_test_" + name); }

std::vector<PacketRecord> sample_records(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PacketRecord> out;
  const auto a = endpoint("192.168.1.2", 50002, 0);
  const auto b = endpoint("192.168.1.9", 8080, 1);
  Micros ts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    coap::Bytes payload(rng.uniform_int(1, 600));
    for (auto& c : payload) c = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    const auto msg = coap::make_request(coap::Method::Post, payload, static_cast<std::uint16_t>(i));
    ts += rng.uniform_int(0, 3'000'000);
    out.push_back(frame_packet(msg, a, b, ts, {static_cast<std::uint16_t>(rng.uniform_int(0, 65535))}));
  }
  return out;
}

}  // namespace

TEST_CASE("IP header checksum of a zero-field header matches the hand sum") {
  PacketRecord p;
  p.ip_len = 28;
  p.ip_ttl = 64;
  p.ip_flags = 0;
  // 0x4500 + 0x001C + 0x4011 = 0x852D, inverted 0x7AD2
  CHECK(ipv4_header_checksum(p) == 0x7AD2);
}

TEST_CASE("framed packets carry consistent lengths and checksums") {
  const auto src = endpoint("192.168.1.12", 50012, 1);
  const auto dst = endpoint("192.168.1.9", 8080, 0);

  SUBCASE("attack-size PUT") {
    const auto msg = coap::make_request(coap::Method::Put, coap::Bytes(9203, 'z'), 5);
    const PacketRecord p = frame_packet(msg, src, dst, 1000);
    CHECK(p.ip_len == 20 + 8 + (4 + 1 + 9203));
    CHECK(p.ip_len == 9236);
    CHECK(p.udp_len == 8 + p.payload.size());
    CHECK(verify_checksums(p));
  }

  SUBCASE("checksums agree with the reference over the wire bytes") {
    for (const auto& p : sample_records(200, 5)) {
      const Bytes frame = serialize_frame(p);
      const std::vector<std::uint8_t> ip_header(frame.begin() + 14, frame.begin() + 34);
      CHECK(reference_checksum(ip_header) == 0);  // a valid header sums to 0xFFFF
      std::vector<std::uint8_t> zeroed = ip_header;
      zeroed[10] = zeroed[11] = 0;
      CHECK(reference_checksum(zeroed) == p.ip_chksum);
      CHECK(reference_udp_checksum(frame) == p.udp_chksum);
      CHECK(verify_checksums(p));
    }
  }

  SUBCASE("oversize datagram is rejected") {
    CHECK_THROWS_AS(frame_payload(Bytes(65508, 0), src, dst, 0), CaptureError);
    CHECK_NOTHROW(frame_payload(Bytes(65507, 0), src, dst, 0));
  }
}

TEST_CASE("any single-byte payload mutation breaks the UDP checksum") {
  const auto records = sample_records(20, 9);
  Rng rng(1);
  for (const auto& original : records) {
    for (std::size_t i = 0; i < original.payload.size(); ++i) {
      PacketRecord p = original;
      p.payload[i] ^= static_cast<std::uint8_t>(rng.uniform_int(1, 255));
      CHECK_FALSE(verify_checksums(p));
    }
  }
}

TEST_CASE("frame serialization round trip") {
  for (const auto& p : sample_records(50, 3)) {
    CHECK(parse_frame(serialize_frame(p), p.ts) == p);
  }
  CHECK_THROWS_AS(parse_frame(Bytes(10, 0), 0), CaptureError);
}

TEST_CASE("pcap layout") {
  SUBCASE("empty capture is a bare 24-byte global header") {
    const Bytes b = pcap_bytes({});
    REQUIRE(b.size() == 24);
    const Bytes expected{0xd4, 0xc3, 0xb2, 0xa1, 2, 0, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0xff, 0xff, 0, 0, 1, 0, 0, 0};
    CHECK(b == expected);
  }
  SUBCASE("record header fields") {
    auto recs = sample_records(1, 4);
    recs[0].ts = 3'000'123;
    const Bytes b = pcap_bytes(recs);
    const std::size_t frame_len = serialize_frame(recs[0]).size();
    REQUIRE(b.size() == 24 + 16 + frame_len);
    auto le32 = [&](std::size_t at) {
      return std::uint32_t{b[at]} | std::uint32_t{b[at + 1]} << 8 | std::uint32_t{b[at + 2]} << 16 |
             std::uint32_t{b[at + 3]} << 24;
    };
    CHECK(le32(24) == 3);
    CHECK(le32(28) == 123);
    CHECK(le32(32) == frame_len);
    CHECK(le32(36) == frame_len);
  }
}

TEST_CASE("pcap file round trip is byte-identical") {
  const auto records = sample_records(100, 11);
  const auto first = temp_path("a.pcap");
  const auto second = temp_path("b.pcap");
  write_pcap(records, first);
  const auto back = read_pcap(first);
  CHECK(back == records);
  write_pcap(back, second);
  CHECK(read_binary_file(first) == read_binary_file(second));
  fs::remove(first);
  fs::remove(second);
}

TEST_CASE("pcap reader rejects corrupt input") {
  Bytes good = pcap_bytes(sample_records(2, 1));
  SUBCASE("bad magic") {
    good[0] = 0;
    CHECK_THROWS_AS(parse_pcap(good), CaptureError);
  }
  SUBCASE("unsupported linktype") {
    good[20] = 101;
    CHECK_THROWS_AS(parse_pcap(good), CaptureError);
  }
  SUBCASE("truncated record") {
    good.resize(good.size() - 5);
    CHECK_THROWS_AS(parse_pcap(good), CaptureError);
  }
  SUBCASE("truncated global header") { CHECK_THROWS_AS(parse_pcap(Bytes(10, 0)), CaptureError); }
  SUBCASE("writer refuses unordered records") {
    auto recs = sample_records(2, 1);
    std::swap(recs[0], recs[1]);
    recs[0].ts = recs[1].ts + 1;
    CHECK_THROWS_AS(write_pcap(recs, temp_path("bad.pcap")), CaptureError);
  }
}

TEST_CASE("attack log JSON") {
  SUBCASE("empty") {
    CHECK(nlohmann::json::parse(attack_log_json({})) == nlohmann::json::parse(R"({"schema_version":1,"events":[]})"));
  }
  SUBCASE("round trip through a file") {
    const std::vector<AttackEvent> events{{Ipv4::parse("192.168.1.12"), 0, 299'000, 300},
                                          {Ipv4::parse("192.168.1.5"), 600'000'000, 600'299'000, 300}};
    const auto path = temp_path("attacks.json");
    write_attack_log(events, path);
    const AttackLogFile log = read_attack_log(path);
    CHECK(log.schema_version == 1);
    CHECK(log.events == events);
    fs::remove(path);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_attack_log("{not json"), CaptureError);
    CHECK_THROWS_AS(parse_attack_log(R"({"schema_version":2,"events":[]})"), CaptureError);
    CHECK_THROWS_AS(parse_attack_log(R"({"schema_version":1})"), CaptureError);
  }
  SUBCASE("a 30-minute default run logs 6 events") {
    ScenarioConfig cfg;
    cfg.duration = 1800;
    const auto out = run_scenario(cfg);
    const auto path = temp_path("attacks30.json");
    write_attack_log(out.attack_log, path);
    CHECK(read_attack_log(path).events.size() == 2 * (1800 / 600));
    fs::remove(path);
  }
}

TEST_CASE("dataset statistics") {
  SUBCASE("published counts") {
    const auto s = dataset_stats(661'304, 138'011 + 123'012);
    CHECK(s.attack_requests == 261'023);
    CHECK(std::abs(s.attack_fraction * 100 - 39.47) <= 0.01);
  }
  SUBCASE("record-based counting") {
    const auto recs = sample_records(10, 2);
    const std::unordered_set<Ipv4> all{recs[0].src_ip};
    CHECK(dataset_stats(recs, all).attack_fraction == 1.0);
    CHECK(dataset_stats(recs, {}).attack_fraction == 0.0);
    CHECK_THROWS_AS(dataset_stats(std::span<const PacketRecord>{}, all), DataError);
  }
  SUBCASE("monotone in attack count") {
    double last = -1;
    for (std::int64_t a = 0; a <= 100; ++a) {
      const double f = dataset_stats(100, a).attack_fraction;
      CHECK(f >= last);
      last = f;
    }
  }
}
