#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "coaplab/coap.hpp"
#include "coaplab/net.hpp"

namespace coaplab {

using Bytes = std::vector<std::uint8_t>;
using Micros = std::int64_t;

inline constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
inline constexpr std::uint8_t kIpProtoUdp = 17;
inline constexpr std::size_t kEthernetHeaderLen = 14;
inline constexpr std::size_t kIpv4HeaderLen = 20;
inline constexpr std::size_t kUdpHeaderLen = 8;
inline constexpr std::size_t kMaxUdpPayload = 65507;

/// One captured Ethernet/IPv4/UDP frame.
struct PacketRecord {
  Micros ts = 0;
  MacAddress eth_src{};
  MacAddress eth_dst{};
  std::uint16_t eth_type = kEtherTypeIpv4;
  std::uint8_t ip_version = 4;
  std::uint8_t ip_tos = 0;
  std::uint16_t ip_len = 0;
  std::uint16_t ip_id = 0;
  std::uint8_t ip_flags = 0;  // 3-bit field: 0x2 = DF, 0x1 = MF
  std::uint8_t ip_ttl = 64;
  std::uint8_t ip_proto = kIpProtoUdp;
  std::uint16_t ip_chksum = 0;
  Ipv4 src_ip;
  Ipv4 dst_ip;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint16_t udp_len = 0;
  std::uint16_t udp_chksum = 0;
  Bytes payload;

  bool operator==(const PacketRecord&) const = default;
};

/// Header fields a sender controls; everything else is derived by frame_packet.
struct FrameOptions {
  std::uint16_t ip_id = 0;
  std::uint8_t ip_ttl = 64;
  std::uint8_t ip_flags = 0x2;
  std::uint8_t ip_tos = 0;
};

/// RFC 1071 ones'-complement sum folded to 16 bits (not inverted).
std::uint16_t ones_complement_sum(std::span<const std::uint8_t> data, std::uint32_t initial = 0);
std::uint16_t ipv4_header_checksum(const PacketRecord& p);
std::uint16_t udp_checksum(const PacketRecord& p);
bool verify_checksums(const PacketRecord& p);

PacketRecord frame_packet(const coap::Message& msg, const EndpointConfig& src, const EndpointConfig& dst, Micros ts,
                          const FrameOptions& opts = {});
PacketRecord frame_payload(Bytes payload, const EndpointConfig& src, const EndpointConfig& dst, Micros ts,
                           const FrameOptions& opts = {});

/// Wire bytes of the Ethernet frame.
Bytes serialize_frame(const PacketRecord& p);
/// Inverse of serialize_frame; throws CaptureError on anything that is not Ethernet/IPv4/UDP.
PacketRecord parse_frame(std::span<const std::uint8_t> frame, Micros ts);

inline constexpr std::uint32_t kPcapMagic = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapSnaplen = 65535;
inline constexpr std::uint32_t kLinktypeEthernet = 1;

Bytes pcap_bytes(std::span<const PacketRecord> records);
std::vector<PacketRecord> parse_pcap(std::span<const std::uint8_t> bytes);
void write_pcap(std::span<const PacketRecord> records, const std::filesystem::path& path);
std::vector<PacketRecord> read_pcap(const std::filesystem::path& path);

struct AttackEvent {
  Ipv4 attacker_ip;
  Micros start = 0;
  Micros end = 0;
  std::int64_t packets_sent = 0;

  bool operator==(const AttackEvent&) const = default;
};

inline constexpr int kAttackLogSchema = 1;

struct AttackLogFile {
  int schema_version = kAttackLogSchema;
  std::vector<AttackEvent> events;

  bool operator==(const AttackLogFile&) const = default;
};

std::string attack_log_json(std::span<const AttackEvent> events);
AttackLogFile parse_attack_log(std::string_view text);
void write_attack_log(std::span<const AttackEvent> events, const std::filesystem::path& path);
AttackLogFile read_attack_log(const std::filesystem::path& path);

struct DatasetStats {
  std::int64_t total = 0;
  std::int64_t attack_requests = 0;
  double attack_fraction = 0.0;
};

DatasetStats dataset_stats(std::span<const PacketRecord> records, const std::unordered_set<Ipv4>& malicious_ips);
/// Same ratio computed from already-known counts.
DatasetStats dataset_stats(std::int64_t total, std::int64_t attack_requests);

/// One JSON object per line; debugging aid.
void write_packets_ndjson(std::span<const PacketRecord> records, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
Bytes read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace coaplab
