#include "coaplab/capture.hpp"

#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "coaplab/error.hpp"

namespace coaplab {
namespace {

using json = nlohmann::json;

void put_be16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_be32(Bytes& out, std::uint32_t v) {
  put_be16(out, static_cast<std::uint16_t>(v >> 16));
  put_be16(out, static_cast<std::uint16_t>(v & 0xFFFF));
}

void put_le32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

void put_le16(Bytes& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

std::uint16_t get_be16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

std::uint32_t get_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{get_be16(b, at)} << 16) | get_be16(b, at + 2);
}

std::uint32_t get_le32(std::span<const std::uint8_t> b, std::size_t at) {
  return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
         (std::uint32_t{b[at + 3]} << 24);
}

std::uint16_t get_le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

Bytes ip_header_bytes(const PacketRecord& p, std::uint16_t checksum) {
  Bytes h;
  h.reserve(kIpv4HeaderLen);
  h.push_back(static_cast<std::uint8_t>((p.ip_version << 4) | 5));
  h.push_back(p.ip_tos);
  put_be16(h, p.ip_len);
  put_be16(h, p.ip_id);
  put_be16(h, static_cast<std::uint16_t>(p.ip_flags << 13));
  h.push_back(p.ip_ttl);
  h.push_back(p.ip_proto);
  put_be16(h, checksum);
  put_be32(h, p.src_ip.value());
  put_be32(h, p.dst_ip.value());
  return h;
}

std::uint32_t udp_pseudo_sum(const PacketRecord& p) {
  std::uint32_t sum = 0;
  sum += p.src_ip.value() >> 16;
  sum += p.src_ip.value() & 0xFFFF;
  sum += p.dst_ip.value() >> 16;
  sum += p.dst_ip.value() & 0xFFFF;
  sum += p.ip_proto;
  sum += p.udp_len;
  sum += p.src_port;
  sum += p.dst_port;
  sum += p.udp_len;
  return sum;
}

}  // namespace

std::uint16_t ones_complement_sum(std::span<const std::uint8_t> data, std::uint32_t initial) {
  std::uint64_t sum = initial;
  std::size_t i = 0;
  for (; i + 1 < data.size(); i += 2) sum += (std::uint32_t{data[i]} << 8) | data[i + 1];
  if (i < data.size()) sum += std::uint32_t{data[i]} << 8;
  while (sum >> 16) sum = (sum & 0xFFFF) + (sum >> 16);
  return static_cast<std::uint16_t>(sum);
}

std::uint16_t ipv4_header_checksum(const PacketRecord& p) {
  const Bytes header = ip_header_bytes(p, 0);
  return static_cast<std::uint16_t>(~ones_complement_sum(header));
}

std::uint16_t udp_checksum(const PacketRecord& p) {
  const auto sum = static_cast<std::uint16_t>(~ones_complement_sum(p.payload, udp_pseudo_sum(p)));
  return sum == 0 ? 0xFFFF : sum;
}

bool verify_checksums(const PacketRecord& p) {
  if (ones_complement_sum(ip_header_bytes(p, p.ip_chksum)) != 0xFFFF) return false;
  if (p.udp_chksum == 0) return true;  // checksum not computed by sender
  return ones_complement_sum(p.payload, udp_pseudo_sum(p) + p.udp_chksum) == 0xFFFF;
}

PacketRecord frame_payload(Bytes payload, const EndpointConfig& src, const EndpointConfig& dst, Micros ts,
                           const FrameOptions& opts) {
  if (payload.size() > kMaxUdpPayload) throw CaptureError("datagram exceeds 65507 bytes");
  if (ts < 0) throw CaptureError("negative timestamp");
  PacketRecord p;
  p.ts = ts;
  p.eth_src = src.mac;
  p.eth_dst = dst.mac;
  p.ip_tos = opts.ip_tos;
  p.ip_id = opts.ip_id;
  p.ip_flags = opts.ip_flags;
  p.ip_ttl = opts.ip_ttl;
  p.src_ip = src.ip;
  p.dst_ip = dst.ip;
  p.src_port = src.port;
  p.dst_port = dst.port;
  p.udp_len = static_cast<std::uint16_t>(kUdpHeaderLen + payload.size());
  p.ip_len = static_cast<std::uint16_t>(kIpv4HeaderLen + kUdpHeaderLen + payload.size());
  p.payload = std::move(payload);
  p.ip_chksum = ipv4_header_checksum(p);
  p.udp_chksum = udp_checksum(p);
  return p;
}

PacketRecord frame_packet(const coap::Message& msg, const EndpointConfig& src, const EndpointConfig& dst, Micros ts,
                          const FrameOptions& opts) {
  if (coap::encoded_size(msg) > kMaxUdpPayload) throw CaptureError("CoAP message does not fit one datagram");
  return frame_payload(coap::encode(msg), src, dst, ts, opts);
}

Bytes serialize_frame(const PacketRecord& p) {
  Bytes out;
  out.reserve(kEthernetHeaderLen + kIpv4HeaderLen + kUdpHeaderLen + p.payload.size());
  out.insert(out.end(), p.eth_dst.begin(), p.eth_dst.end());
  out.insert(out.end(), p.eth_src.begin(), p.eth_src.end());
  put_be16(out, p.eth_type);
  const Bytes ip = ip_header_bytes(p, p.ip_chksum);
  out.insert(out.end(), ip.begin(), ip.end());
  put_be16(out, p.src_port);
  put_be16(out, p.dst_port);
  put_be16(out, p.udp_len);
  put_be16(out, p.udp_chksum);
  out.insert(out.end(), p.payload.begin(), p.payload.end());
  return out;
}

PacketRecord parse_frame(std::span<const std::uint8_t> frame, Micros ts) {
  constexpr std::size_t headers = kEthernetHeaderLen + kIpv4HeaderLen + kUdpHeaderLen;
  if (frame.size() < headers) throw CaptureError("frame shorter than Ethernet/IPv4/UDP headers");
  PacketRecord p;
  p.ts = ts;
  std::copy_n(frame.begin(), 6, p.eth_dst.begin());
  std::copy_n(frame.begin() + 6, 6, p.eth_src.begin());
  p.eth_type = get_be16(frame, 12);
  if (p.eth_type != kEtherTypeIpv4) throw CaptureError("not an IPv4 frame");
  const auto ip = frame.subspan(kEthernetHeaderLen);
  p.ip_version = ip[0] >> 4;
  if (p.ip_version != 4 || (ip[0] & 0x0F) != 5) throw CaptureError("unsupported IPv4 header (version or options)");
  p.ip_tos = ip[1];
  p.ip_len = get_be16(ip, 2);
  p.ip_id = get_be16(ip, 4);
  const std::uint16_t flags_frag = get_be16(ip, 6);
  if ((flags_frag & 0x1FFF) != 0) throw CaptureError("fragmented datagrams are not supported");
  p.ip_flags = static_cast<std::uint8_t>(flags_frag >> 13);
  p.ip_ttl = ip[8];
  p.ip_proto = ip[9];
  if (p.ip_proto != kIpProtoUdp) throw CaptureError("not a UDP datagram");
  p.ip_chksum = get_be16(ip, 10);
  p.src_ip = Ipv4(get_be32(ip, 12));
  p.dst_ip = Ipv4(get_be32(ip, 16));
  const auto udp = ip.subspan(kIpv4HeaderLen);
  p.src_port = get_be16(udp, 0);
  p.dst_port = get_be16(udp, 2);
  p.udp_len = get_be16(udp, 4);
  p.udp_chksum = get_be16(udp, 6);
  if (p.udp_len < kUdpHeaderLen || udp.size() < p.udp_len) throw CaptureError("truncated UDP datagram");
  if (p.ip_len != kIpv4HeaderLen + p.udp_len) throw CaptureError("IP and UDP lengths disagree");
  p.payload.assign(udp.begin() + kUdpHeaderLen, udp.begin() + p.udp_len);
  return p;
}

Bytes pcap_bytes(std::span<const PacketRecord> records) {
  Bytes out;
  put_le32(out, kPcapMagic);
  put_le16(out, 2);
  put_le16(out, 4);
  put_le32(out, 0);  // thiszone
  put_le32(out, 0);  // sigfigs
  put_le32(out, kPcapSnaplen);
  put_le32(out, kLinktypeEthernet);
  Micros previous = 0;
  for (const auto& p : records) {
    if (p.ts < previous) throw CaptureError("records are not time-ordered");
    previous = p.ts;
    const Bytes frame = serialize_frame(p);
    put_le32(out, static_cast<std::uint32_t>(p.ts / 1'000'000));
    put_le32(out, static_cast<std::uint32_t>(p.ts % 1'000'000));
    put_le32(out, static_cast<std::uint32_t>(frame.size()));
    put_le32(out, static_cast<std::uint32_t>(frame.size()));
    out.insert(out.end(), frame.begin(), frame.end());
  }
  return out;
}

std::vector<PacketRecord> parse_pcap(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 24) throw CaptureError("truncated pcap global header");
  if (get_le32(bytes, 0) != kPcapMagic) throw CaptureError("bad pcap magic");
  if (get_le16(bytes, 4) != 2 || get_le16(bytes, 6) != 4) throw CaptureError("unsupported pcap version");
  if (get_le32(bytes, 20) != kLinktypeEthernet) throw CaptureError("unsupported linktype");
  std::vector<PacketRecord> records;
  std::size_t pos = 24;
  while (pos < bytes.size()) {
    if (pos + 16 > bytes.size()) throw CaptureError("truncated pcap record header");
    const std::uint32_t sec = get_le32(bytes, pos);
    const std::uint32_t usec = get_le32(bytes, pos + 4);
    const std::uint32_t incl = get_le32(bytes, pos + 8);
    const std::uint32_t orig = get_le32(bytes, pos + 12);
    pos += 16;
    if (usec >= 1'000'000) throw CaptureError("pcap record has invalid microseconds");
    if (incl != orig) throw CaptureError("truncated capture (incl_len < orig_len)");
    if (pos + incl > bytes.size()) throw CaptureError("truncated pcap record");
    const Micros ts = static_cast<Micros>(sec) * 1'000'000 + usec;
    records.push_back(parse_frame(bytes.subspan(pos, incl), ts));
    pos += incl;
  }
  return records;
}

void write_pcap(std::span<const PacketRecord> records, const std::filesystem::path& path) {
  write_binary_file(path, pcap_bytes(records));
}

std::vector<PacketRecord> read_pcap(const std::filesystem::path& path) { return parse_pcap(read_binary_file(path)); }

std::string attack_log_json(std::span<const AttackEvent> events) {
  json doc;
  doc["schema_version"] = kAttackLogSchema;
  doc["events"] = json::array();
  Micros previous = INT64_MIN;
  for (const auto& e : events) {
    if (e.start < previous) throw CaptureError("attack events are not sorted by start");
    previous = e.start;
    doc["events"].push_back({{"attacker_ip", e.attacker_ip.to_string()},
                             {"start_us", e.start},
                             {"end_us", e.end},
                             {"packets_sent", e.packets_sent}});
  }
  return doc.dump();
}

AttackLogFile parse_attack_log(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CaptureError(std::string("malformed attack log: ") + e.what());
  }
  try {
    AttackLogFile log;
    log.schema_version = doc.at("schema_version").get<int>();
    if (log.schema_version != kAttackLogSchema) {
      throw CaptureError("unknown attack log schema_version " + std::to_string(log.schema_version));
    }
    for (const auto& e : doc.at("events")) {
      log.events.push_back({Ipv4::parse(e.at("attacker_ip").get<std::string>()), e.at("start_us").get<Micros>(),
                            e.at("end_us").get<Micros>(), e.at("packets_sent").get<std::int64_t>()});
    }
    return log;
  } catch (const json::exception& e) {
    throw CaptureError(std::string("malformed attack log: ") + e.what());
  }
}

void write_attack_log(std::span<const AttackEvent> events, const std::filesystem::path& path) {
  write_text_file(path, attack_log_json(events) + "\n");
}

AttackLogFile read_attack_log(const std::filesystem::path& path) { return parse_attack_log(read_text_file(path)); }

DatasetStats dataset_stats(std::int64_t total, std::int64_t attack_requests) {
  if (total <= 0) throw DataError("attack fraction undefined for an empty capture");
  if (attack_requests < 0 || attack_requests > total) throw DataError("attack count outside [0, total]");
  return {total, attack_requests, static_cast<double>(attack_requests) / static_cast<double>(total)};
}

DatasetStats dataset_stats(std::span<const PacketRecord> records, const std::unordered_set<Ipv4>& malicious_ips) {
  std::int64_t attack = 0;
  for (const auto& p : records) attack += malicious_ips.contains(p.src_ip) ? 1 : 0;
  return dataset_stats(static_cast<std::int64_t>(records.size()), attack);
}

void write_packets_ndjson(std::span<const PacketRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CaptureError("cannot open " + path.string());
  for (const auto& p : records) {
    json row = {{"ts_us", p.ts},
                {"eth_src", mac_to_string(p.eth_src)},
                {"eth_dst", mac_to_string(p.eth_dst)},
                {"eth_type", p.eth_type},
                {"ip_version", p.ip_version},
                {"ip_tos", p.ip_tos},
                {"ip_len", p.ip_len},
                {"ip_id", p.ip_id},
                {"ip_flags", p.ip_flags},
                {"ip_ttl", p.ip_ttl},
                {"ip_proto", p.ip_proto},
                {"ip_chksum", p.ip_chksum},
                {"src_ip", p.src_ip.to_string()},
                {"dst_ip", p.dst_ip.to_string()},
                {"src_port", p.src_port},
                {"dst_port", p.dst_port},
                {"udp_len", p.udp_len},
                {"udp_chksum", p.udp_chksum},
                {"payload_len", p.payload.size()}};
    out << row.dump() << '\n';
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CaptureError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Bytes read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CaptureError("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_binary_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CaptureError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CaptureError("write failed for " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CaptureError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw CaptureError("write failed for " + path.string());
}

}  // namespace coaplab
