#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <unordered_set>
#include <vector>

#include "coaplab/capture.hpp"

namespace coaplab {

inline constexpr Micros kDefaultWindowWidth = 10 * 1'000'000;
inline constexpr std::int64_t kDefaultMaliciousThreshold = 350;

struct FlowWindow {
  std::size_t index = 0;
  Micros start = 0;
  Micros width = kDefaultWindowWidth;
  std::vector<PacketRecord> packets;
};

enum class Label : int { Benign = 0, Malicious = 1 };

std::string_view label_name(Label l);

struct LabeledWindow {
  FlowWindow window;
  Label label = Label::Benign;
};

/// Half-open windows anchored at the first timestamp; interior empty windows are kept, trailing ones are not.
std::vector<FlowWindow> split_windows(std::span<const PacketRecord> records, Micros width = kDefaultWindowWidth);

std::int64_t count_from(const FlowWindow& w, const std::unordered_set<Ipv4>& ips);

/// Malicious iff strictly more than `threshold` packets come from `malicious_ips`.
Label label_window(const FlowWindow& w, const std::unordered_set<Ipv4>& malicious_ips,
                   std::int64_t threshold = kDefaultMaliciousThreshold);

std::vector<LabeledWindow> label_dataset(std::span<const PacketRecord> records,
                                         const std::unordered_set<Ipv4>& malicious_ips,
                                         Micros width = kDefaultWindowWidth,
                                         std::int64_t threshold = kDefaultMaliciousThreshold);

struct LabelDisagreement {
  std::size_t window_index = 0;
  Micros window_start = 0;
  Label count_label = Label::Benign;
  Label overlap_label = Label::Benign;
  bool operator==(const LabelDisagreement&) const = default;
};

/// Compares the count rule with "overlaps an attack interval"; windows an event falls in but that
/// were never materialised (no packets at all) are reported with count_label Benign.
std::vector<LabelDisagreement> crosscheck_labels(std::span<const LabeledWindow> labeled, const AttackLogFile& log);

struct LabelSummary {
  std::size_t windows = 0;
  std::size_t malicious = 0;
  std::size_t benign = 0;
};

LabelSummary summarize(std::span<const LabeledWindow> labeled);

/// One {window_index, start_us, label, packet_count} object per line, then a summary line.
void write_windows_ndjson(std::span<const LabeledWindow> labeled, const std::filesystem::path& path);

std::unordered_set<Ipv4> malicious_ips_from_log(const AttackLogFile& log);

}  // namespace coaplab
