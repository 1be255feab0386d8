#include "coaplab/windows.hpp"

#include <fstream>
#include <json.hpp>
#include <map>

#include "coaplab/error.hpp"

namespace coaplab {

std::string_view label_name(Label l) { return l == Label::Malicious ? "malicious" : "benign"; }

std::vector<FlowWindow> split_windows(std::span<const PacketRecord> records, Micros width) {
  if (records.empty()) throw DataError("cannot split an empty capture");
  if (width <= 0) throw DataError("window width must be positive");
  const Micros origin = records.front().ts;
  std::vector<FlowWindow> windows;
  for (const auto& p : records) {
    if (p.ts < origin || (!windows.empty() && p.ts < windows.back().start)) {
      throw DataError("records are not time-ordered");
    }
    const auto index = static_cast<std::size_t>((p.ts - origin) / width);
    while (windows.size() <= index) {
      const std::size_t i = windows.size();
      windows.push_back({i, origin + static_cast<Micros>(i) * width, width, {}});
    }
    windows[index].packets.push_back(p);
  }
  return windows;
}

std::int64_t count_from(const FlowWindow& w, const std::unordered_set<Ipv4>& ips) {
  std::int64_t n = 0;
  for (const auto& p : w.packets) n += ips.contains(p.src_ip) ? 1 : 0;
  return n;
}

Label label_window(const FlowWindow& w, const std::unordered_set<Ipv4>& malicious_ips, std::int64_t threshold) {
  return count_from(w, malicious_ips) > threshold ? Label::Malicious : Label::Benign;
}

std::vector<LabeledWindow> label_dataset(std::span<const PacketRecord> records,
                                         const std::unordered_set<Ipv4>& malicious_ips, Micros width,
                                         std::int64_t threshold) {
  std::vector<LabeledWindow> out;
  for (auto& w : split_windows(records, width)) {
    const Label l = label_window(w, malicious_ips, threshold);
    out.push_back({std::move(w), l});
  }
  return out;
}

std::vector<LabelDisagreement> crosscheck_labels(std::span<const LabeledWindow> labeled, const AttackLogFile& log) {
  std::vector<LabelDisagreement> out;
  if (labeled.empty() && log.events.empty()) return out;

  std::map<std::size_t, Label> count_labels;
  std::map<std::size_t, Micros> starts;
  Micros origin = 0;
  Micros width = kDefaultWindowWidth;
  if (!labeled.empty()) {
    origin = labeled.front().window.start - static_cast<Micros>(labeled.front().window.index) * labeled.front().window.width;
    width = labeled.front().window.width;
  } else {
    origin = log.events.front().start;
  }
  for (const auto& lw : labeled) {
    count_labels[lw.window.index] = lw.label;
    starts[lw.window.index] = lw.window.start;
  }

  std::map<std::size_t, Label> overlap_labels;
  for (const auto& [index, _] : count_labels) overlap_labels[index] = Label::Benign;
  for (const auto& e : log.events) {
    // Windows intersecting the closed interval [start, end].
    const Micros lo = std::max<Micros>(e.start, origin);
    if (e.end < origin) continue;
    const auto first = static_cast<std::size_t>((lo - origin) / width);
    const auto last = static_cast<std::size_t>((e.end - origin) / width);
    for (std::size_t i = first; i <= last; ++i) {
      overlap_labels[i] = Label::Malicious;
      if (!starts.contains(i)) starts[i] = origin + static_cast<Micros>(i) * width;
    }
  }

  for (const auto& [index, overlap] : overlap_labels) {
    const auto it = count_labels.find(index);
    const Label counted = it == count_labels.end() ? Label::Benign : it->second;
    if (counted != overlap) out.push_back({index, starts[index], counted, overlap});
  }
  return out;
}

LabelSummary summarize(std::span<const LabeledWindow> labeled) {
  LabelSummary s;
  s.windows = labeled.size();
  for (const auto& lw : labeled) (lw.label == Label::Malicious ? s.malicious : s.benign)++;
  return s;
}

void write_windows_ndjson(std::span<const LabeledWindow> labeled, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CaptureError("cannot write " + path.string());
  for (const auto& lw : labeled) {
    nlohmann::json row = {{"window_index", lw.window.index},
                          {"start_us", lw.window.start},
                          {"label", label_name(lw.label)},
                          {"packet_count", lw.window.packets.size()}};
    out << row.dump() << '\n';
  }
  const LabelSummary s = summarize(labeled);
  out << nlohmann::json{{"summary", {{"windows", s.windows}, {"malicious", s.malicious}, {"benign", s.benign}}}}.dump()
      << '\n';
}

std::unordered_set<Ipv4> malicious_ips_from_log(const AttackLogFile& log) {
  std::unordered_set<Ipv4> ips;
  for (const auto& e : log.events) ips.insert(e.attacker_ip);
  return ips;
}

}  // namespace coaplab
