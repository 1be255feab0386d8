#include "coaplab/features.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "coaplab/coap.hpp"
#include "coaplab/error.hpp"

namespace coaplab {
namespace {

using C = ColumnKind;

std::vector<Column> canonical_columns() {
  return {
      {"eth.dst", C::Categorical, "destination MAC"},
      {"eth.src", C::Categorical, "source MAC"},
      {"eth.type", C::Numeric, "ethernet type"},
      {"ip.version", C::Numeric, "IP version"},
      {"ip.ihl", C::Numeric, "IP header length"},
      {"ip.tos", C::Numeric, "tos"},
      {"ip.len", C::Numeric, "length"},
      {"ip.id", C::Numeric, "id"},
      {"ip.flags", C::Categorical, "flags"},
      {"ip.frag", C::Numeric, "fragment offset"},
      {"ip.ttl", C::Numeric, "ttl"},
      {"ip.proto", C::Numeric, "protocol"},
      {"ip.chksum", C::Numeric, "IP chksum"},
      {"ip.src", C::Categorical, "source address"},
      {"ip.dst", C::Categorical, "destination address"},
      {"tcp.sport", C::Numeric, "TCP source port"},
      {"tcp.dport", C::Numeric, "TCP destination port"},
      {"tcp.seq", C::Numeric, "seq"},
      {"tcp.ack", C::Numeric, "ack"},
      {"tcp.dataofs", C::Numeric, "dataofs"},
      {"tcp.reserved", C::Numeric, "reserved"},
      {"tcp.flags", C::Categorical, "flags"},
      {"tcp.window", C::Numeric, "window"},
      {"tcp.chksum", C::Numeric, "TCP chksum"},
      {"tcp.urgptr", C::Numeric, "urgptr"},
      {"udp.sport", C::Numeric, "source port"},
      {"udp.dport", C::Numeric, "destination port"},
      {"udp.len", C::Numeric, "UDP length"},
      {"udp.chksum", C::Numeric, "UDP chksum"},
      {"coap.version", C::Numeric, "CoAP version"},
      {"coap.type", C::Categorical, "CoAP message type"},
      {"coap.tkl", C::Numeric, "CoAP token length"},
      {"coap.code", C::Categorical, "CoAP code"},
      {"coap.mid", C::Numeric, "CoAP message id"},
      {"coap.token", C::Categorical, "CoAP token"},
      {"coap.option_count", C::Numeric, "CoAP option count"},
      {"coap.uri_path", C::Categorical, "CoAP Uri-Path"},
      {"coap.payload_len", C::Numeric, "CoAP payload length"},
      {"coap.code_class", C::Numeric, "CoAP code class"},
      {"coap.code_detail", C::Numeric, "CoAP code detail"},
      {"coap.is_request", C::Numeric, "CoAP request flag"},
      {"coap.payload_marker", C::Numeric, "CoAP payload marker present"},
  };
}

std::string ip_flags_text(std::uint8_t flags) {
  std::string out;
  if (flags & 0x2) out += "DF";
  if (flags & 0x1) out += out.empty() ? "MF" : "+MF";
  if (flags & 0x4) out += out.empty() ? "evil" : "+evil";
  return out;
}

std::string hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  char buf[3];
  for (auto b : bytes) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

void put_le64(std::ofstream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[at + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

const FeatureSchema& FeatureSchema::canonical() {
  static const FeatureSchema schema(canonical_columns());
  return schema;
}

FeatureSchema::FeatureSchema(std::vector<Column> columns) : columns_(std::move(columns)) {
  if (columns_.size() > 64) throw DataError("schemas wider than 64 columns are not supported");
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    for (std::size_t j = i + 1; j < columns_.size(); ++j) {
      if (columns_[i].name == columns_[j].name) throw DataError("duplicate column name " + columns_[i].name);
    }
  }
}

std::size_t FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  throw DataError("unknown feature column " + std::string(name));
}

RawFeatureRow extract_features(const PacketRecord& p, const FeatureSchema& schema) {
  std::unordered_map<std::string_view, Cell> cells = {
      {"eth.dst", mac_to_string(p.eth_dst)},
      {"eth.src", mac_to_string(p.eth_src)},
      {"eth.type", double(p.eth_type)},
      {"ip.version", double(p.ip_version)},
      {"ip.ihl", 5.0},
      {"ip.tos", double(p.ip_tos)},
      {"ip.len", double(p.ip_len)},
      {"ip.id", double(p.ip_id)},
      {"ip.flags", ip_flags_text(p.ip_flags)},
      {"ip.frag", 0.0},
      {"ip.ttl", double(p.ip_ttl)},
      {"ip.proto", double(p.ip_proto)},
      {"ip.chksum", double(p.ip_chksum)},
      {"ip.src", p.src_ip.to_string()},
      {"ip.dst", p.dst_ip.to_string()},
  };
  if (p.ip_proto == kIpProtoUdp) {
    cells["udp.sport"] = double(p.src_port);
    cells["udp.dport"] = double(p.dst_port);
    cells["udp.len"] = double(p.udp_len);
    cells["udp.chksum"] = double(p.udp_chksum);
    try {
      const coap::Message m = coap::decode(p.payload);
      const auto code = static_cast<std::uint8_t>(m.code);
      cells["coap.version"] = double(m.version);
      cells["coap.type"] = std::string(coap::type_name(m.type));
      cells["coap.tkl"] = double(m.token.size());
      cells["coap.code"] = std::string(coap::code_name(m.code));
      cells["coap.mid"] = double(m.message_id);
      cells["coap.token"] = hex(m.token);
      cells["coap.option_count"] = double(m.options.size());
      for (const auto& opt : m.options) {
        if (opt.number == coap::kOptionUriPath) cells["coap.uri_path"] = std::string(opt.value.begin(), opt.value.end());
      }
      cells["coap.payload_len"] = double(m.payload.size());
      cells["coap.code_class"] = double(code >> 5);
      cells["coap.code_detail"] = double(code & 0x1F);
      cells["coap.is_request"] = coap::is_request(m.code) ? 1.0 : 0.0;
      cells["coap.payload_marker"] = m.payload.empty() ? 0.0 : 1.0;
    } catch (const CodecError&) {
      // Not CoAP; leave the CoAP columns absent.
    }
  }
  RawFeatureRow row;
  row.values.reserve(schema.size());
  for (const auto& col : schema.columns()) {
    const auto it = cells.find(col.name);
    row.values.push_back(it == cells.end() ? Cell{Absent{}} : it->second);
  }
  return row;
}

FeatureMask::FeatureMask(std::size_t width, std::uint64_t bits) : width_(width), bits_(bits) {
  if (width > 64) throw DataError("mask wider than 64 columns");
  if (width < 64 && (bits >> width) != 0) throw DataError("mask has bits beyond its width");
}

FeatureMask FeatureMask::all(std::size_t width) {
  return FeatureMask(width, width == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << width) - 1));
}

FeatureMask FeatureMask::from_indices(std::size_t width, std::span<const std::size_t> indices) {
  FeatureMask m(width);
  for (std::size_t i : indices) m.set(i);
  return m;
}

void FeatureMask::set(std::size_t i, bool on) {
  if (i >= width_) throw DataError("mask index out of range");
  if (on) {
    bits_ |= std::uint64_t{1} << i;
  } else {
    bits_ &= ~(std::uint64_t{1} << i);
  }
}

std::size_t FeatureMask::popcount() const { return static_cast<std::size_t>(std::popcount(bits_)); }

std::vector<std::size_t> FeatureMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < width_; ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

FeatureMask default_mask(const FeatureSchema& schema) {
  static const std::vector<std::string> names = {
      "eth.type",  "ip.version", "ip.tos",      "ip.len",   "ip.id",      "ip.flags",
      "ip.chksum", "udp.sport",  "tcp.seq",     "tcp.ack",  "tcp.dataofs", "tcp.flags",
      "tcp.window", "udp.chksum", "tcp.urgptr", "udp.dport",
  };
  return mask_from_names(names, schema);
}

std::vector<std::string> mask_column_names(const FeatureMask& mask, const FeatureSchema& schema) {
  check_mask_width(mask, schema.size());
  std::vector<std::string> names;
  for (std::size_t i : mask.indices()) names.push_back(schema[i].name);
  return names;
}

FeatureMask mask_from_names(std::span<const std::string> names, const FeatureSchema& schema) {
  FeatureMask m(schema.size());
  for (const auto& n : names) m.set(schema.index_of(n));
  return m;
}

void check_mask_width(const FeatureMask& mask, std::size_t row_width) {
  if (mask.width() != row_width) {
    throw DataError("mask width " + std::to_string(mask.width()) + " does not match row width " +
                    std::to_string(row_width));
  }
}

RawFeatureRow project_selected(const RawFeatureRow& row, const FeatureMask& mask) {
  return {project_selected(std::span<const Cell>(row.values), mask)};
}

TokenVocabulary::TokenVocabulary(const FeatureSchema& schema)
    : values_(schema.size()), lookup_(schema.size()) {
  for (const auto& col : schema.columns()) kinds_.push_back(col.kind);
}

double TokenVocabulary::token(std::size_t column, const std::string& value, VocabMode mode) {
  auto& index = lookup_[column];
  if (const auto it = index.find(value); it != index.end()) return static_cast<double>(it->second + 1);
  if (mode == VocabMode::Frozen) return 0.0;
  values_[column].push_back(value);
  index.emplace(value, values_[column].size() - 1);
  return static_cast<double>(values_[column].size());
}

const std::string* TokenVocabulary::value(std::size_t column, std::size_t token) const {
  if (column >= values_.size() || token == 0 || token > values_[column].size()) return nullptr;
  return &values_[column][token - 1];
}

nlohmann::json TokenVocabulary::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t i = 0; i < kinds_.size(); ++i) {
    doc.push_back({{"kind", kinds_[i] == ColumnKind::Categorical ? "categorical" : "numeric"}, {"values", values_[i]}});
  }
  return doc;
}

TokenVocabulary TokenVocabulary::from_json(const nlohmann::json& doc) {
  TokenVocabulary v;
  for (const auto& col : doc) {
    v.kinds_.push_back(col.at("kind").get<std::string>() == "categorical" ? ColumnKind::Categorical
                                                                           : ColumnKind::Numeric);
    v.values_.push_back(col.at("values").get<std::vector<std::string>>());
    auto& index = v.lookup_.emplace_back();
    for (std::size_t k = 0; k < v.values_.back().size(); ++k) index.emplace(v.values_.back()[k], k);
  }
  return v;
}

std::vector<double> tokenize_row(const RawFeatureRow& row, TokenVocabulary& vocab, VocabMode mode) {
  if (row.values.size() != vocab.width()) throw DataError("row width does not match the vocabulary");
  std::vector<double> out(row.values.size(), 0.0);
  for (std::size_t i = 0; i < row.values.size(); ++i) {
    const Cell& cell = row.values[i];
    if (const auto* s = std::get_if<std::string>(&cell)) {
      if (!vocab.categorical(i)) throw DataError("string value in numeric column");
      out[i] = vocab.token(i, *s, mode);
    } else if (const auto* d = std::get_if<double>(&cell)) {
      out[i] = *d;
    }
  }
  return out;
}

std::vector<std::vector<double>> tokenize(std::span<const RawFeatureRow> rows, TokenVocabulary& vocab, VocabMode mode) {
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(tokenize_row(row, vocab, mode));
  return out;
}

std::vector<RawFeatureRow> detokenize(std::span<const std::vector<double>> rows, const TokenVocabulary& vocab) {
  std::vector<RawFeatureRow> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    RawFeatureRow r;
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (vocab.categorical(i)) {
        const std::string* v = vocab.value(i, static_cast<std::size_t>(row[i]));
        r.values.push_back(v ? Cell{*v} : Cell{Absent{}});
      } else {
        r.values.push_back(row[i]);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t WindowTensor::max_rows() const {
  std::size_t n = 0;
  for (const auto& w : windows) n = std::max(n, w.rows());
  return n;
}

bool WindowTensor::uniform() const {
  for (const auto& w : windows) {
    if (w.rows() != windows.front().rows()) return false;
  }
  return true;
}

WindowTensor pad_windows_to(WindowTensor t, std::span<const double> pad_row, std::size_t rows) {
  if (t.windows.empty()) throw DataError("cannot pad an empty tensor");
  if (rows < t.max_rows()) throw DataError("padding target below the longest window");
  for (auto& w : t.windows) {
    if (w.rows() == 0 && w.cols() == 0) w = Matrix(0, pad_row.size());
    if (w.cols() != pad_row.size()) throw DataError("pad row width does not match window width");
    while (w.rows() < rows) w.append_row(pad_row);
  }
  return t;
}

WindowTensor pad_windows(WindowTensor t, std::span<const double> pad_row) {
  const std::size_t n = t.max_rows();
  return pad_windows_to(std::move(t), pad_row, n);
}

double frobenius_norm(const Matrix& a) {
  double sum = 0.0;
  for (double v : a.data()) sum += std::abs(v) * std::abs(v);
  return std::sqrt(sum);
}

Matrix frobenius_normalize(const Matrix& a) {
  const double norm = frobenius_norm(a);
  if (!(norm > 0) || !std::isfinite(norm)) throw NormalizationError("Frobenius norm is zero or non-finite");
  Matrix out = a;
  for (double& v : out.data()) v /= norm;
  return out;
}

std::vector<double> flatten_window(const Matrix& w) { return {w.data().begin(), w.data().end()}; }

Matrix unflatten_window(std::span<const double> flat, std::size_t cols) {
  if (cols == 0 || flat.size() % cols != 0) throw DataError("flat length is not a multiple of the column count");
  return Matrix(flat.size() / cols, cols, std::vector<double>(flat.begin(), flat.end()));
}

WindowTensor window_features(std::span<const LabeledWindow> windows, TokenVocabulary& vocab, VocabMode mode,
                             const FeatureMask& mask) {
  const FeatureSchema& schema = FeatureSchema::canonical();
  WindowTensor t;
  for (const auto& lw : windows) {
    Matrix m(0, mask.popcount());
    for (const auto& p : lw.window.packets) {
      const std::vector<double> full = tokenize_row(extract_features(p, schema), vocab, mode);
      m.append_row(project_selected(std::span<const double>(full), mask));
    }
    t.windows.push_back(std::move(m));
    t.labels.push_back(static_cast<int>(lw.label));
  }
  return t;
}

FeatureDataset flatten_tensor(const WindowTensor& t) {
  if (!t.uniform()) throw DataError("flattening requires a padded tensor");
  FeatureDataset d;
  if (t.windows.empty()) return d;
  const std::size_t width = t.windows.front().size();
  std::vector<double> data;
  data.reserve(width * t.windows.size());
  for (const auto& w : t.windows) data.insert(data.end(), w.data().begin(), w.data().end());
  d.x = Matrix(t.windows.size(), width, std::move(data));
  d.y = t.labels;
  return d;
}

SequenceDataset as_sequences(const WindowTensor& t) {
  if (!t.uniform()) throw DataError("sequence models require a padded tensor");
  return {t.windows, t.labels};
}

void write_tensor(const WindowTensor& t, const std::filesystem::path& path) {
  if (!t.uniform()) throw DataError("only padded tensors can be exported");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CaptureError("cannot write " + path.string());
  const std::size_t rows = t.windows.empty() ? 0 : t.windows.front().rows();
  const std::size_t cols = t.windows.empty() ? 0 : t.windows.front().cols();
  put_le64(out, t.windows.size());
  put_le64(out, rows);
  put_le64(out, cols);
  for (const auto& w : t.windows) {
    for (double v : w.data()) put_le64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw CaptureError("write failed for " + path.string());
}

WindowTensor read_tensor(const std::filesystem::path& path, std::vector<int> labels) {
  const Bytes bytes = read_binary_file(path);
  if (bytes.size() < 24) throw DataError("truncated tensor header");
  const std::uint64_t count = get_le64(bytes, 0);
  const std::uint64_t rows = get_le64(bytes, 8);
  const std::uint64_t cols = get_le64(bytes, 16);
  if (bytes.size() != 24 + count * rows * cols * 8) throw DataError("tensor size does not match its header");
  if (!labels.empty() && labels.size() != count) throw DataError("label count does not match the tensor");
  WindowTensor t;
  std::size_t pos = 24;
  for (std::uint64_t w = 0; w < count; ++w) {
    std::vector<double> data(rows * cols);
    for (auto& v : data) {
      v = std::bit_cast<double>(get_le64(bytes, pos));
      pos += 8;
    }
    t.windows.emplace_back(rows, cols, std::move(data));
  }
  t.labels = std::move(labels);
  return t;
}

}  // namespace coaplab
