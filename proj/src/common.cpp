#include <charconv>
#include <cstdio>
#include <stdexcept>

#include "coaplab/error.hpp"
#include "coaplab/matrix.hpp"
#include "coaplab/net.hpp"

namespace coaplab {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw std::invalid_argument("matrix data size mismatch");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw std::invalid_argument("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  if (values.size() != cols_) throw std::invalid_argument("row width mismatch");
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

Ipv4 Ipv4::parse(std::string_view text) {
  std::uint32_t value = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  for (int octet = 0; octet < 4; ++octet) {
    unsigned part = 0;
    auto [next, ec] = std::from_chars(p, end, part);
    if (ec != std::errc{} || part > 255 || next == p) throw ConfigError("malformed IPv4 address: " + std::string(text));
    value = (value << 8) | part;
    p = next;
    if (octet < 3) {
      if (p == end || *p != '.') throw ConfigError("malformed IPv4 address: " + std::string(text));
      ++p;
    }
  }
  if (p != end) throw ConfigError("malformed IPv4 address: " + std::string(text));
  return Ipv4(value);
}

std::string Ipv4::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", value_ >> 24, (value_ >> 16) & 0xFF, (value_ >> 8) & 0xFF,
                value_ & 0xFF);
  return buf;
}

std::string mac_to_string(const MacAddress& mac) {
  char buf[18];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", mac[0], mac[1], mac[2], mac[3], mac[4], mac[5]);
  return buf;
}

}  // namespace coaplab

namespace coaplab {

std::string_view role_name(Role r) {
  switch (r) {
    case Role::Server:
      return "server";
    case Role::Benign:
      return "benign";
    case Role::Attacker:
      return "attacker";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  if (text == "server") return Role::Server;
  if (text == "benign") return Role::Benign;
  if (text == "attacker") return Role::Attacker;
  throw ConfigError("unknown endpoint role: " + std::string(text));
}

}  // namespace coaplab
