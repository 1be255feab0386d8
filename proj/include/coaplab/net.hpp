#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace coaplab {

/// IPv4 address held in host byte order.
class Ipv4 {
 public:
  constexpr Ipv4() = default;
  constexpr explicit Ipv4(std::uint32_t value) : value_(value) {}
  constexpr Ipv4(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d)
      : value_((std::uint32_t{a} << 24) | (std::uint32_t{b} << 16) | (std::uint32_t{c} << 8) | d) {}

  /// Parses dotted-quad notation; throws ConfigError on malformed input.
  static Ipv4 parse(std::string_view text);

  constexpr std::uint32_t value() const { return value_; }
  std::string to_string() const;

  auto operator<=>(const Ipv4&) const = default;

 private:
  std::uint32_t value_ = 0;
};

using MacAddress = std::array<std::uint8_t, 6>;

std::string mac_to_string(const MacAddress& mac);

enum class Role { Server, Benign, Attacker };

struct EndpointConfig {
  Role role = Role::Benign;
  Ipv4 ip;
  std::uint16_t port = 0;
  MacAddress mac{};

  bool operator==(const EndpointConfig&) const = default;
};

/// Locally administered MAC derived from the endpoint's position in a scenario.
constexpr MacAddress mac_for_index(std::size_t index) {
  return {0x02, 0x00, 0x00, 0x00, static_cast<std::uint8_t>((index >> 8) & 0xFF),
          static_cast<std::uint8_t>((index + 1) & 0xFF)};
}

std::string_view role_name(Role r);
Role parse_role(std::string_view text);

}  // namespace coaplab

template <>
struct std::hash<coaplab::Ipv4> {
  std::size_t operator()(const coaplab::Ipv4& ip) const noexcept { return std::hash<std::uint32_t>{}(ip.value()); }
};
