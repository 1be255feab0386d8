#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace coaplab::coap {

using Bytes = std::vector<std::uint8_t>;

enum class MessageType : std::uint8_t { Confirmable = 0, NonConfirmable = 1, Ack = 2, Reset = 3 };

/// Code byte values, class << 5 | detail.
enum class Code : std::uint8_t {
  Get = 0x01,
  Post = 0x02,
  Put = 0x03,
  Created = 0x41,  // 2.01
  Changed = 0x44,  // 2.04
  Content = 0x45,  // 2.05
};

enum class Method { Get, Put, Post };

inline constexpr std::uint16_t kOptionUriPath = 11;
inline constexpr std::uint8_t kPayloadMarker = 0xFF;
inline constexpr std::size_t kMaxTokenLength = 8;

struct Option {
  std::uint16_t number = 0;
  Bytes value;
  bool operator==(const Option&) const = default;
};

struct Message {
  std::uint8_t version = 1;
  MessageType type = MessageType::Confirmable;
  Code code = Code::Get;
  std::uint16_t message_id = 0;
  Bytes token;
  std::vector<Option> options;  // kept sorted by option number
  Bytes payload;

  bool operator==(const Message&) const = default;
};

Bytes encode(const Message& msg);
Message decode(std::span<const std::uint8_t> bytes);

/// Confirmable request for `method`; GET requires an empty payload.
Message make_request(Method method, Bytes payload, std::uint16_t message_id, Bytes token = {},
                     std::string_view uri_path = {});

/// Piggybacked ACK answering `request`: 2.05 for GET, 2.04 for PUT, 2.01 for POST.
Message make_response(const Message& request, Bytes payload = {});

Code method_code(Method m);
bool is_request(Code c);
std::string_view code_name(Code c);
std::string_view type_name(MessageType t);

/// Size of encode(msg) without building it.
std::size_t encoded_size(const Message& msg);

}  // namespace coaplab::coap
