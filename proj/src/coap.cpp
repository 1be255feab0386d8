#include "coaplab/coap.hpp"

#include <string>

#include "coaplab/error.hpp"

namespace coaplab::coap {
namespace {

bool supported_option(std::uint16_t number) { return number == kOptionUriPath; }

bool known_code(std::uint8_t raw) {
  switch (static_cast<Code>(raw)) {
    case Code::Get:
    case Code::Post:
    case Code::Put:
    case Code::Created:
    case Code::Changed:
    case Code::Content:
      return true;
  }
  return false;
}

// Nibble plus extension bytes for an option delta or length.
std::size_t extension_size(std::size_t v) {
  if (v < 13) return 0;
  if (v < 269) return 1;
  return 2;
}

std::uint8_t nibble(std::size_t v) {
  if (v < 13) return static_cast<std::uint8_t>(v);
  if (v < 269) return 13;
  return 14;
}

void put_extension(Bytes& out, std::size_t v) {
  if (v < 13) return;
  if (v < 269) {
    out.push_back(static_cast<std::uint8_t>(v - 13));
  } else {
    const auto ext = static_cast<std::uint16_t>(v - 269);
    out.push_back(static_cast<std::uint8_t>(ext >> 8));
    out.push_back(static_cast<std::uint8_t>(ext & 0xFF));
  }
}

void validate(const Message& msg) {
  if (msg.version != 1) throw CodecError("CoAP version must be 1");
  if (msg.token.size() > kMaxTokenLength) throw CodecError("token longer than 8 bytes");
  if (!known_code(static_cast<std::uint8_t>(msg.code))) throw CodecError("unsupported code");
  if (msg.code == Code::Get && !msg.payload.empty()) throw CodecError("GET must not carry a payload");
  std::uint16_t previous = 0;
  for (const auto& opt : msg.options) {
    if (!supported_option(opt.number)) throw CodecError("unsupported option number " + std::to_string(opt.number));
    if (opt.number < previous) throw CodecError("option numbers must be non-decreasing");
    if (opt.value.size() > 269 + 0xFFFF) throw CodecError("option value too long");
    previous = opt.number;
  }
}

}  // namespace

std::size_t encoded_size(const Message& msg) {
  std::size_t size = 4 + msg.token.size();
  std::uint16_t previous = 0;
  for (const auto& opt : msg.options) {
    const std::size_t delta = opt.number - previous;
    size += 1 + extension_size(delta) + extension_size(opt.value.size()) + opt.value.size();
    previous = opt.number;
  }
  if (!msg.payload.empty()) size += 1 + msg.payload.size();
  return size;
}

Bytes encode(const Message& msg) {
  validate(msg);
  Bytes out;
  out.reserve(encoded_size(msg));
  out.push_back(static_cast<std::uint8_t>((msg.version << 6) | (static_cast<std::uint8_t>(msg.type) << 4) |
                                          msg.token.size()));
  out.push_back(static_cast<std::uint8_t>(msg.code));
  out.push_back(static_cast<std::uint8_t>(msg.message_id >> 8));
  out.push_back(static_cast<std::uint8_t>(msg.message_id & 0xFF));
  out.insert(out.end(), msg.token.begin(), msg.token.end());

  std::uint16_t previous = 0;
  for (const auto& opt : msg.options) {
    const std::size_t delta = opt.number - previous;
    const std::size_t length = opt.value.size();
    out.push_back(static_cast<std::uint8_t>((nibble(delta) << 4) | nibble(length)));
    put_extension(out, delta);
    put_extension(out, length);
    out.insert(out.end(), opt.value.begin(), opt.value.end());
    previous = opt.number;
  }
  if (!msg.payload.empty()) {
    out.push_back(kPayloadMarker);
    out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  }
  return out;
}

Message decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw CodecError("truncated CoAP header");
  Message msg;
  msg.version = bytes[0] >> 6;
  if (msg.version != 1) throw CodecError("unsupported CoAP version");
  msg.type = static_cast<MessageType>((bytes[0] >> 4) & 0x3);
  const std::size_t tkl = bytes[0] & 0x0F;
  if (tkl > kMaxTokenLength) throw CodecError("token length above 8");
  if (!known_code(bytes[1])) throw CodecError("unsupported code");
  msg.code = static_cast<Code>(bytes[1]);
  msg.message_id = static_cast<std::uint16_t>((bytes[2] << 8) | bytes[3]);
  std::size_t pos = 4;
  if (bytes.size() < pos + tkl) throw CodecError("truncated token");
  msg.token.assign(bytes.begin() + pos, bytes.begin() + pos + tkl);
  pos += tkl;

  auto read_extended = [&](std::uint8_t nib) -> std::size_t {
    if (nib < 13) return nib;
    if (nib == 13) {
      if (pos + 1 > bytes.size()) throw CodecError("truncated option extension");
      return 13 + bytes[pos++];
    }
    if (nib == 14) {
      if (pos + 2 > bytes.size()) throw CodecError("truncated option extension");
      const std::size_t v = (std::size_t{bytes[pos]} << 8) | bytes[pos + 1];
      pos += 2;
      return 269 + v;
    }
    throw CodecError("reserved option nibble 15");
  };

  std::size_t number = 0;
  while (pos < bytes.size()) {
    const std::uint8_t head = bytes[pos++];
    if (head == kPayloadMarker) {
      if (pos == bytes.size()) throw CodecError("payload marker followed by empty payload");
      msg.payload.assign(bytes.begin() + pos, bytes.end());
      pos = bytes.size();
      break;
    }
    const std::size_t delta = read_extended(head >> 4);
    const std::size_t length = read_extended(head & 0x0F);
    number += delta;
    if (number > 0xFFFF) throw CodecError("option number overflow");
    if (!supported_option(static_cast<std::uint16_t>(number))) {
      throw CodecError("unsupported option number " + std::to_string(number));
    }
    if (pos + length > bytes.size()) throw CodecError("truncated option value");
    msg.options.push_back({static_cast<std::uint16_t>(number), Bytes(bytes.begin() + pos, bytes.begin() + pos + length)});
    pos += length;
  }
  if (msg.code == Code::Get && !msg.payload.empty()) throw CodecError("GET must not carry a payload");
  return msg;
}

Code method_code(Method m) {
  switch (m) {
    case Method::Get:
      return Code::Get;
    case Method::Put:
      return Code::Put;
    case Method::Post:
      return Code::Post;
  }
  throw CodecError("unknown method");
}

bool is_request(Code c) { return (static_cast<std::uint8_t>(c) >> 5) == 0; }

Message make_request(Method method, Bytes payload, std::uint16_t message_id, Bytes token, std::string_view uri_path) {
  if (method == Method::Get && !payload.empty()) throw CodecError("GET request with a payload");
  if (token.size() > kMaxTokenLength) throw CodecError("token longer than 8 bytes");
  Message msg;
  msg.type = MessageType::Confirmable;
  msg.code = method_code(method);
  msg.message_id = message_id;
  msg.token = std::move(token);
  if (!uri_path.empty()) msg.options.push_back({kOptionUriPath, Bytes(uri_path.begin(), uri_path.end())});
  msg.payload = std::move(payload);
  return msg;
}

Message make_response(const Message& request, Bytes payload) {
  Message msg;
  msg.type = MessageType::Ack;
  msg.message_id = request.message_id;
  msg.token = request.token;
  switch (request.code) {
    case Code::Get:
      msg.code = Code::Content;
      break;
    case Code::Put:
      msg.code = Code::Changed;
      break;
    case Code::Post:
      msg.code = Code::Created;
      break;
    default:
      throw CodecError("cannot answer a response");
  }
  msg.payload = std::move(payload);
  return msg;
}

std::string_view code_name(Code c) {
  switch (c) {
    case Code::Get:
      return "GET";
    case Code::Post:
      return "POST";
    case Code::Put:
      return "PUT";
    case Code::Created:
      return "2.01";
    case Code::Changed:
      return "2.04";
    case Code::Content:
      return "2.05";
  }
  return "?";
}

std::string_view type_name(MessageType t) {
  switch (t) {
    case MessageType::Confirmable:
      return "CON";
    case MessageType::NonConfirmable:
      return "NON";
    case MessageType::Ack:
      return "ACK";
    case MessageType::Reset:
      return "RST";
  }
  return "?";
}

}  // namespace coaplab::coap
