#include <doctest.h>

#include "coaplab/coap.hpp"
#include "coaplab/error.hpp"
#include "coaplab/random.hpp"

using namespace coaplab;
using namespace coaplab::coap;

namespace {

// Independent length formula: 4 header bytes, token, options, optional marker + payload.
std::size_t expected_length(const Message& m) {
  std::size_t n = 4 + m.token.size();
  std::uint16_t previous = 0;
  for (const auto& opt : m.options) {
    const std::size_t delta = opt.number - previous;
    const std::size_t len = opt.value.size();
    auto ext = [](std::size_t v) -> std::size_t { return v < 13 ? 0 : (v < 269 ? 1 : 2); };
    n += 1 + ext(delta) + ext(len) + len;
    previous = opt.number;
  }
  if (!m.payload.empty()) n += 1 + m.payload.size();
  return n;
}

Message random_message(Rng& rng) {
  Message m;
  m.type = static_cast<MessageType>(rng.uniform_int(0, 3));
  static constexpr Code kCodes[] = {Code::Get, Code::Post, Code::Put, Code::Created, Code::Changed, Code::Content};
  m.code = kCodes[rng.uniform_int(0, 5)];
  m.message_id = static_cast<std::uint16_t>(rng.uniform_int(0, 65535));
  m.token.resize(rng.uniform_int(0, 8));
  for (auto& b : m.token) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  const auto n_opts = rng.uniform_int(0, 3);
  for (std::int64_t i = 0; i < n_opts; ++i) {
    Option o{kOptionUriPath, Bytes(rng.uniform_int(0, 300))};
    for (auto& b : o.value) b = static_cast<std::uint8_t>(rng.uniform_int('a', 'z'));
    m.options.push_back(o);
  }
  if (m.code != Code::Get) {
    m.payload.resize(rng.uniform_int(0, 400));
    for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  }
  return m;
}

}  // namespace

TEST_CASE("confirmable GET with message id 1 encodes to four header bytes") {
  Message m;
  m.message_id = 1;
  CHECK(encode(m) == Bytes{0x40, 0x01, 0x00, 0x01});
}

TEST_CASE("four header bytes decode to a confirmable GET") {
  const Bytes wire{0x40, 0x01, 0x00, 0x01};
  const Message m = decode(wire);
  CHECK(m.version == 1);
  CHECK(m.type == MessageType::Confirmable);
  CHECK(m.code == Code::Get);
  CHECK(m.message_id == 1);
  CHECK(m.token.empty());
  CHECK(m.options.empty());
  CHECK(m.payload.empty());
}

TEST_CASE("payload follows the 0xFF marker") {
  const Message m = make_request(Method::Put, Bytes{'A'}, 0);
  const Bytes wire = encode(m);
  REQUIRE(wire.size() >= 2);
  CHECK(wire[wire.size() - 2] == 0xFF);
  CHECK(wire.back() == 0x41);
  // Ver=01 T=00 TKL=0000, code 0.03
  CHECK(wire[0] == 0x40);
  CHECK(wire[1] == 0x03);
}

TEST_CASE("Uri-Path option is hand-encoded as delta 11") {
  const Message m = make_request(Method::Get, {}, 0x1234, Bytes{0xAB}, "data");
  const Bytes expected{0x41, 0x01, 0x12, 0x34, 0xAB, 0xB4, 'd', 'a', 't', 'a'};
  CHECK(encode(m) == expected);
}

TEST_CASE("request construction") {
  SUBCASE("PUT with the attack payload size") {
    const Message m = make_request(Method::Put, Bytes(9203, 'x'), 7);
    CHECK(m.code == Code::Put);
    CHECK(m.payload.size() == 9203);
    CHECK(m.message_id == 7);
    CHECK(m.type == MessageType::Confirmable);
  }
  SUBCASE("empty GET") { CHECK_NOTHROW(make_request(Method::Get, {}, 0)); }
  SUBCASE("GET with payload is rejected") { CHECK_THROWS_AS(make_request(Method::Get, Bytes{'x'}, 0), CodecError); }
}

TEST_CASE("responses use the conventional success codes") {
  CHECK(make_response(make_request(Method::Get, {}, 1)).code == Code::Content);
  CHECK(make_response(make_request(Method::Put, Bytes{'a'}, 1)).code == Code::Changed);
  CHECK(make_response(make_request(Method::Post, Bytes{'a'}, 1)).code == Code::Created);
  const Message req = make_request(Method::Post, Bytes{'a'}, 77, Bytes{1, 2});
  const Message resp = make_response(req);
  CHECK(resp.type == MessageType::Ack);
  CHECK(resp.message_id == 77);
  CHECK(resp.token == req.token);
}

TEST_CASE("encoder rejects invalid messages") {
  Message m;
  SUBCASE("token longer than 8 bytes") {
    m.token = Bytes(9, 1);
    CHECK_THROWS_AS(encode(m), CodecError);
  }
  SUBCASE("unsupported option number") {
    m.options.push_back({12, Bytes{1}});
    CHECK_THROWS_AS(encode(m), CodecError);
  }
  SUBCASE("GET with payload") {
    m.payload = Bytes{1};
    CHECK_THROWS_AS(encode(m), CodecError);
  }
}

TEST_CASE("decoder rejects malformed input") {
  CHECK_THROWS_AS(decode(Bytes{0x40}), CodecError);
  CHECK_THROWS_AS(decode(Bytes{}), CodecError);
  CHECK_THROWS_AS(decode(Bytes{0x80, 0x01, 0x00, 0x01}), CodecError);              // version 2
  CHECK_THROWS_AS(decode(Bytes{0x49, 0x01, 0x00, 0x01}), CodecError);              // TKL 9
  CHECK_THROWS_AS(decode(Bytes{0x42, 0x01, 0x00, 0x01, 0xAA}), CodecError);        // token cut short
  CHECK_THROWS_AS(decode(Bytes{0x40, 0x01, 0x00, 0x01, 0xB4, 'd'}), CodecError);   // option value cut short
  CHECK_THROWS_AS(decode(Bytes{0x40, 0x01, 0x00, 0x01, 0xF0}), CodecError);        // delta nibble 15
  CHECK_THROWS_AS(decode(Bytes{0x40, 0x03, 0x00, 0x01, 0xFF}), CodecError);        // marker without payload
  CHECK_THROWS_AS(decode(Bytes{0x40, 0x01, 0x00, 0x01, 0xFF, 0x41}), CodecError);  // GET with payload
}

TEST_CASE("round trip and length formula on random messages") {
  Rng rng(2024);
  for (int i = 0; i < 2000; ++i) {
    const Message m = random_message(rng);
    const Bytes wire = encode(m);
    CHECK(wire.size() == expected_length(m));
    CHECK(encoded_size(m) == wire.size());
    CHECK(decode(wire) == m);
  }
}

TEST_CASE("decoder never crashes on arbitrary bytes") {
  Rng rng(99);
  std::size_t decoded = 0;
  for (int i = 0; i < 20000; ++i) {
    Bytes junk(rng.uniform_int(0, 40));
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    if (!junk.empty() && rng.bernoulli(0.5)) junk[0] = static_cast<std::uint8_t>(0x40 | (junk[0] & 0x0F));
    try {
      const Message m = decode(junk);
      // Whatever decodes must re-encode to the same bytes.
      CHECK(encode(m) == junk);
      ++decoded;
    } catch (const CodecError&) {
    }
  }
  CHECK(decoded > 0);
}

TEST_CASE("names") {
  CHECK(code_name(Code::Get) == "GET");
  CHECK(code_name(Code::Content) == "2.05");
  CHECK(type_name(MessageType::Ack) == "ACK");
  CHECK(is_request(Code::Post));
  CHECK_FALSE(is_request(Code::Created));
}
