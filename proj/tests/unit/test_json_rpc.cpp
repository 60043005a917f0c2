#include "bridgekit/error.hpp"
#include "bridgekit/json_rpc.hpp"

#include <doctest.h>

#include <random>

using namespace bridgekit;

namespace {

std::string random_text(std::mt19937_64& rng) {
    static const std::string alphabet = "abcXYZ019 _-:/\\\"\n\t{}[]\xc3\xa9\xe2\x82\xac";
    std::uniform_int_distribution<int> len(0, 12);
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
        // pick whole UTF-8 sequences so strings stay valid
        std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
        std::size_t k = pick(rng);
        while (k > 0 && (static_cast<unsigned char>(alphabet[k]) & 0xC0) == 0x80) --k;
        std::size_t end = k + 1;
        while (end < alphabet.size() && (static_cast<unsigned char>(alphabet[end]) & 0xC0) == 0x80) ++end;
        s += alphabet.substr(k, end - k);
    }
    return s;
}

json random_value(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> kind(0, depth > 2 ? 4 : 6);
    switch (kind(rng)) {
        case 0: return nullptr;
        case 1: return std::uniform_int_distribution<int>(0, 1)(rng) == 1;
        case 2: return std::uniform_int_distribution<std::int64_t>(-1'000'000'000'000, 1'000'000'000'000)(rng);
        case 3: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
        case 4: return random_text(rng);
        case 5: {
            json a = json::array();
            for (int i = std::uniform_int_distribution<int>(0, 3)(rng); i > 0; --i) a.push_back(random_value(rng, depth + 1));
            return a;
        }
        default: {
            json o = json::object();
            for (int i = std::uniform_int_distribution<int>(0, 3)(rng); i > 0; --i) o[random_text(rng)] = random_value(rng, depth + 1);
            return o;
        }
    }
}

RpcId random_id(std::mt19937_64& rng) {
    if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
        return std::uniform_int_distribution<std::int64_t>(-5, 1'000'000)(rng);
    }
    return random_text(rng);
}

RpcMessage random_message(std::mt19937_64& rng) {
    json params = std::uniform_int_distribution<int>(0, 2)(rng) == 0 ? json(nullptr) : json::object();
    if (params.is_object()) params["payload"] = random_value(rng, 0);
    switch (std::uniform_int_distribution<int>(0, 3)(rng)) {
        case 0: return RpcMessage::request(random_id(rng), "tools/" + random_text(rng) + "x", params);
        case 1: return RpcMessage::notification("notifications/" + random_text(rng) + "x", params);
        case 2: return RpcMessage::success(random_id(rng), random_value(rng, 0));
        default: {
            RpcError e{std::uniform_int_distribution<std::int64_t>(-32768, 32767)(rng), random_text(rng), std::nullopt};
            if (std::uniform_int_distribution<int>(0, 1)(rng) == 1) e.data = random_value(rng, 1);
            return RpcMessage::failure(random_id(rng), e);
        }
    }
}

}  // namespace

TEST_CASE("frames round-trip for random messages") {
    std::mt19937_64 rng(20240611);
    for (int i = 0; i < 1000; ++i) {
        const auto msg = random_message(rng);
        const auto frame = encode_frame(msg);
        REQUIRE(frame.back() == '\n');
        REQUIRE(frame.find('\n') == frame.size() - 1);
        CHECK(decode_frame(frame) == msg);
    }
}

TEST_CASE("decode tolerates CRLF and trailing blanks") {
    const auto m = decode_frame("{\"jsonrpc\":\"2.0\",\"id\":7,\"result\":{}} \r\n");
    CHECK(m.kind == RpcMessage::Kind::response);
    CHECK(std::get<std::int64_t>(*m.id) == 7);
}

TEST_CASE("malformed line is a parse error naming the line") {
    try {
        decode_frame("{\"jsonrpc\": \"2.0\", garbage");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse_error);
        CHECK(std::string(e.what()).find("garbage") != std::string::npos);
    }
}

TEST_CASE("well-formed JSON breaking the message rules is a protocol error") {
    const char* bad[] = {
        R"({"id":1,"result":{}})",
        R"({"jsonrpc":"1.0","id":1,"result":{}})",
        R"({"jsonrpc":"2.0","id":1,"result":{},"error":{"code":1,"message":"x"}})",
        R"({"jsonrpc":"2.0","id":1})",
        R"({"jsonrpc":"2.0","id":{"a":1},"method":"x"})",
        R"({"jsonrpc":"2.0","method":5})",
        R"({"jsonrpc":"2.0","id":1,"error":{"message":"no code"}})",
        R"([1,2,3])",
    };
    for (const char* line : bad) {
        CAPTURE(line);
        try {
            decode_frame(line);
            FAIL("accepted");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::protocol_error);
        }
    }
}

TEST_CASE("notification has no id and request requires one") {
    const auto n = decode_frame(R"({"jsonrpc":"2.0","method":"notifications/initialized"})");
    CHECK(n.kind == RpcMessage::Kind::notification);
    CHECK_FALSE(n.id.has_value());
    CHECK(encode_frame(n) == "{\"jsonrpc\":\"2.0\",\"method\":\"notifications/initialized\"}\n");

    RpcMessage r = RpcMessage::request(1, "ping");
    r.id.reset();
    CHECK_THROWS_AS(encode_frame(r), Error);
}

TEST_CASE("invalid UTF-8 cannot be encoded") {
    const auto m = RpcMessage::request(1, "tools/call", {{"text", std::string("\xff\xfe")}});
    try {
        encode_frame(m);
        FAIL("encoded invalid UTF-8");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::encoding_error);
    }
}

TEST_CASE("ids print the same for both variants") {
    CHECK(id_to_string(RpcId{std::int64_t{42}}) == "42");
    CHECK(id_to_string(RpcId{std::string("abc")}) == "abc");
}

TEST_CASE("tool descriptors") {
    const auto t = tool_from_json({{"name", "echo"}, {"description", "Echo"}, {"inputSchema", {{"type", "object"}}}});
    CHECK(t.name == "echo");
    CHECK(to_json(t)["inputSchema"]["type"] == "object");
    CHECK_THROWS_AS(tool_from_json({{"description", "nameless"}}), Error);

    Capabilities caps;
    caps.tools = {t};
    CHECK(caps.find_tool("echo") != nullptr);
    CHECK(caps.find_tool("missing") == nullptr);
}
