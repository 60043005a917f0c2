#include "bridgekit/util.hpp"

#include "bridgekit/error.hpp"

#include <array>
#include <cstdlib>
#include <ctime>
#include <random>

namespace bridgekit {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::bad_request: return "bad_request";
        case ErrorCode::invalid_config: return "invalid_config";
        case ErrorCode::spawn_failed: return "spawn_failed";
        case ErrorCode::connect_timeout: return "connect_timeout";
        case ErrorCode::request_timeout: return "request_timeout";
        case ErrorCode::transport_failure: return "transport_failure";
        case ErrorCode::server_unavailable: return "server_unavailable";
        case ErrorCode::server_stopped: return "server_stopped";
        case ErrorCode::tool_error: return "tool_error";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::protocol_error: return "protocol_error";
        case ErrorCode::resource_exhausted: return "resource_exhausted";
        case ErrorCode::sandbox_unavailable: return "sandbox_unavailable";
        case ErrorCode::sandbox_timeout: return "sandbox_timeout";
        case ErrorCode::backend_error: return "backend_error";
        case ErrorCode::encoding_error: return "encoding_error";
    }
    return "unknown";
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found: return 404;
        case ErrorCode::bad_request:
        case ErrorCode::parse_error:
        case ErrorCode::encoding_error: return 400;
        case ErrorCode::request_timeout:
        case ErrorCode::sandbox_timeout: return 504;
        case ErrorCode::server_unavailable:
        case ErrorCode::server_stopped:
        case ErrorCode::resource_exhausted:
        case ErrorCode::sandbox_unavailable: return 503;
        case ErrorCode::invalid_config:
        case ErrorCode::spawn_failed:
        case ErrorCode::connect_timeout:
        case ErrorCode::transport_failure:
        case ErrorCode::tool_error:
        case ErrorCode::protocol_error:
        case ErrorCode::backend_error: return 502;
    }
    return 500;
}

namespace {

std::random_device& entropy() {
    thread_local std::random_device rd;
    return rd;
}

constexpr std::array<char, 16> kHex = {'0', '1', '2', '3', '4', '5', '6', '7',
                                       '8', '9', 'a', 'b', 'c', 'd', 'e', 'f'};

}  // namespace

static std::string to_hex(const unsigned char* data, std::size_t n) {
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(kHex[data[i] >> 4]);
        out.push_back(kHex[data[i] & 0xf]);
    }
    return out;
}

std::string random_hex(std::size_t bytes) {
    std::string buf(bytes, '\0');
    auto& rd = entropy();
    for (auto& c : buf) c = static_cast<char>(rd() & 0xffu);
    return to_hex(reinterpret_cast<const unsigned char*>(buf.data()), buf.size());
}

std::string make_uuid() {
    std::array<unsigned char, 16> b{};
    auto& rd = entropy();
    for (auto& byte : b) byte = static_cast<unsigned char>(rd() & 0xffu);
    b[6] = static_cast<unsigned char>((b[6] & 0x0f) | 0x40);
    b[8] = static_cast<unsigned char>((b[8] & 0x3f) | 0x80);
    const std::string hex = to_hex(b.data(), b.size());
    return hex.substr(0, 8) + '-' + hex.substr(8, 4) + '-' + hex.substr(12, 4) + '-' +
           hex.substr(16, 4) + '-' + hex.substr(20, 12);
}

bool constant_time_equal(std::string_view a, std::string_view b) {
    unsigned diff = a.size() == b.size() ? 0u : 1u;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        diff |= static_cast<unsigned>(static_cast<unsigned char>(a[i]) ^
                                      static_cast<unsigned char>(b[i]));
    }
    return diff == 0;
}

std::string to_rfc3339(WallClock::time_point t) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch());
    const std::time_t secs = static_cast<std::time_t>(ms.count() / 1000);
    std::tm utc{};
    gmtime_r(&secs, &utc);
    std::array<char, 32> buf{};
    std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%S", &utc);
    std::array<char, 48> out{};
    std::snprintf(out.data(), out.size(), "%s.%03dZ", buf.data(),
                  static_cast<int>(ms.count() % 1000));
    return out.data();
}

std::string expand_env(std::string_view text) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '$' && i + 1 < text.size() && text[i + 1] == '{') {
            const auto close = text.find('}', i + 2);
            if (close != std::string_view::npos) {
                const std::string name(text.substr(i + 2, close - i - 2));
                if (const char* value = std::getenv(name.c_str())) out += value;
                i = close + 1;
                continue;
            }
        }
        out.push_back(text[i++]);
    }
    return out;
}

double to_ms(Clock::duration d) {
    return std::chrono::duration<double, std::milli>(d).count();
}

std::string Url::origin() const {
    return scheme + "://" + host + ":" + std::to_string(port);
}

Url parse_url(std::string_view text) {
    Url url;
    const auto sep = text.find("://");
    if (sep == std::string_view::npos) throw Error(ErrorCode::bad_request, "URL missing scheme: " + std::string(text));
    url.scheme = std::string(text.substr(0, sep));
    if (url.scheme != "http" && url.scheme != "https") {
        throw Error(ErrorCode::bad_request, "unsupported URL scheme: " + url.scheme);
    }
    url.port = url.scheme == "https" ? 443 : 80;
    auto rest = text.substr(sep + 3);
    const auto slash = rest.find('/');
    auto authority = rest.substr(0, slash);
    url.path = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        const std::string port(authority.substr(colon + 1));
        try {
            url.port = std::stoi(port);
        } catch (const std::exception&) {
            throw Error(ErrorCode::bad_request, "invalid port in URL: " + std::string(text));
        }
        authority = authority.substr(0, colon);
    }
    if (authority.empty()) throw Error(ErrorCode::bad_request, "URL missing host: " + std::string(text));
    url.host = std::string(authority);
    return url;
}

}  // namespace bridgekit
