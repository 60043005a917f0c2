#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace bridgekit {

using Clock = std::chrono::steady_clock;
using WallClock = std::chrono::system_clock;

/// Random version-4 UUID in canonical 8-4-4-4-12 form.
std::string make_uuid();

/// `bytes` random bytes from the OS entropy source, lowercase hex encoded.
std::string random_hex(std::size_t bytes);

/// Compares two secrets without short-circuiting on the first mismatch.
bool constant_time_equal(std::string_view a, std::string_view b);

/// UTC timestamp with millisecond precision, e.g. 2026-01-02T03:04:05.678Z.
std::string to_rfc3339(WallClock::time_point t);

/// Replaces every `${NAME}` with the value of the environment variable NAME
/// (empty if unset). Text without the pattern is returned untouched.
std::string expand_env(std::string_view text);

double to_ms(Clock::duration d);

struct Url {
    std::string scheme;  // http or https
    std::string host;
    int port = 80;
    std::string path;    // always starts with '/'

    /// scheme://host:port without the path, the form httplib clients accept.
    std::string origin() const;
};

/// Parses http(s)://host[:port][/path]. Throws Error(bad_request) on anything else.
Url parse_url(std::string_view text);

}  // namespace bridgekit
