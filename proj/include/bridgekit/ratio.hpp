#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace bridgekit {

/// Exact non-negative-denominator fraction, always kept in lowest terms.
struct Ratio {
    std::int64_t num = 0;
    std::int64_t den = 1;

    constexpr Ratio() = default;
    constexpr Ratio(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
        if (den == 0) throw std::domain_error("zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        const auto g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
    }

    constexpr double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }

    friend constexpr bool operator==(const Ratio&, const Ratio&) = default;
    friend constexpr bool operator<(const Ratio& a, const Ratio& b) { return a.num * b.den < b.num * a.den; }
    friend constexpr bool operator<=(const Ratio& a, const Ratio& b) { return !(b < a); }

    friend constexpr Ratio operator+(const Ratio& a, const Ratio& b) {
        return {a.num * b.den + b.num * a.den, a.den * b.den};
    }
    friend constexpr Ratio operator*(const Ratio& a, const Ratio& b) { return {a.num * b.num, a.den * b.den}; }
    friend constexpr Ratio operator/(const Ratio& a, const Ratio& b) { return {a.num * b.den, a.den * b.num}; }

    friend std::ostream& operator<<(std::ostream& os, const Ratio& r) {
        return os << r.num << '/' << r.den;
    }
};

}  // namespace bridgekit
