// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/core/rational.h"

#include <numeric>

namespace feelab {
namespace core {

namespace {

std::int64_t checked_narrow(__int128 v, const char* what) {
    if (v > INT64_MAX || v < INT64_MIN) {
        throw std::overflow_error(std::string("rational overflow in ") + what);
    }
    return static_cast<std::int64_t>(v);
}

}  // namespace

Rational::Rational(std::int64_t numerator, std::int64_t denominator) {
    if (denominator == 0) {
        throw std::invalid_argument("rational with zero denominator");
    }
    if (denominator < 0) {
        numerator = -numerator;
        denominator = -denominator;
    }
    std::int64_t g = std::gcd(numerator < 0 ? -numerator : numerator, denominator);
    if (g == 0) g = 1;
    num_ = numerator / g;
    den_ = denominator / g;
}

Rational Rational::operator+(const Rational& o) const {
    __int128 n = static_cast<__int128>(num_) * o.den_ + static_cast<__int128>(o.num_) * den_;
    __int128 d = static_cast<__int128>(den_) * o.den_;
    // Reduce before narrowing so sums of many small terms stay in range.
    __int128 a = n < 0 ? -n : n;
    __int128 b = d;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    if (a == 0) a = 1;
    return Rational(checked_narrow(n / a, "add"), checked_narrow(d / a, "add"));
}

Rational Rational::operator-(const Rational& o) const {
    return *this + Rational(-o.num_, o.den_);
}

Rational Rational::operator*(const Rational& o) const {
    // Cross-reduce first to keep intermediates small.
    std::int64_t g1 = std::gcd(num_ < 0 ? -num_ : num_, o.den_);
    std::int64_t g2 = std::gcd(o.num_ < 0 ? -o.num_ : o.num_, den_);
    if (g1 == 0) g1 = 1;
    if (g2 == 0) g2 = 1;
    __int128 n = static_cast<__int128>(num_ / g1) * (o.num_ / g2);
    __int128 d = static_cast<__int128>(den_ / g2) * (o.den_ / g1);
    return Rational(checked_narrow(n, "mul"), checked_narrow(d, "mul"));
}

Rational Rational::operator/(const Rational& o) const {
    if (o.num_ == 0) {
        throw std::invalid_argument("rational division by zero");
    }
    return *this * Rational(o.den_, o.num_);
}

bool Rational::operator<(const Rational& o) const {
    return static_cast<__int128>(num_) * o.den_ < static_cast<__int128>(o.num_) * den_;
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

}  // namespace core
}  // namespace feelab
