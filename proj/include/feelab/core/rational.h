// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_CORE_RATIONAL_H
#define FEELAB_CORE_RATIONAL_H

#include <cstdint>
#include <stdexcept>
#include <string>

namespace feelab {
namespace core {

// Exact rational on int64 numerator/denominator, always stored normalized
// (gcd 1, denominator > 0). Fee rates and percentile ranks must compare and
// average without rounding, so these stay rational end to end; conversion to
// double happens only at the model-fitting boundary.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(std::int64_t numerator, std::int64_t denominator);

    // Whole number.
    static Rational from_int(std::int64_t v) { return Rational(v, 1); }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }

    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    Rational operator+(const Rational& o) const;
    Rational operator-(const Rational& o) const;
    Rational operator*(const Rational& o) const;
    Rational operator/(const Rational& o) const;

    bool operator==(const Rational& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rational& o) const { return !(*this == o); }
    bool operator<(const Rational& o) const;
    bool operator>(const Rational& o) const { return o < *this; }
    bool operator<=(const Rational& o) const { return !(o < *this); }
    bool operator>=(const Rational& o) const { return !(*this < o); }

    std::string str() const;

private:
    std::int64_t num_;
    std::int64_t den_;
};

}  // namespace core
}  // namespace feelab

#endif  // FEELAB_CORE_RATIONAL_H
