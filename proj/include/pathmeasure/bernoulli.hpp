#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pathmeasure {

// Finite prefix of the binary expansion of a point in [0, 1).
// The doubling map acts on it as a left shift, so orbit statistics reduce to
// digit counts; digits are kept exact instead of packing the point into a
// binary64 fraction, which loses one digit per shift.
struct BitSequence {
    std::vector<std::uint8_t> digits;

    std::size_t length() const { return digits.size(); }

    void validate() const {
        for (std::uint8_t d : digits)
            if (d != 0 && d != 1)
                throw std::domain_error("BitSequence: digit outside {0,1}");
    }

    std::string to_string() const {
        std::string s;
        s.reserve(digits.size());
        for (std::uint8_t d : digits)
            s.push_back(d ? '1' : '0');
        return s;
    }

    static BitSequence from_string(const std::string& s) {
        BitSequence seq;
        seq.digits.reserve(s.size());
        for (char c : s) {
            if (c != '0' && c != '1')
                throw std::domain_error("BitSequence: character outside {'0','1'}");
            seq.digits.push_back(static_cast<std::uint8_t>(c - '0'));
        }
        return seq;
    }
};

// First `count` binary digits of numerator/denominator in [0, 1) by long
// division. Dyadic rationals come out with the all-zero tail.
inline BitSequence expand_rational(std::uint64_t numerator, std::uint64_t denominator,
                                   std::size_t count) {
    if (denominator == 0)
        throw std::domain_error("expand_rational: zero denominator");
    if (numerator >= denominator)
        throw std::domain_error("expand_rational: value must lie in [0,1)");
    if (count == 0)
        throw std::domain_error("expand_rational: digit count must be positive");
    if (denominator > (std::uint64_t{1} << 62))
        throw std::domain_error("expand_rational: denominator too large");
    BitSequence seq;
    seq.digits.reserve(count);
    std::uint64_t rem = numerator;
    for (std::size_t i = 0; i < count; ++i) {
        rem *= 2;
        if (rem >= denominator) {
            seq.digits.push_back(1);
            rem -= denominator;
        } else {
            seq.digits.push_back(0);
        }
    }
    return seq;
}

// One application of the doubling map: drop the leading digit.
inline BitSequence bernoulli_step(const BitSequence& s) {
    if (s.digits.empty())
        throw std::domain_error("bernoulli_step: empty sequence");
    BitSequence out;
    out.digits.assign(s.digits.begin() + 1, s.digits.end());
    return out;
}

// Fraction of zeros among the first `leading` digits; equals the fraction of
// orbit points falling in [0, 1/2).
inline double orbit_zero_frequency(const BitSequence& seed, std::size_t leading) {
    if (leading == 0 || leading > seed.length())
        throw std::domain_error("orbit_zero_frequency: prefix length out of range");
    std::size_t zeros = 0;
    for (std::size_t i = 0; i < leading; ++i)
        if (seed.digits[i] == 0)
            ++zeros;
    return static_cast<double>(zeros) / static_cast<double>(leading);
}

// Finitely many fixed digits: the set {a_{i1}=c1, ..., a_{in}=cn}.
struct CylinderConstraint {
    // (1-based digit index, digit value) pairs with distinct indices.
    std::vector<std::pair<std::size_t, int>> fixed;

    void validate() const {
        std::set<std::size_t> seen;
        for (const auto& [index, digit] : fixed) {
            if (index == 0)
                throw std::domain_error("CylinderConstraint: indices are 1-based");
            if (digit != 0 && digit != 1)
                throw std::domain_error("CylinderConstraint: digit outside {0,1}");
            if (!seen.insert(index).second)
                throw std::domain_error("CylinderConstraint: duplicate index");
        }
    }
};

// Product measure with P(digit = 0) = alpha, independently per digit.
struct DigitMeasure {
    double alpha = 0.5;

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::domain_error("DigitMeasure: alpha outside [0,1]");
    }
};

// Measure of a cylinder set: alpha^p (1-alpha)^q with p zero-constraints and
// q one-constraints.
inline double cylinder_measure(const CylinderConstraint& c, const DigitMeasure& m) {
    c.validate();
    m.validate();
    int zeros = 0, ones = 0;
    for (const auto& [index, digit] : c.fixed)
        (digit == 0 ? zeros : ones)++;
    return std::pow(m.alpha, zeros) * std::pow(1.0 - m.alpha, ones);
}

// Draw `count` independent digits, digit 0 with probability alpha. The
// generator is pinned to mt19937_64 with a 53-bit uniform threshold so that
// equal seeds give byte-equal sequences on every platform.
inline BitSequence sample_sequence(const DigitMeasure& m, std::size_t count, std::uint64_t seed) {
    m.validate();
    if (count == 0)
        throw std::domain_error("sample_sequence: count must be positive");
    std::mt19937_64 rng(seed);
    BitSequence seq;
    seq.digits.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        seq.digits.push_back(u < m.alpha ? 0 : 1);
    }
    return seq;
}

} // namespace pathmeasure
