#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace mlmon {

/// Time in seconds. Live components use epoch seconds; the trial harness
/// uses simulated seconds from run start.
using Seconds = double;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input at a known byte offset (XML, CSV, JSON bodies).
class ParseError : public Error {
public:
    ParseError(std::size_t offset, const std::string& what)
        : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Well-formed input that is missing something required.
class SemanticError : public Error {
public:
    using Error::Error;
};

/// A named value lies outside its admissible range.
class RangeError : public Error {
public:
    RangeError(std::string field, const std::string& what)
        : Error(what), field_(std::move(field)) {}
    explicit RangeError(std::string field)
        : Error(field + " out of range"), field_(std::move(field)) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// A function was called outside its mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

constexpr double kEarthRadiusM = 6371008.8;

/// Great-circle distance in meters.
double haversine_m(const GeoPoint& a, const GeoPoint& b);

bool valid_geo(const GeoPoint& p);

/// Shortest decimal text that round-trips the value ("-85", "0.1", "1e-07").
std::string format_number(double v);

/// Fixed-point text with `digits` decimals, "-0.000" normalized to "0.000".
std::string format_fixed(double v, int digits);

std::string trim(std::string_view s);

}  // namespace mlmon
