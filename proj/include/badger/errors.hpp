#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace badger {

// Dimensions of two objects do not agree (policy vs state, vector lengths).
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A precondition on a scalar argument was violated.
struct ArgumentError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Masked topology with an expert that has no in-neighbour.
struct TopologyError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Batch index not covered by the curriculum schedule.
struct ScheduleError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed checkpoint / config. `offset` is the byte offset into the input
// where parsing failed, or npos when no single location applies.
struct ParseError : std::runtime_error {
    ParseError(const std::string& what, std::size_t offset = npos)
        : std::runtime_error(offset == npos ? what : what + " (at byte " + std::to_string(offset) + ")"),
          offset(offset) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t offset;
};

struct VersionError : std::runtime_error {
    VersionError(const std::string& what, long long found)
        : std::runtime_error(what), found(found) {}
    long long found;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace badger
