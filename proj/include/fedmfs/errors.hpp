#pragma once

#include <stdexcept>
#include <string>

namespace fedmfs {

/// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct NonFiniteLoss : Error {
    explicit NonFiniteLoss(const std::string& msg) : Error(msg) {}
};

struct NonFiniteInput : Error {
    explicit NonFiniteInput(const std::string& msg) : Error(msg) {}
};

struct ArchMismatch : Error {
    explicit ArchMismatch(const std::string& msg) : Error(msg) {}
};

struct ZeroSampleCount : Error {
    explicit ZeroSampleCount(const std::string& msg) : Error(msg) {}
};

struct EmptyInput : Error {
    explicit EmptyInput(const std::string& msg) : Error(msg) {}
};

struct ArityMismatch : Error {
    explicit ArityMismatch(const std::string& msg) : Error(msg) {}
};

struct EmptyBackground : Error {
    explicit EmptyBackground(const std::string& msg) : Error(msg) {}
};

struct TooManyPlayers : Error {
    explicit TooManyPlayers(const std::string& msg) : Error(msg) {}
};

struct KeyMismatch : Error {
    explicit KeyMismatch(const std::string& msg) : Error(msg) {}
};

struct EmptyPredictionMatrix : Error {
    explicit EmptyPredictionMatrix(const std::string& msg) : Error(msg) {}
};

struct InvalidSpec : Error {
    explicit InvalidSpec(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error(msg) {}
};

}  // namespace fedmfs
