#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tcqa {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input line. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what)
        : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class LookupError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's contract (e.g. an entity embedding handed to
/// the inductive entity enhancer, or an inductive evaluation on a model that
/// cannot represent unseen entities).
class ContractError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class SemanticsError : public Error {
public:
    using Error::Error;
};

class UnsupportedStructure : public Error {
public:
    using Error::Error;
};

class GenerationExhausted : public Error {
public:
    GenerationExhausted(const std::string& what, std::size_t attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempts)"), attempts_(attempts) {}

    std::size_t attempts() const { return attempts_; }

private:
    std::size_t attempts_;
};

class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t step)
        : Error(what + " at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const { return step_; }

private:
    std::size_t step_;
};

class UndefinedMetric : public Error {
public:
    using Error::Error;
};

}  // namespace tcqa
