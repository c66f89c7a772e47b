#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tanglide {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed expression text. `offset` is the byte offset of the offending token.
class SyntaxError : public Error {
public:
    SyntaxError(const std::string& message, std::size_t offset)
        : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class UnknownIdentifierError : public Error {
public:
    UnknownIdentifierError(std::string name, std::size_t offset)
        : Error("unknown identifier '" + name + "' at offset " + std::to_string(offset)),
          name_(std::move(name)),
          offset_(offset) {}

    const std::string& name() const noexcept { return name_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string name_;
    std::size_t offset_;
};

/// Evaluation left the domain of an operation (log of a nonpositive value, division by an exact zero).
class DomainError : public Error {
public:
    explicit DomainError(const std::string& message, std::size_t offset = npos)
        : Error(offset == npos ? message : message + " at offset " + std::to_string(offset)),
          offset_(offset) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// A precondition of a geometric operation does not hold at the given point
/// (wrong region, wrong cone case, point off the manifold, rank deficiency).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// Model parameters violate the model's constraints.
class ConstraintError : public Error {
public:
    using Error::Error;
};

/// Integrator or projection failure.
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace tanglide
