#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmmtree {

/// A pivot fell below the positive-definiteness threshold. Callers usually
/// respond by regularizing or recomputing from scratch.
class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SingularSystem : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexAlreadyPresent : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IndexNotPresent : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvalidConfig : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IncompleteReference : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class RaggedRows : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A serialized model or config document is malformed.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// CSV cell that is neither a number nor a missing marker. Row and column are
/// zero-based data coordinates (a header line, if any, is not counted).
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t row, std::size_t column, const std::string& token)
        : std::runtime_error("cannot parse '" + token + "' at row " + std::to_string(row) +
                             ", column " + std::to_string(column)),
          row_(row), column_(column) {}

    std::size_t row() const noexcept { return row_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

}  // namespace gmmtree
