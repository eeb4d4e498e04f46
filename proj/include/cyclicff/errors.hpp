#pragma once

#include <stdexcept>
#include <string>

namespace cyclicff {

// Every library failure derives from Error so callers (the CLI in particular)
// can map categories onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite or otherwise unusable numeric input.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Operand shapes do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configuration or call parameter violates its documented range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// A file does not follow its binary/text layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Two inputs that must agree (image/label counts, dataset dims) do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class ConstructionError : public Error {
public:
    using Error::Error;
};

/// A metric was requested over an empty set.
class UndefinedMetric : public Error {
public:
    using Error::Error;
};

} // namespace cyclicff
