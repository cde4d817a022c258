#pragma once

#include <stdexcept>
#include <string>

namespace mclust {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unreadable file or failed write.
class IoError : public Error {
public:
    using Error::Error;
};

// Input that violates a documented contract (schema, ranges, duplicates).
class InputError : public Error {
public:
    using Error::Error;
};

// Not enough observations to compute a statistic.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Bad configuration or command line.
class UsageError : public Error {
public:
    using Error::Error;
};

}  // namespace mclust
