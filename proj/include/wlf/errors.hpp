#pragma once

#include <stdexcept>
#include <string>

namespace wlf {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Model violates a structural requirement (signature, empty cone, ...).
class ModelIntegrityError : public Error {
public:
    using Error::Error;
};

/// Singular metric or frame.
class DegeneracyError : public Error {
public:
    using Error::Error;
};

/// Argument outside the documented range.
class ParameterError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace wlf
