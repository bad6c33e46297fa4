#pragma once

#include <stdexcept>
#include <string>

namespace cdpo {

/// Input or configuration rejected by a precondition check.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A file or record does not match its declared schema.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical computation produced a non-finite value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An operation was requested on an object whose state forbids it
/// (e.g. an optimizer step on a frozen model).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// The requested operation is not supported by this model family.
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

}  // namespace cdpo
