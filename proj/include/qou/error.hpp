#pragma once

#include <stdexcept>
#include <string>

namespace qou {

/// Base class for every failure raised by the library. The message always
/// starts with the name of the operation that failed.
class Error : public std::runtime_error {
  public:
    Error(const std::string& operation, const std::string& what)
        : std::runtime_error(operation + ": " + what), operation_(operation) {}

    const std::string& operation() const noexcept { return operation_; }

  private:
    std::string operation_;
};

/// Arguments outside the mathematical domain (|q| >= 1, |x| > L, t <= 0, ...).
class DomainError : public Error {
    using Error::Error;
};

/// A series could not reach its tolerance within the term cap.
class NonConvergent : public Error {
    using Error::Error;
};

/// A product factor vanished where the formula needs its reciprocal.
class SingularInput : public Error {
    using Error::Error;
};

class MaxSubdivisionsExceeded : public Error {
    using Error::Error;
};

class NonFinite : public Error {
    using Error::Error;
};

class BracketInvalid : public Error {
    using Error::Error;
};

class WindowOutOfRange : public Error {
    using Error::Error;
};

/// A Monte Carlo run would exceed its configured transition budget.
class BudgetExceeded : public Error {
    using Error::Error;
};

/// Malformed caller input that is not a mathematical domain violation.
class InvalidArgument : public Error {
    using Error::Error;
};

}  // namespace qou
