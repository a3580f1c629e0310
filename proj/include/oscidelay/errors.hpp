#pragma once

#include <stdexcept>
#include <string>

namespace oscidelay {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A function expected to have zero mean per period does not.
class NonZeroMeanError : public Error {
public:
    using Error::Error;
};

/// A requested positive/oscillating decomposition does not exist.
class SplitInfeasibleError : public Error {
public:
    using Error::Error;
};

/// The equation does not have the shape a criterion requires.
class ShapeMismatchError : public Error {
public:
    using Error::Error;
};

/// The reference ODE of a direct-mode criterion failed its stability check.
class ReferenceOdeUnstableError : public Error {
public:
    using Error::Error;
};

class BadParamsError : public Error {
public:
    using Error::Error;
};

class StepTooLargeError : public Error {
public:
    using Error::Error;
};

class NonFiniteStateError : public Error {
public:
    using Error::Error;
};

class InsufficientPeaksError : public Error {
public:
    using Error::Error;
};

class ZeroSolutionError : public Error {
public:
    using Error::Error;
};

class NotMonotoneError : public Error {
public:
    using Error::Error;
};

class NoSignChangeError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace oscidelay
