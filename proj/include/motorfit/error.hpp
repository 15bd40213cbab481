#pragma once

#include <stdexcept>
#include <string>

namespace motorfit {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: bad dimensions, bad files, violated preconditions.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A state-space model whose matrices do not fit together.
class InvalidModel : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// The data were well-formed but the algorithm could not produce an answer
/// (singular Hankel matrix, non-settling trace, tied dominant poles, ...).
class IdentificationError : public Error {
public:
    using Error::Error;
};

}  // namespace motorfit
