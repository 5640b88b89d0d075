#pragma once

#include <stdexcept>
#include <string>

namespace msae {

// Base of every error raised by the toolkit. Subclasses name the failure kind so
// callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class MalformedFile : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class NonFiniteValue : public Error { using Error::Error; };
class IoFailure : public Error { using Error::Error; };
class InvalidDataset : public Error { using Error::Error; };
class EmptyDataset : public Error { using Error::Error; };
class EmptyDomain : public Error { using Error::Error; };
class DomainTooSmall : public Error { using Error::Error; };
class InvalidSpec : public Error { using Error::Error; };
class InvalidArgument : public Error { using Error::Error; };

}  // namespace msae
