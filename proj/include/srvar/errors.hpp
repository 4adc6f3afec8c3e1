#pragma once

#include <stdexcept>
#include <string>

namespace srvar {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite operands, empty inputs, division by zero, malformed specs.
class InvalidInput : public Error
{
public:
    using Error::Error;
};

/// A carrier result left the finite range.
class Overflow : public Error
{
public:
    using Error::Error;
};

/// A parameter is outside the domain of a formula (e.g. lambda not in (0,1)).
class DomainError : public Error
{
public:
    using Error::Error;
};

/// The requested quantity does not exist, e.g. a relative error against an exact zero.
class UndefinedValue : public Error
{
public:
    using Error::Error;
};

} // namespace srvar
