#pragma once

#include <stdexcept>
#include <string>

namespace bgnd {

/// Bad user input: malformed files, invalid options, out-of-support responses.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical routine failed to converge or produced non-finite output.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (non-monotone quantile
/// function, non-descent search direction, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace bgnd
