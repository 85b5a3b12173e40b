#pragma once
#include <stdexcept>
#include <string>

namespace mivs {

// Malformed or inconsistent user input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// A numerical routine could not produce a usable answer. Exit code 1.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

} // namespace mivs
