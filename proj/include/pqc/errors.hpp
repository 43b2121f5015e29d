#pragma once

#include <stdexcept>
#include <string>

namespace pqc {

// Non-finite or out-of-domain numeric input.
class InputDomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Controller operations invoked out of order for a frame.
class SequencingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Trace-driven plant asked for a (frame, qp) the table does not cover.
class TraceDomainError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Input carries no information to work with (empty trace, all-zero response).
class DegenerateInputError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Malformed text input (trace tables, state dumps) with a line reference.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pqc
