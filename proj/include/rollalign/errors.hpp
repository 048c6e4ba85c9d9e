#pragma once

#include <stdexcept>
#include <string>

namespace rollalign {

// Failure categories surfaced by the library. The CLI maps them to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A value that makes an operation undefined (division by ~0, flat percentile spread).
class DegenerateValue : public Error {
public:
    using Error::Error;
};

class InvalidSchedule : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class NonFinite : public Error {
public:
    NonFinite(const std::string& what, int step) : Error(what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

class SingularFit : public Error {
public:
    using Error::Error;
};

class EmptyMask : public Error {
public:
    using Error::Error;
};

class HookFailure : public Error {
public:
    using Error::Error;
};

// On-disk artifacts disagree with each other (manifest, schedule hash, shapes).
class ProtocolMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace rollalign
