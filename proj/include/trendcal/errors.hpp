#pragma once

#include <chrono>
#include <stdexcept>
#include <string>
#include <vector>

namespace trendcal {

// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
public:
    using Error::Error;
};

// A ratio was requested against a series whose maximum is zero.
class DivisionUndefinedError : public Error {
public:
    using Error::Error;
};

// Two series from different provider responses were compared directly.
class MixedScaleError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Upstream failure. `retryable` is set for throttling and transient faults.
class TransportError : public Error {
public:
    TransportError(const std::string& what, bool retryable,
                   std::chrono::milliseconds retry_after = std::chrono::milliseconds{0})
        : Error(what), retryable_(retryable), retry_after_(retry_after) {}

    bool retryable() const noexcept { return retryable_; }
    std::chrono::milliseconds retry_after() const noexcept { return retry_after_; }

private:
    bool retryable_;
    std::chrono::milliseconds retry_after_;
};

// Some anchors could not be chained to the reference query.
class DisconnectedGraphError : public Error {
public:
    explicit DisconnectedGraphError(std::vector<std::string> unreachable);

    const std::vector<std::string>& unreachable() const noexcept { return unreachable_; }

private:
    std::vector<std::string> unreachable_;
};

// A refinement hop whose smaller maximum rounded to zero.
class IrrecoverableHopError : public Error {
public:
    IrrecoverableHopError(std::string lower, std::string upper);

    const std::string& lower() const noexcept { return lower_; }
    const std::string& upper() const noexcept { return upper_; }

private:
    std::string lower_;
    std::string upper_;
};

// The bank has no anchor close enough to a rung the optimizer needs.
class SparseBankError : public Error {
public:
    using Error::Error;
};

class StorageError : public Error {
public:
    enum class Kind { io, checksum, version, invalid };

    StorageError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace trendcal
