#ifndef SKYLINK_ERRORS_HPP
#define SKYLINK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace skylink {

// Invalid configuration (bad probabilities, non-power-of-two grids, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

// A protocol invariant was violated (e.g. quantum pulse above one photon).
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Wavefront reconstruction failed (rank-deficient response matrix).
class ReconstructionError : public std::runtime_error {
public:
    explicit ReconstructionError(const std::string& what) : std::runtime_error(what) {}
};

// Reconciliation could not produce equal keys; the session must abort.
class ReconciliationError : public std::runtime_error {
public:
    explicit ReconciliationError(const std::string& what) : std::runtime_error(what) {}
};

// Pre-shared authentication randomness is exhausted.
class KeyDepletionError : public std::runtime_error {
public:
    explicit KeyDepletionError(const std::string& what) : std::runtime_error(what) {}
};

// Frames and detection records that do not line up slot by slot.
class AlignmentError : public std::runtime_error {
public:
    explicit AlignmentError(const std::string& what) : std::runtime_error(what) {}
};

// Event fed to a state machine out of time order.
class SequencingError : public std::runtime_error {
public:
    explicit SequencingError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace skylink

#endif
