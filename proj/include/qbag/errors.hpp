#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qbag {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SizeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PoolExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingDivergence : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LoadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when an external labeler has not answered within the timeout.
/// Carries whatever partial results arrived so the caller can report them.
struct PendingOracle : std::runtime_error {
    PendingOracle(const std::string& what,
                  std::vector<std::pair<long, int>> received_labels,
                  std::vector<long> missing)
        : std::runtime_error(what),
          received(std::move(received_labels)),
          missing_ids(std::move(missing)) {}

    std::vector<std::pair<long, int>> received;
    std::vector<long> missing_ids;
};

}  // namespace qbag
