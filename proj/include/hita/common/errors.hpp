#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hita {

// Input failed a precondition (bad config, bad arguments).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Persisted bytes could not be trusted (truncation, checksum mismatch, wrong version).
class IntegrityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hita
