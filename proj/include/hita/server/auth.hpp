#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "hita/common/json.hpp"

namespace hita::server {

enum class AuthResult { Ok, Unauthorized, RateLimited };

// Keys are held only as SHA-256 hex. Each key gets a token bucket holding
// `per_minute` tokens and refilling at per_minute/60 per wall-clock second;
// per_minute 0 disables limiting.
class ApiKeyTable {
public:
    using Clock = std::chrono::steady_clock;

    explicit ApiKeyTable(double per_minute = 600) : per_minute_(per_minute) {}

    void add_key(const std::string& plain);
    // Accepts "sha256:<hex>" or a bare 64-digit hex digest.
    void add_hashed(const std::string& digest);
    // Entries of a config "api_keys" array: plain keys or {"sha256": hex}.
    void add_from_json(const Json& keys);

    AuthResult check(const std::string& presented) { return check(presented, Clock::now()); }
    AuthResult check(const std::string& presented, Clock::time_point now);

    std::size_t size() const;
    double per_minute() const { return per_minute_; }

private:
    struct Bucket {
        double tokens = 0;
        Clock::time_point last{};
        bool primed = false;
    };
    double per_minute_;
    mutable std::mutex mu_;
    std::map<std::string, Bucket> keys_;
};

}  // namespace hita::server
