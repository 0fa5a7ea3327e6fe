#include "hita/server/auth.hpp"

#include <algorithm>
#include <cctype>

#include "hita/common/digest.hpp"
#include "hita/common/errors.hpp"

namespace hita::server {

void ApiKeyTable::add_key(const std::string& plain) {
    if (plain.empty()) throw ValidationError("API keys must not be empty");
    std::lock_guard lock(mu_);
    keys_[sha256_hex(plain)];
}

void ApiKeyTable::add_hashed(const std::string& digest) {
    std::string hex = digest.rfind("sha256:", 0) == 0 ? digest.substr(7) : digest;
    std::transform(hex.begin(), hex.end(), hex.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (hex.size() != 64 || !std::all_of(hex.begin(), hex.end(), [](unsigned char c) { return std::isxdigit(c); }))
        throw ValidationError("hashed API key must be 64 hex digits");
    std::lock_guard lock(mu_);
    keys_[hex];
}

void ApiKeyTable::add_from_json(const Json& keys) {
    if (!keys.is_array()) throw ValidationError("'api_keys' must be an array");
    for (const auto& k : keys) {
        if (k.is_string()) {
            const auto s = k.get<std::string>();
            if (s.rfind("sha256:", 0) == 0) add_hashed(s);
            else add_key(s);
        } else if (k.is_object() && k.contains("sha256") && k["sha256"].is_string()) {
            add_hashed(k["sha256"].get<std::string>());
        } else {
            throw ValidationError("API key entries must be strings or {\"sha256\": hex}");
        }
    }
}

AuthResult ApiKeyTable::check(const std::string& presented, Clock::time_point now) {
    if (presented.empty()) return AuthResult::Unauthorized;
    const std::string h = sha256_hex(presented);
    std::lock_guard lock(mu_);
    auto it = keys_.find(h);
    if (it == keys_.end()) return AuthResult::Unauthorized;
    if (per_minute_ <= 0) return AuthResult::Ok;
    Bucket& b = it->second;
    if (!b.primed) {
        b.tokens = per_minute_;
        b.last = now;
        b.primed = true;
    }
    const double elapsed = std::chrono::duration<double>(now - b.last).count();
    if (elapsed > 0) {
        b.tokens = std::min(per_minute_, b.tokens + elapsed * per_minute_ / 60.0);
        b.last = now;
    }
    if (b.tokens < 1.0) return AuthResult::RateLimited;
    b.tokens -= 1.0;
    return AuthResult::Ok;
}

std::size_t ApiKeyTable::size() const {
    std::lock_guard lock(mu_);
    return keys_.size();
}

}  // namespace hita::server
