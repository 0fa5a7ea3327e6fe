#pragma once

#include <string>
#include <string_view>

namespace hita {

// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::string_view bytes);
    std::string hex();  // finalises

private:
    void* ctx_;
};

}  // namespace hita
