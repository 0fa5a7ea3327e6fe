#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hita/common/rng.hpp"

// Minimal property-testing harness: a property is a body run once per case with
// its own seeded generator. A failing case reports its index so it can be re-run.
namespace hita::prop {

inline constexpr std::size_t kMinCases = 200;

class Failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void check(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

struct Property {
    std::string module;
    std::string name;
    std::size_t cases = kMinCases;
    std::function<void(Rng&, std::size_t)> body;
};

std::vector<Property>& registry();
int add(Property p);

struct Result {
    std::size_t cases = 0;
    bool ok = true;
    std::size_t failing_case = 0;
    std::string failure;
};

// Case i runs with Rng(case_seed(seed, name, i)).
std::uint64_t case_seed(std::uint64_t seed, const std::string& name, std::size_t i);
Result run(const Property& p, std::uint64_t seed = 20240301);
std::vector<std::string> modules();

}  // namespace hita::prop

#define HITA_PROP_CONCAT2(a, b) a##b
#define HITA_PROP_CONCAT(a, b) HITA_PROP_CONCAT2(a, b)

// PROPERTY("mbdt", determinism, 200) { ... rng, iteration available ... }
#define PROPERTY(module, name, n)                                                                                    \
    static void HITA_PROP_CONCAT(prop_body_, name)(::hita::Rng & rng, std::size_t iteration);                        \
    [[maybe_unused]] static const int HITA_PROP_CONCAT(prop_reg_, name) =                                           \
        ::hita::prop::add({module, #name, n, HITA_PROP_CONCAT(prop_body_, name)});                                   \
    static void HITA_PROP_CONCAT(prop_body_, name)([[maybe_unused]] ::hita::Rng & rng, [[maybe_unused]] std::size_t iteration)
