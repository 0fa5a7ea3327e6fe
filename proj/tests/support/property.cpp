#include "property.hpp"

#include <set>

#include "hita/common/digest.hpp"

namespace hita::prop {

std::vector<Property>& registry() {
    static std::vector<Property> all;
    return all;
}

int add(Property p) {
    registry().push_back(std::move(p));
    return static_cast<int>(registry().size());
}

std::uint64_t case_seed(std::uint64_t seed, const std::string& name, std::size_t i) {
    const std::string h = sha256_hex(name);
    return seed ^ std::stoull(h.substr(0, 16), nullptr, 16) ^ (0x9e3779b97f4a7c15ULL * (i + 1));
}

Result run(const Property& p, std::uint64_t seed) {
    Result r;
    for (std::size_t i = 0; i < p.cases; ++i) {
        Rng rng(case_seed(seed, p.name, i));
        try {
            p.body(rng, i);
        } catch (const std::exception& e) {
            r.ok = false;
            r.failing_case = i;
            r.failure = e.what();
            r.cases = i + 1;
            return r;
        }
    }
    r.cases = p.cases;
    return r;
}

std::vector<std::string> modules() {
    std::set<std::string> m;
    for (const auto& p : registry()) m.insert(p.module);
    return {m.begin(), m.end()};
}

}  // namespace hita::prop
