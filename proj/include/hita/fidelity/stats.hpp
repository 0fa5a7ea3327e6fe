#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hita::fidelity {

class UndefinedSimilarity : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Throws UndefinedSimilarity for a zero vector, std::invalid_argument on length mismatch.
double cosine(const std::vector<double>& u, const std::vector<double>& v);

struct WilcoxonResult {
    double p = 1.0;
    double w_plus = 0;   // sum of ranks of positive differences
    double w_minus = 0;
    std::size_t n = 0;   // non-zero differences
    bool exact = false;
    bool all_zero = false;  // no non-zero differences; p is 1 by convention
};

inline constexpr std::size_t kExactWilcoxonLimit = 20;

// Two-sided signed-rank test on differences a[i] - b[i]. Zero differences are
// dropped, tied |d| share the average rank. Exact null distribution up to
// kExactWilcoxonLimit non-zero pairs, normal approximation with continuity and tie
// correction above.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences);

enum class Magnitude { Negligible, Small, Medium, Large };
std::string to_string(Magnitude m);
Magnitude magnitude_of(double delta);

struct CliffsDelta {
    double delta = 0;
    Magnitude magnitude = Magnitude::Negligible;
    std::uint64_t greater = 0;  // #{a > b}
    std::uint64_t less = 0;     // #{a < b}
};

// O((|A|+|B|) log |B|). Throws std::invalid_argument for an empty sample.
CliffsDelta cliffs_delta(const std::vector<double>& a, const std::vector<double>& b);

struct Summary {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
    std::size_t n = 0;
};

// Quartiles by linear interpolation between closest ranks.
Summary summarize(std::vector<double> v);

}  // namespace hita::fidelity
