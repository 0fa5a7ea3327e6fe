#include "hita/fidelity/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hita::fidelity {

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) throw std::invalid_argument("cosine: length mismatch");
    double dot = 0, nu = 0, nv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0 || nv == 0) throw UndefinedSimilarity("cosine similarity of a zero vector");
    const double c = dot / (std::sqrt(nu) * std::sqrt(nv));
    return std::clamp(c, -1.0, 1.0);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("wilcoxon: samples must be paired");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return wilcoxon_signed_rank(d);
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences) {
    WilcoxonResult r;
    std::vector<double> d;
    for (double x : differences)
        if (x != 0) d.push_back(x);
    r.n = d.size();
    if (d.empty()) {
        r.all_zero = true;
        r.exact = true;
        return r;
    }
    const std::size_t n = d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });

    // Doubled ranks keep tied averages integral.
    std::vector<std::uint64_t> rank2(n);
    double tie_term = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
        const std::uint64_t r2 = (i + 1) + (j + 1);
        for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    std::uint64_t wp2 = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (d[i] > 0) wp2 += rank2[i];
    }
    r.w_plus = static_cast<double>(wp2) / 2.0;
    r.w_minus = static_cast<double>(total2 - wp2) / 2.0;

    if (n <= kExactWilcoxonLimit) {
        r.exact = true;
        // count[s] = number of sign assignments whose doubled positive-rank sum is s
        std::vector<std::uint64_t> count(total2 + 1, 0);
        count[0] = 1;
        std::uint64_t reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            reach += rank2[i];
            for (std::uint64_t s = reach; s >= rank2[i]; --s) {
                count[s] += count[s - rank2[i]];
                if (s == rank2[i]) break;
            }
        }
        std::uint64_t le = 0, ge = 0;
        for (std::uint64_t s = 0; s <= total2; ++s) {
            if (s <= wp2) le += count[s];
            if (s >= wp2) ge += count[s];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        r.p = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / all);
        return r;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1) / 4.0;
    const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
    if (!(var > 0)) return r;
    const double z = (std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
    r.p = z <= 0 ? 1.0 : std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
    return r;
}

std::string to_string(Magnitude m) {
    switch (m) {
        case Magnitude::Negligible: return "negligible";
        case Magnitude::Small: return "small";
        case Magnitude::Medium: return "medium";
        case Magnitude::Large: return "large";
    }
    return "?";
}

Magnitude magnitude_of(double delta) {
    const double a = std::abs(delta);
    if (a < 0.147) return Magnitude::Negligible;
    if (a < 0.33) return Magnitude::Small;
    if (a < 0.474) return Magnitude::Medium;
    return Magnitude::Large;
}

CliffsDelta cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("cliffs_delta: empty sample");
    std::vector<double> sb = b;
    std::sort(sb.begin(), sb.end());
    CliffsDelta r;
    for (double x : a) {
        r.greater += static_cast<std::uint64_t>(std::lower_bound(sb.begin(), sb.end(), x) - sb.begin());
        r.less += static_cast<std::uint64_t>(sb.end() - std::upper_bound(sb.begin(), sb.end(), x));
    }
    const double pairs = static_cast<double>(a.size()) * static_cast<double>(b.size());
    r.delta = (static_cast<double>(r.greater) - static_cast<double>(r.less)) / pairs;
    r.magnitude = magnitude_of(r.delta);
    return r;
}

Summary summarize(std::vector<double> v) {
    Summary s;
    s.n = v.size();
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    auto q = [&](double f) {
        const double pos = f * static_cast<double>(v.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
    };
    s.min = v.front();
    s.max = v.back();
    s.q1 = q(0.25);
    s.median = q(0.5);
    s.q3 = q(0.75);
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return s;
}

}  // namespace hita::fidelity
