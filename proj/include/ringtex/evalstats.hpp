#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "ringtex/csv.hpp"
#include "ringtex/errors.hpp"
#include "ringtex/fixtures.hpp"

namespace ringtex {

// Survival function of the chi-squared distribution: P(X > x) with k dof,
// via the regularized incomplete gamma function (series / continued
// fraction split at x = a + 1).
inline double chi_squared_sf(double x, double k) {
    if (x <= 0.0) return 1.0;
    const double a = 0.5 * k;
    const double xx = 0.5 * x;
    const double lg = std::lgamma(a);
    if (xx < a + 1.0) {
        // Lower series: P(a, x) = x^a e^-x / Gamma(a) * sum x^n / (a)_n
        double term = 1.0 / a;
        double sum = term;
        double ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1.0;
            term *= xx / ap;
            sum += term;
            if (std::abs(term) < std::abs(sum) * 1e-15) break;
        }
        const double p = sum * std::exp(-xx + a * std::log(xx) - lg);
        return 1.0 - p;
    }
    // Upper continued fraction (Lentz) for Q(a, x).
    double b = xx + 1.0 - a;
    double c = 1e308;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::abs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-xx + a * std::log(xx) - lg) * h;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

struct TrialRecord {
    std::string participant;
    int round;
    std::string presented;
    std::string selected;
    double flat_bumpy;  // [0, 100]
    double cold_hot;    // [0, 100]
    double soft_stiff;  // [0, 100]
};

// Schema: participant,round,presented,selected,flat_bumpy,cold_hot,soft_stiff
inline std::vector<TrialRecord> load_trials_csv(const std::filesystem::path& path) {
    const std::string content = read_file(path);
    const auto lines = split_lines(content);
    const std::string context = path.string();
    if (lines.empty()) {
        throw SchemaError("empty trials file: " + context);
    }
    static const std::array<const char*, 7> cols = {
        "participant", "round", "presented", "selected", "flat_bumpy", "cold_hot", "soft_stiff"};
    const auto header = split_fields(lines[0]);
    if (header.size() != cols.size()) {
        throw SchemaError("trials header needs " + std::to_string(cols.size()) + " columns: " +
                          context);
    }
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (header[i] != cols[i]) {
            throw SchemaError("trials column " + std::to_string(i + 1) + " must be '" +
                              cols[i] + "', found '" + std::string(header[i]) + "': " + context);
        }
    }
    const auto& kinds = texture_kinds();
    auto check_texture = [&](std::string_view v, const char* col, std::size_t line) {
        if (std::find(kinds.begin(), kinds.end(), v) == kinds.end()) {
            throw SchemaError("unknown texture '" + std::string(v) + "' in column '" + col +
                              "', line " + std::to_string(line) + ": " + context);
        }
    };
    auto check_rating = [&](double v, const char* col, std::size_t line) {
        if (!(v >= 0.0 && v <= 100.0)) {
            throw SchemaError("rating out of [0, 100] in column '" + std::string(col) +
                              "', line " + std::to_string(line) + ": " + context);
        }
        return v;
    };
    std::vector<TrialRecord> trials;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != cols.size()) {
            throw SchemaError("line " + std::to_string(i + 1) + " has " +
                              std::to_string(f.size()) + " fields, expected 7: " + context);
        }
        TrialRecord r;
        r.participant = std::string(f[0]);
        const double round_v = parse_double(f[1], context + " column 'round'");
        r.round = static_cast<int>(round_v);
        if (static_cast<double>(r.round) != round_v || r.round < 1) {
            throw SchemaError("round must be a positive integer, line " + std::to_string(i + 1) +
                              ": " + context);
        }
        check_texture(f[2], "presented", i + 1);
        check_texture(f[3], "selected", i + 1);
        r.presented = std::string(f[2]);
        r.selected = std::string(f[3]);
        r.flat_bumpy = check_rating(parse_double(f[4], context), "flat_bumpy", i + 1);
        r.cold_hot = check_rating(parse_double(f[5], context), "cold_hot", i + 1);
        r.soft_stiff = check_rating(parse_double(f[6], context), "soft_stiff", i + 1);
        trials.push_back(std::move(r));
    }
    return trials;
}

struct ConfusionMatrix {
    std::array<std::array<std::size_t, 6>, 6> counts{};       // [presented][selected]
    std::array<std::array<double, 6>, 6> proportions{};       // row-normalized
    std::size_t n = 0;
};

inline std::size_t texture_index(const std::string& name) {
    const auto& kinds = texture_kinds();
    const auto it = std::find(kinds.begin(), kinds.end(), name);
    if (it == kinds.end()) {
        throw SchemaError("unknown texture '" + name + "'");
    }
    return static_cast<std::size_t>(it - kinds.begin());
}

// Tally over every round except the excluded (training) one.
inline ConfusionMatrix build_confusion(const std::vector<TrialRecord>& trials,
                                       int exclude_round = 1) {
    ConfusionMatrix m;
    for (const auto& t : trials) {
        if (t.round == exclude_round) continue;
        ++m.counts[texture_index(t.presented)][texture_index(t.selected)];
        ++m.n;
    }
    if (m.n == 0) {
        throw SchemaError("no trials remain after excluding round " +
                          std::to_string(exclude_round));
    }
    for (std::size_t r = 0; r < 6; ++r) {
        std::size_t row = 0;
        for (auto c : m.counts[r]) row += c;
        for (std::size_t c = 0; c < 6; ++c) {
            m.proportions[r][c] =
                row == 0 ? 0.0
                         : static_cast<double>(m.counts[r][c]) / static_cast<double>(row);
        }
    }
    return m;
}

struct ChiSquaredResult {
    double statistic;
    std::size_t dof_independence;  // (6-1)(6-1), independence-table convention
    std::size_t dof_goodness;      // 5 per nonempty row
    std::size_t n;
    double p_independence;
    double p_goodness;
};

// Pearson statistic against the 1/6 chance level: E = row_total/6 per cell.
inline ChiSquaredResult chi_squared_vs_chance(const ConfusionMatrix& m) {
    if (m.n == 0) {
        throw SchemaError("empty confusion matrix");
    }
    double stat = 0.0;
    std::size_t nonempty = 0;
    for (std::size_t r = 0; r < 6; ++r) {
        std::size_t row = 0;
        for (auto c : m.counts[r]) row += c;
        if (row == 0) continue;
        ++nonempty;
        const double e = static_cast<double>(row) / 6.0;
        for (std::size_t c = 0; c < 6; ++c) {
            const double d = static_cast<double>(m.counts[r][c]) - e;
            stat += d * d / e;
        }
    }
    ChiSquaredResult res{};
    res.statistic = stat;
    res.dof_independence = 25;
    res.dof_goodness = nonempty * 5;
    res.n = m.n;
    res.p_independence = chi_squared_sf(stat, static_cast<double>(res.dof_independence));
    res.p_goodness = chi_squared_sf(stat, static_cast<double>(res.dof_goodness));
    return res;
}

namespace detail {

// Midranks of the pooled sample plus the tie-correction term sum(t^3 - t).
inline std::pair<std::vector<double>, double> midranks(const std::vector<double>& pooled) {
    const std::size_t n = pooled.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
    std::vector<double> ranks(n);
    double tie_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        const auto t = static_cast<double>(j - i + 1);
        tie_sum += t * t * t - t;
        i = j + 1;
    }
    return {std::move(ranks), tie_sum};
}

}  // namespace detail

struct KruskalWallisResult {
    double h;
    std::size_t dof;
    double p;
};

inline KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
    if (groups.size() < 2) {
        throw SchemaError("Kruskal-Wallis needs at least two groups");
    }
    std::vector<double> pooled;
    for (const auto& g : groups) {
        if (g.empty()) {
            throw SchemaError("Kruskal-Wallis group is empty");
        }
        pooled.insert(pooled.end(), g.begin(), g.end());
    }
    const auto n = static_cast<double>(pooled.size());
    const auto [ranks, tie_sum] = detail::midranks(pooled);
    double h = 0.0;
    std::size_t offset = 0;
    for (const auto& g : groups) {
        double rsum = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) rsum += ranks[offset + i];
        h += rsum * rsum / static_cast<double>(g.size());
        offset += g.size();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);
    const double tie_div = 1.0 - tie_sum / (n * n * n - n);
    KruskalWallisResult res{};
    res.dof = groups.size() - 1;
    // All values identical: every observation shares one midrank and H is 0.
    res.h = tie_div <= 0.0 ? 0.0 : h / tie_div;
    res.p = chi_squared_sf(res.h, static_cast<double>(res.dof));
    return res;
}

struct KsResult {
    double d;          // KS distance
    double critical;   // asymptotic 5% critical value
    bool reject_at_05;
    double p;          // asymptotic p-value
    std::size_t n;
    double mean;
    double stddev;
};

namespace detail {

inline double ks_p_asymptotic(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * lambda * lambda * static_cast<double>(k) *
                                     static_cast<double>(k));
        sum += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(sum, 0.0, 1.0);
}

}  // namespace detail

// One-sample KS distance against a specified normal distribution, with the
// standard asymptotic 5% critical value 1.358/sqrt(n).
inline KsResult ks_test_normal(std::vector<double> sample, double mean, double stddev) {
    const std::size_t n = sample.size();
    if (n < 5) {
        throw SchemaError("KS test needs at least 5 samples");
    }
    if (!(stddev > 0.0)) {
        throw ZeroVarianceError("KS reference normal needs positive spread");
    }
    std::sort(sample.begin(), sample.end());
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double f = normal_cdf((sample[i] - mean) / stddev);
        const double lo = static_cast<double>(i) / static_cast<double>(n);
        const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
        d = std::max({d, f - lo, hi - f});
    }
    KsResult res{};
    res.d = d;
    res.n = n;
    res.mean = mean;
    res.stddev = stddev;
    res.critical = 1.358 / std::sqrt(static_cast<double>(n));
    res.reject_at_05 = d > res.critical;
    res.p = detail::ks_p_asymptotic(d, n);
    return res;
}

// Normality screening with parameters estimated from the sample. With
// estimated parameters the standard critical value is conservative
// (Lilliefors caveat); documented, not corrected.
inline KsResult ks_normality(const std::vector<double>& sample) {
    const std::size_t n = sample.size();
    if (n < 5) {
        throw SchemaError("KS test needs at least 5 samples");
    }
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : sample) ss += (v - mean) * (v - mean);
    if (ss <= 0.0) {
        throw ZeroVarianceError("constant sample has no spread to test");
    }
    const double stddev = std::sqrt(ss / static_cast<double>(n - 1));
    return ks_test_normal(sample, mean, stddev);
}

}  // namespace ringtex
