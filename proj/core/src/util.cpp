#include "sae/util.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace sae {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(a[i])) !=
            std::tolower(static_cast<unsigned char>(b[i])))
            return false;
    }
    return true;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

std::string format_double(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

std::string format_int(std::int64_t value) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    double value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return value;
}

double logsumexp(std::span<const double> values) {
    if (values.empty()) return -std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    for (double v : values)
        if (v > max) max = v;
    if (!std::isfinite(max)) return max;
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - max);
    return max + std::log(sum);
}

double quantile_type7_sorted(std::span<const double> sorted, double p) {
    const std::size_t n = sorted.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    if (n == 1) return sorted[0];
    const double h = (static_cast<double>(n) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::clamp(std::floor(h), 0.0, double(n - 1)));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile_type7(std::vector<double> values, double p) {
    std::sort(values.begin(), values.end());
    return quantile_type7_sorted(values, p);
}

double mean_of(std::span<const double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

double sd_of(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return std::numeric_limits<double>::quiet_NaN();
    // A constant vector has sd exactly zero; the summed mean would otherwise
    // leak rounding noise into it.
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    if (*lo == *hi) return 0.0;
    const double m = mean_of(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

SummaryStats summary_stats(std::span<const double> values) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    SummaryStats s{};
    s.min = sorted.empty() ? std::numeric_limits<double>::quiet_NaN() : sorted.front();
    s.max = sorted.empty() ? std::numeric_limits<double>::quiet_NaN() : sorted.back();
    s.q1 = quantile_type7_sorted(sorted, 0.25);
    s.median = quantile_type7_sorted(sorted, 0.50);
    s.q3 = quantile_type7_sorted(sorted, 0.75);
    s.mean = mean_of(sorted);
    return s;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

unsigned thread_count() {
    const char* env = std::getenv("SAE_THREADS");
    if (env == nullptr) return 1;
    const auto parsed = parse_int(env);
    if (!parsed || *parsed < 1) return 1;
    return static_cast<unsigned>(std::min<std::int64_t>(*parsed, 64));
}

}  // namespace sae
