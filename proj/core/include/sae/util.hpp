#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

// --- string helpers -------------------------------------------------------

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
std::vector<std::string_view> split_csv_line(std::string_view line);

// --- number formatting / parsing ------------------------------------------

// Shortest decimal string that round-trips to the same double. All CSV
// artifacts use this, which is what makes repeated runs byte-identical.
std::string format_double(double value);
std::string format_int(std::int64_t value);

std::optional<double> parse_double(std::string_view s);
std::optional<std::int64_t> parse_int(std::string_view s);

// --- small numerics ---------------------------------------------------------

double logsumexp(std::span<const double> values);

// Type-7 quantile (linear interpolation between order statistics), on an
// already sorted vector.
double quantile_type7_sorted(std::span<const double> sorted, double p);
double quantile_type7(std::vector<double> values, double p);

double mean_of(std::span<const double> values);
// Sample standard deviation (n-1 denominator).
double sd_of(std::span<const double> values);

struct SummaryStats {
    double min, q1, median, mean, q3, max;
};
SummaryStats summary_stats(std::span<const double> values);

// --- checksums --------------------------------------------------------------

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::string to_hex(std::uint64_t value);

// Thread count for the few parallel loops; controlled only by the SAE_THREADS
// environment variable, default 1.
unsigned thread_count();

}  // namespace sae
