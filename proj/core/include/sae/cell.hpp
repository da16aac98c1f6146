#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sae {

// A demographic cell is one race x ethnicity x gender x age-band combination.
// Level lists are data: other factorizations can be configured, the shipped
// default is the 4 x 2 x 2 x 7 US layout (112 cells).
struct CellSchema {
    std::vector<std::string> race{"White", "Black", "Asian", "Other"};
    // NonHispanic first: intercepts are ordered race-major with the
    // non-Hispanic level at even positions (White-NonHispanic = 0).
    std::vector<std::string> ethnicity{"NonHispanic", "Hispanic"};
    std::vector<std::string> gender{"Male", "Female"};
    int age_bands = 7;

    std::size_t cell_count() const {
        return race.size() * ethnicity.size() * gender.size() *
               static_cast<std::size_t>(age_bands);
    }
    std::size_t intercept_count() const { return race.size() * ethnicity.size(); }

    bool operator==(const CellSchema&) const = default;
};

// Level indices into a CellSchema; age_band is 1-based (1..age_bands).
struct CellKey {
    std::uint16_t race = 0;
    std::uint16_t ethnicity = 0;
    std::uint16_t gender = 0;
    std::uint16_t age_band = 1;

    bool operator==(const CellKey&) const = default;
};

// Dense index 0..cell_count-1; bijective with CellKey for a fixed schema.
std::size_t cell_index(const CellSchema& schema, const CellKey& key);
CellKey cell_key(const CellSchema& schema, std::size_t index);

// Race-major then ethnicity; the model intercept block is indexed this way.
std::size_t intercept_index(const CellSchema& schema, const CellKey& key);

// Case-insensitive exact level lookup; nullopt when the spelling is unknown.
std::optional<std::uint16_t> find_level(const std::vector<std::string>& levels,
                                        std::string_view text);

std::string cell_label(const CellSchema& schema, const CellKey& key);

}  // namespace sae
