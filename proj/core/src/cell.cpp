#include "sae/cell.hpp"

#include "sae/errors.hpp"
#include "sae/util.hpp"

namespace sae {

std::size_t cell_index(const CellSchema& schema, const CellKey& key) {
    const std::size_t n_eth = schema.ethnicity.size();
    const std::size_t n_gender = schema.gender.size();
    const std::size_t n_age = static_cast<std::size_t>(schema.age_bands);
    if (key.race >= schema.race.size() || key.ethnicity >= n_eth || key.gender >= n_gender ||
        key.age_band < 1 || key.age_band > schema.age_bands)
        throw Error(errc::internal_error, "cell key out of range for schema");
    return ((static_cast<std::size_t>(key.race) * n_eth + key.ethnicity) * n_gender +
            key.gender) *
               n_age +
           (static_cast<std::size_t>(key.age_band) - 1);
}

CellKey cell_key(const CellSchema& schema, std::size_t index) {
    const std::size_t n_eth = schema.ethnicity.size();
    const std::size_t n_gender = schema.gender.size();
    const std::size_t n_age = static_cast<std::size_t>(schema.age_bands);
    if (index >= schema.cell_count())
        throw Error(errc::internal_error, "cell index out of range for schema");
    CellKey key;
    key.age_band = static_cast<std::uint16_t>(index % n_age + 1);
    index /= n_age;
    key.gender = static_cast<std::uint16_t>(index % n_gender);
    index /= n_gender;
    key.ethnicity = static_cast<std::uint16_t>(index % n_eth);
    key.race = static_cast<std::uint16_t>(index / n_eth);
    return key;
}

std::size_t intercept_index(const CellSchema& schema, const CellKey& key) {
    return static_cast<std::size_t>(key.race) * schema.ethnicity.size() + key.ethnicity;
}

std::optional<std::uint16_t> find_level(const std::vector<std::string>& levels,
                                        std::string_view text) {
    for (std::size_t i = 0; i < levels.size(); ++i)
        if (iequals(levels[i], trim(text))) return static_cast<std::uint16_t>(i);
    return std::nullopt;
}

std::string cell_label(const CellSchema& schema, const CellKey& key) {
    return schema.race[key.race] + ":" + schema.ethnicity[key.ethnicity] + ":" +
           schema.gender[key.gender] + ":" + format_int(key.age_band);
}

}  // namespace sae
