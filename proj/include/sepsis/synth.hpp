#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sepsis/cohort_filter.hpp"
#include "sepsis/stay.hpp"

namespace sepsis {

/// Synthetic cohort with planted suspected-infection events and onsets.
struct SynthConfig {
    std::size_t n_stays = 200;
    double case_fraction = 0.2;
    std::uint64_t seed = 0;
    /// Bounds on the ICU length of stay of regular (non-specimen) stays.
    double los_min = 30.0;
    double los_max = 96.0;
    /// Planted onsets are whole hours in this range.
    int onset_min = 6;
    int onset_max = 48;
    /// Expected measurements per hour; variables not listed are never measured.
    std::map<std::string, double> measurement_rates;
    /// Scales the pre-onset drift of vitals and inflammation markers.
    double signal_strength = 1.0;
    int site_count = 1;
    /// Added to case_fraction per site.
    std::vector<double> site_prevalence_offsets;
    /// Shift of each site's baseline means, in between-stay sd units.
    std::vector<double> site_shifts;
    /// Fraction of stays replaced by exclusion specimens, spread evenly over
    /// the reasons that can be planted.
    double exclusion_fraction = 0.0;
    /// Fraction of controls carrying a decoy (SI without deterioration,
    /// deterioration without SI, or sedation with low GCS).
    double decoy_fraction = 0.3;
    std::string id_prefix = "s";

    static std::map<std::string, double> default_rates();
    /// Throws InfeasibleError.
    void validate() const;
    nlohmann::json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j, SynthConfig base);
    static SynthConfig from_json(const nlohmann::json& j) { return from_json(j, SynthConfig()); }
};

struct PlantedStay {
    std::string stay_id;
    std::string site_id;
    std::optional<double> onset;
    std::vector<double> si_times; // ascending
    std::optional<ExclusionReason> exclusion;
};

struct SynthCohort {
    std::vector<RawEvent> events;
    std::vector<StayStatic> statics;
    std::vector<TreatmentLog> treatments;
    std::vector<PlantedStay> truth;
};

/// Exclusion reasons the generator can plant. An onset outside the stay is
/// not reachable through onset detection on the stay's own grid.
std::vector<ExclusionReason> plantable_exclusions();

SynthCohort generate(const SynthConfig& cfg);

} // namespace sepsis
