#include "sepsis/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sepsis/error.hpp"
#include "sepsis/rng.hpp"

namespace sepsis {

using nlohmann::json;

namespace {

// Stationary model of one measured variable. Values are clipped to
// [lo, hi], which stays inside the catalog's plausible range and, for the
// organ-function inputs, inside the normal band so that controls never
// accumulate organ-failure points.
struct VariableModel {
    const char* id;
    double mean;
    double between_sd; // stay-to-stay spread of the baseline
    double noise_sd;   // measurement-to-measurement spread
    double lo;
    double hi;
    double rate;  // default measurements per hour
    double drift; // shift reached at onset for signal strength 1
};

// clang-format off
constexpr VariableModel kModels[] = {
    {"hr",     80.0,  8.0,  6.0,  40.0, 180.0, 1.0,  28.0},
    {"sbp",   120.0, 10.0,  8.0,  75.0, 190.0, 1.0, -22.0},
    {"dbp",    65.0,  6.0,  5.0,  35.0, 110.0, 1.0,  -6.0},
    {"map",    85.0,  4.0,  3.0,  72.0, 110.0, 1.0,   0.0},
    {"resp",   16.0,  2.0,  2.0,   8.0,  45.0, 1.0,   9.0},
    {"temp",   37.0,  0.3,  0.2,  35.5,  41.0, 0.5,   1.4},
    {"o2sat",  97.0,  1.0,  1.0,  88.0, 100.0, 1.0,  -3.0},
    {"urine", 100.0, 15.0, 20.0,  40.0, 250.0, 1.0,   0.0},
    {"fio2",   21.0,  0.0,  0.0,  21.0,  21.0, 0.2,   0.0},
    {"lact",    1.2,  0.3,  0.2,   0.4,  12.0, 0.15,  2.5},
    {"wbc",     8.0,  1.5,  1.0,   4.5,  30.0, 0.15,  7.0},
    {"crp",    20.0, 10.0,  5.0,   0.5, 400.0, 0.15, 90.0},
    {"plt",   250.0, 30.0, 15.0, 160.0, 400.0, 0.15,  0.0},
    {"bili",    0.6,  0.1,  0.08,  0.2,   1.0, 0.15,  0.0},
    {"crea",    0.8,  0.1,  0.08,  0.4,   1.1, 0.15,  0.0},
    {"po2",   110.0,  8.0,  8.0,  90.0, 160.0, 0.15,  0.0},
    {"pco2",   40.0,  3.0,  2.0,  33.0,  48.0, 0.15,  0.0},
    {"ph",      7.40, 0.03, 0.02,  7.2,   7.5, 0.15, -0.06},
    {"bun",    15.0,  3.0,  2.0,   5.0,  40.0, 0.15,  0.0},
    {"na",    140.0,  2.0,  1.5, 130.0, 150.0, 0.15,  0.0},
    {"k",       4.2,  0.3,  0.2,   3.2,   5.2, 0.15,  0.0},
    {"cl",    104.0,  2.0,  1.5,  95.0, 112.0, 0.15,  0.0},
    {"bicar",  24.0,  2.0,  1.0,  18.0,  30.0, 0.15,  0.0},
    {"glu",   120.0, 20.0, 15.0,  70.0, 250.0, 0.15,  0.0},
    {"hgb",    12.0,  1.0,  0.5,   8.0,  16.0, 0.15,  0.0},
    {"hct",    36.0,  3.0,  1.5,  25.0,  48.0, 0.15,  0.0},
    {"bnd",     3.0,  1.5,  1.0,   0.0,  10.0, 0.1,   0.0},
    {"neut",   65.0,  6.0,  4.0,  40.0,  90.0, 0.1,   0.0},
    {"tgcs",   15.0,  0.0,  0.0,  15.0,  15.0, 0.25,  0.0},
};
// clang-format on

const VariableModel* find_model(std::string_view id) {
    for (const auto& m : kModels)
        if (id == m.id) return &m;
    return nullptr;
}

enum class Role { control, case_, specimen };
enum class Decoy { none, si_only, deterioration_only, sedation_low_gcs };

struct Plan {
    Role role = Role::control;
    std::optional<ExclusionReason> specimen;
    std::string site;
};

// A suspected-infection pair: antibiotics a and sampling c. Either
// antibiotics first with sampling within 24 h, or sampling first with
// antibiotics within 72 h; the SI time is the earlier of the two.
void plant_si(Rng& rng, double si_time, TreatmentLog& log, bool second_dose) {
    double abx = si_time, sampling = si_time;
    if (rng.bernoulli(0.5))
        sampling = si_time + rng.uniform(0.0, 23.5);
    else
        abx = si_time + rng.uniform(0.0, 71.5);
    log.antibiotics.push_back(abx);
    log.fluid_samplings.push_back(sampling);
    if (second_dose) log.antibiotics.push_back(abx + rng.uniform(2.0, 20.0));
}

struct StayGenerator {
    const SynthConfig& cfg;
    Rng rng;
    std::string id;
    int site_index = 0;
    std::vector<RawEvent> events;

    void add(std::string_view var, double t, double value, std::string unit = {}) {
        events.push_back({id, std::string(var), t, value, std::move(unit)});
    }

    // Emits value in a non-canonical unit now and then to exercise conversion.
    void add_measurement(std::string_view var, double t, double value) {
        if (var == "temp" && rng.bernoulli(0.1)) {
            add(var, t, value * 9.0 / 5.0 + 32.0, "F");
        } else if (var == "glu" && rng.bernoulli(0.1)) {
            add(var, t, value / 18.018, "mmol/L");
        } else {
            add(var, t, value);
        }
    }
};

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

} // namespace

std::map<std::string, double> SynthConfig::default_rates() {
    std::map<std::string, double> r;
    for (const auto& m : kModels) r[m.id] = m.rate;
    return r;
}

std::vector<ExclusionReason> plantable_exclusions() {
    return {ExclusionReason::non_adult,        ExclusionReason::short_stay,
            ExclusionReason::sparse_measurements, ExclusionReason::long_gap,
            ExclusionReason::onset_too_early,  ExclusionReason::onset_too_late};
}

void SynthConfig::validate() const {
    if (n_stays == 0) throw InfeasibleError("synth: n_stays must be > 0");
    if (!(case_fraction >= 0.0 && case_fraction <= 1.0)) throw InfeasibleError("synth: case_fraction must be in [0, 1]");
    if (onset_min < 4 || onset_max > 168 || onset_min > onset_max)
        throw InfeasibleError("synth: onset range must lie within [4, 168]");
    if (!(los_min < los_max)) throw InfeasibleError("synth: los_min must be < los_max");
    if (std::max<double>(onset_min, std::ceil(los_min - 25.0)) > std::min<double>(onset_max, std::floor(los_max - 25.0)))
        throw InfeasibleError("synth: no onset hour fits the length-of-stay range (need onset + 25 h inside it)");
    for (const auto& [var, rate] : measurement_rates) {
        if (!find_model(var)) throw InfeasibleError("synth: no generator model for variable '" + var + "'");
        if (!(rate > 0.0)) throw InfeasibleError("synth: measurement rate for '" + var + "' must be > 0");
    }
    for (const char* required : {"hr", "map"})
        if (!measurement_rates.empty() && !measurement_rates.count(required))
            throw InfeasibleError(std::string("synth: measurement_rates must include '") + required + "'");
    if (!(signal_strength >= 0.0)) throw InfeasibleError("synth: signal_strength must be >= 0");
    if (site_count < 1) throw InfeasibleError("synth: site_count must be >= 1");
    if (site_prevalence_offsets.size() > static_cast<std::size_t>(site_count) ||
        site_shifts.size() > static_cast<std::size_t>(site_count))
        throw InfeasibleError("synth: more per-site entries than sites");
    if (!(exclusion_fraction >= 0.0 && exclusion_fraction <= 1.0))
        throw InfeasibleError("synth: exclusion_fraction must be in [0, 1]");
    if (!(decoy_fraction >= 0.0 && decoy_fraction <= 1.0)) throw InfeasibleError("synth: decoy_fraction must be in [0, 1]");
}

json SynthConfig::to_json() const {
    return {{"n_stays", n_stays},
            {"case_fraction", case_fraction},
            {"seed", seed},
            {"los_min", los_min},
            {"los_max", los_max},
            {"onset_min", onset_min},
            {"onset_max", onset_max},
            {"measurement_rates", measurement_rates.empty() ? default_rates() : measurement_rates},
            {"signal_strength", signal_strength},
            {"site_count", site_count},
            {"site_prevalence_offsets", site_prevalence_offsets},
            {"site_shifts", site_shifts},
            {"exclusion_fraction", exclusion_fraction},
            {"decoy_fraction", decoy_fraction},
            {"id_prefix", id_prefix}};
}

SynthConfig SynthConfig::from_json(const json& j, SynthConfig c) {
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "n_stays") c.n_stays = v.get<std::size_t>();
            else if (key == "case_fraction") c.case_fraction = v.get<double>();
            else if (key == "seed") c.seed = v.get<std::uint64_t>();
            else if (key == "los_min") c.los_min = v.get<double>();
            else if (key == "los_max") c.los_max = v.get<double>();
            else if (key == "onset_min") c.onset_min = v.get<int>();
            else if (key == "onset_max") c.onset_max = v.get<int>();
            else if (key == "measurement_rates") c.measurement_rates = v.get<std::map<std::string, double>>();
            else if (key == "signal_strength") c.signal_strength = v.get<double>();
            else if (key == "site_count") c.site_count = v.get<int>();
            else if (key == "site_prevalence_offsets") c.site_prevalence_offsets = v.get<std::vector<double>>();
            else if (key == "site_shifts") c.site_shifts = v.get<std::vector<double>>();
            else if (key == "exclusion_fraction") c.exclusion_fraction = v.get<double>();
            else if (key == "decoy_fraction") c.decoy_fraction = v.get<double>();
            else if (key == "id_prefix") c.id_prefix = v.get<std::string>();
            else throw SchemaError("synth config: unknown key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("synth config: ") + e.what());
    }
    return c;
}

SynthCohort generate(const SynthConfig& cfg) {
    cfg.validate();
    const auto rates = cfg.measurement_rates.empty() ? SynthConfig::default_rates() : cfg.measurement_rates;
    const std::size_t n = cfg.n_stays;
    const int onset_lo = static_cast<int>(std::max<double>(cfg.onset_min, std::ceil(cfg.los_min - 25.0)));
    const int onset_hi = static_cast<int>(std::min<double>(cfg.onset_max, std::floor(cfg.los_max - 25.0)));

    // Layout: which stays are exclusion specimens, and their sites.
    std::vector<Plan> plans(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int site = static_cast<int>(i % static_cast<std::size_t>(cfg.site_count));
        plans[i].site = cfg.site_count == 1 ? "site0" : "site" + std::to_string(site);
    }
    const auto reasons = plantable_exclusions();
    const auto n_specimens = static_cast<std::size_t>(std::llround(cfg.exclusion_fraction * static_cast<double>(n)));
    {
        Rng layout(derive_seed(cfg.seed, ~std::uint64_t{0}));
        auto slots = layout.sample_without_replacement(n, n_specimens);
        for (std::size_t k = 0; k < slots.size(); ++k) {
            plans[slots[k]].role = Role::specimen;
            plans[slots[k]].specimen = reasons[k % reasons.size()];
        }
    }

    SynthCohort out;
    const std::size_t width = std::max<std::size_t>(5, std::to_string(n).size());
    for (std::size_t i = 0; i < n; ++i) {
        StayGenerator g{cfg, Rng(derive_seed(cfg.seed, i)), {}, 0, {}};
        const std::string digits = std::to_string(i);
        g.id = cfg.id_prefix + std::string(width - std::min(width, digits.size()), '0') + digits;
        g.site_index = static_cast<int>(i % static_cast<std::size_t>(cfg.site_count));
        Rng& rng = g.rng;
        Plan plan = plans[i];

        const double offset = static_cast<std::size_t>(g.site_index) < cfg.site_prevalence_offsets.size()
                                  ? cfg.site_prevalence_offsets[static_cast<std::size_t>(g.site_index)]
                                  : 0.0;
        const bool drawn_case = rng.bernoulli(clip(cfg.case_fraction + offset, 0.0, 1.0));
        if (plan.role == Role::control && drawn_case) plan.role = Role::case_;

        PlantedStay truth;
        truth.stay_id = g.id;
        truth.site_id = plan.site;
        truth.exclusion = plan.specimen;

        StayStatic st;
        st.stay_id = g.id;
        st.site_id = plan.site;
        st.age = std::round(rng.uniform(18.0, 90.0));
        st.sex = rng.bernoulli(0.55) ? Sex::male : Sex::female;
        st.height = std::round(clip(rng.normal(st.sex == Sex::male ? 176.0 : 164.0, 8.0), 140.0, 210.0));
        st.weight = std::round(clip(rng.normal(80.0, 15.0), 40.0, 200.0));

        TreatmentLog tx;
        tx.stay_id = g.id;

        // Onset and length of stay. Controls get the exposure of a case
        // (onset + 25 h) so that stream length carries no label information.
        std::optional<int> onset;
        const int o_draw = static_cast<int>(rng.between(onset_lo, onset_hi));
        double los = o_draw + 25.0;
        bool is_case = plan.role == Role::case_;
        const auto spec = plan.specimen;
        if (spec == ExclusionReason::onset_too_early) {
            is_case = true;
            onset = static_cast<int>(rng.between(1, 3));
        } else if (spec == ExclusionReason::onset_too_late) {
            is_case = true;
            onset = static_cast<int>(rng.between(169, 190));
        } else if (is_case) {
            onset = o_draw;
        }
        if (onset) {
            const double tail = std::max(0.0, cfg.los_max - (*onset + 25.0));
            los = *onset + 25.0 + rng.uniform(0.0, tail);
            if (spec) los = *onset + 25.0 + rng.uniform(0.0, 5.0);
        }
        if (spec == ExclusionReason::non_adult) st.age = static_cast<double>(rng.between(1, 13));
        if (spec == ExclusionReason::short_stay) los = rng.uniform(2.0, 5.9);
        if (spec == ExclusionReason::sparse_measurements) los = rng.uniform(24.0, 48.0);
        if (spec == ExclusionReason::long_gap) los = std::max(los, 40.0);
        st.icu_los_hours = los;
        const long n_hours = static_cast<long>(std::ceil(los));

        // Measurement blackouts for specimens.
        std::vector<std::uint8_t> measure_hour(static_cast<std::size_t>(n_hours), 1);
        if (spec == ExclusionReason::long_gap) {
            const long len = rng.between(13, 20);
            const long start = rng.between(4, n_hours - len - 2);
            for (long h = start; h < start + len; ++h) measure_hour[static_cast<std::size_t>(h)] = 0;
        } else if (spec == ExclusionReason::sparse_measurements) {
            std::fill(measure_hour.begin(), measure_hour.end(), 0);
            const auto k = static_cast<std::size_t>(rng.between(1, 3));
            for (auto h : rng.sample_without_replacement(static_cast<std::size_t>(n_hours), k)) measure_hour[h] = 1;
        }

        // Suspected infection, deterioration and decoys.
        enum class Deterioration { none, vasopressor, gcs_drop } det = Deterioration::none;
        Decoy decoy = Decoy::none;
        double gcs_low = 15.0;
        if (onset) {
            const double o = *onset;
            const double si = rng.uniform(std::max(0.5, o - 12.0), o + 6.0);
            plant_si(rng, si, tx, rng.bernoulli(0.5));
            truth.si_times.push_back(si);
            truth.onset = o;
            if (rng.bernoulli(0.5)) {
                det = Deterioration::vasopressor;
                tx.vasopressors.push_back({Vasopressor::norepinephrine, {o + 0.2, los}, rng.uniform(0.05, 0.3)});
            } else {
                det = Deterioration::gcs_drop;
                gcs_low = static_cast<double>(rng.between(9, 12));
            }
        } else if (!spec && rng.bernoulli(cfg.decoy_fraction)) {
            decoy = static_cast<Decoy>(1 + rng.below(3));
        }
        const double sed_start = std::floor(rng.uniform(2.0, std::max(2.5, los - 14.0))) + 0.2;
        const double sed_end = sed_start + static_cast<double>(rng.between(3, 10)) + 0.1;
        const double sed_low = static_cast<double>(rng.between(5, 8));
        switch (decoy) {
        case Decoy::si_only: {
            const double si = rng.uniform(0.5, los - 1.0);
            plant_si(rng, si, tx, rng.bernoulli(0.5));
            truth.si_times.push_back(si);
            break;
        }
        case Decoy::deterioration_only:
            tx.vasopressors.push_back(
                {Vasopressor::norepinephrine, {rng.uniform(2.0, los - 2.0), los}, rng.uniform(0.05, 0.3)});
            break;
        case Decoy::sedation_low_gcs: {
            const double si = rng.uniform(0.5, los - 1.0);
            plant_si(rng, si, tx, false);
            truth.si_times.push_back(si);
            tx.sedation.push_back({sed_start, sed_end});
            break;
        }
        case Decoy::none: break;
        }
        std::sort(truth.si_times.begin(), truth.si_times.end());

        // Per-stay baselines.
        const double shift = static_cast<std::size_t>(g.site_index) < cfg.site_shifts.size()
                                 ? cfg.site_shifts[static_cast<std::size_t>(g.site_index)]
                                 : 0.0;
        std::vector<const VariableModel*> models;
        std::vector<double> base;
        std::vector<double> rate;
        int k = 0;
        for (const auto& m : kModels) {
            auto it = rates.find(m.id);
            ++k;
            if (it == rates.end()) continue;
            models.push_back(&m);
            rate.push_back(it->second);
            const double dir = (k % 2 == 0) ? 1.0 : -1.0;
            base.push_back(m.mean + dir * shift * m.between_sd + m.between_sd * rng.normal());
        }

        auto drift_at = [&](double t) {
            if (!onset) return 0.0;
            const double ramp = clip((t - (*onset - 12.0)) / 12.0, 0.0, 1.0);
            return cfg.signal_strength * ramp;
        };

        for (long h = 0; h < n_hours; ++h) {
            if (!measure_hour[static_cast<std::size_t>(h)]) continue;
            for (std::size_t v = 0; v < models.size(); ++v) {
                const VariableModel& m = *models[v];
                const std::string_view var = m.id;
                const bool urine = var == "urine";
                const bool gcs = var == "tgcs";
                int count = urine ? 1 : rng.poisson(rate[v]);
                if (gcs && det == Deterioration::gcs_drop && h == *onset) count = 0;
                for (int c = 0; c < count; ++c) {
                    const double t = static_cast<double>(h) + rng.uniform();
                    if (t >= los) continue;
                    double value = base[v] + m.drift * drift_at(t) + m.noise_sd * rng.normal();
                    value = clip(value, m.lo + std::min(0.0, m.drift) * cfg.signal_strength,
                                 m.hi + std::max(0.0, m.drift) * cfg.signal_strength);
                    if (gcs) {
                        value = 15.0;
                        if (det == Deterioration::gcs_drop && t >= *onset) value = gcs_low;
                    }
                    g.add_measurement(var, t, value);
                }
            }
        }
        if (det == Deterioration::gcs_drop) g.add("tgcs", *onset + 0.3, gcs_low);
        if (decoy == Decoy::sedation_low_gcs) {
            g.add("tgcs", sed_start + 0.3, sed_low);
            g.add("tgcs", std::floor(sed_end) + 0.7, 15.0);
        }

        std::stable_sort(g.events.begin(), g.events.end(),
                         [](const RawEvent& a, const RawEvent& b) { return a.time < b.time; });
        out.events.insert(out.events.end(), std::make_move_iterator(g.events.begin()),
                          std::make_move_iterator(g.events.end()));
        out.statics.push_back(std::move(st));
        out.treatments.push_back(std::move(tx));
        out.truth.push_back(std::move(truth));
    }
    return out;
}

} // namespace sepsis
