#include "sepsis/cohort_filter.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "sepsis/error.hpp"

namespace sepsis {

std::string_view to_string(ExclusionReason r) {
    switch (r) {
    case ExclusionReason::non_adult: return "non-adult";
    case ExclusionReason::short_stay: return "short-stay";
    case ExclusionReason::sparse_measurements: return "sparse-measurements";
    case ExclusionReason::long_gap: return "long-gap";
    case ExclusionReason::onset_outside_icu: return "onset-outside-icu";
    case ExclusionReason::onset_too_early: return "onset-too-early";
    case ExclusionReason::onset_too_late: return "onset-too-late";
    case ExclusionReason::low_prevalence_site: return "low-prevalence-site";
    }
    return "?";
}

ExclusionReason exclusion_reason_from_string(std::string_view s) {
    for (auto r : kAllExclusionReasons)
        if (to_string(r) == s) return r;
    throw SchemaError("unknown exclusion reason '" + std::string(s) + "'");
}

namespace {
std::vector<std::uint8_t> measured_mask(const HourlyStay& stay) {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(stay.n_hours), 0);
    for (const auto& c : stay.counts)
        for (std::size_t t = 0; t < m.size(); ++t)
            if (c[t] > 0) m[t] = 1;
    return m;
}
} // namespace

int measured_hours(const HourlyStay& stay) {
    auto m = measured_mask(stay);
    return static_cast<int>(std::count(m.begin(), m.end(), 1));
}

int longest_gap(const HourlyStay& stay) {
    int best = 0;
    int run = 0;
    for (auto x : measured_mask(stay)) {
        run = x ? 0 : run + 1;
        best = std::max(best, run);
    }
    return best;
}

std::optional<Exclusion> filter_stay(const HourlyStay& stay, const SepsisAnnotation& annotation,
                                     const FilterRules& rules) {
    const StayStatic& s = stay.statics;
    if (s.age < rules.min_age) return Exclusion{ExclusionReason::non_adult, s.age};
    if (s.icu_los_hours < rules.min_los_hours) return Exclusion{ExclusionReason::short_stay, s.icu_los_hours};
    const int measured = measured_hours(stay);
    if (measured < rules.min_measured_hours)
        return Exclusion{ExclusionReason::sparse_measurements, static_cast<double>(measured)};
    const int gap = longest_gap(stay);
    if (gap > rules.max_gap_hours) return Exclusion{ExclusionReason::long_gap, static_cast<double>(gap)};
    if (annotation.onset) {
        const double o = *annotation.onset;
        if (o < 0.0 || o >= s.icu_los_hours) return Exclusion{ExclusionReason::onset_outside_icu, o};
        if (o < rules.min_onset) return Exclusion{ExclusionReason::onset_too_early, o};
        if (o > rules.max_onset) return Exclusion{ExclusionReason::onset_too_late, o};
    }
    return std::nullopt;
}

SiteFilterResult filter_sites(std::span<const SiteMember> members, double min_prevalence) {
    SiteFilterResult r;
    std::vector<std::string> order;
    std::map<std::string, SitePrevalence> by_site;
    for (const auto& m : members) {
        auto [it, inserted] = by_site.try_emplace(m.site_id);
        if (inserted) {
            it->second.site_id = m.site_id;
            order.push_back(m.site_id);
        }
        if (!m.retained) continue;
        ++it->second.stays;
        if (m.is_case) ++it->second.cases;
    }
    r.applied = order.size() > 1;
    for (const auto& id : order) {
        SitePrevalence p = by_site[id];
        if (p.stays == 0) {
            r.empty_sites.push_back(id);
            continue;
        }
        p.prevalence = static_cast<double>(p.cases) / static_cast<double>(p.stays);
        p.kept = !r.applied || !(p.prevalence < min_prevalence);
        (p.kept ? r.kept : r.dropped).push_back(id);
        r.table.push_back(p);
    }
    return r;
}

bool StudyFlowReport::reconciles() const {
    std::size_t ex = 0;
    for (const auto& [_, n] : excluded) ex += n;
    return input == retained + ex;
}

nlohmann::json StudyFlowReport::to_json() const {
    nlohmann::json ex = nlohmann::json::object();
    for (auto r : kAllExclusionReasons) {
        auto it = excluded.find(r);
        ex[std::string(to_string(r))] = it == excluded.end() ? 0 : it->second;
    }
    nlohmann::json sites_table = nlohmann::json::array();
    for (const auto& p : sites.table)
        sites_table.push_back({{"site_id", p.site_id},
                               {"stays", p.stays},
                               {"cases", p.cases},
                               {"prevalence", p.prevalence},
                               {"kept", p.kept}});
    return {{"input", input},
            {"retained", retained},
            {"retained_cases", retained_cases},
            {"excluded", ex},
            {"site_filter_applied", sites.applied},
            {"sites", sites_table},
            {"empty_sites", sites.empty_sites},
            {"reconciles", reconciles()}};
}

std::string StudyFlowReport::to_table() const {
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s %8zu\n", "input stays", input);
    out << line;
    for (auto r : kAllExclusionReasons) {
        auto it = excluded.find(r);
        std::snprintf(line, sizeof line, "  - %-20s %8zu\n", std::string(to_string(r)).c_str(),
                      it == excluded.end() ? std::size_t{0} : it->second);
        out << line;
    }
    std::snprintf(line, sizeof line, "%-24s %8zu  (cases %zu)\n", "retained stays", retained, retained_cases);
    out << line;
    if (!sites.table.empty()) {
        out << "\nsite                      stays    cases  prevalence  kept\n";
        for (const auto& p : sites.table) {
            std::snprintf(line, sizeof line, "%-24s %7zu %8zu  %10.4f  %s\n", p.site_id.c_str(), p.stays, p.cases,
                          p.prevalence, p.kept ? "yes" : "no");
            out << line;
        }
    }
    for (const auto& s : sites.empty_sites) out << "site " << s << ": no retained stays\n";
    return out.str();
}

StudyFlowReport run_exclusion_cascade(std::span<const HourlyStay> stays, std::span<const SepsisAnnotation> annotations,
                                      std::vector<StayVerdict>& verdicts, const FilterRules& rules,
                                      double min_site_prevalence) {
    if (stays.size() != annotations.size())
        throw std::invalid_argument("run_exclusion_cascade: stays and annotations differ in length");
    StudyFlowReport rep;
    rep.input = stays.size();
    verdicts.clear();
    std::vector<SiteMember> members;
    for (std::size_t i = 0; i < stays.size(); ++i) {
        StayVerdict v;
        v.stay_id = stays[i].stay_id;
        v.site_id = stays[i].statics.site_id;
        v.is_case = annotations[i].is_case();
        v.exclusion = filter_stay(stays[i], annotations[i], rules);
        members.push_back({v.site_id, !v.exclusion, v.is_case});
        verdicts.push_back(std::move(v));
    }
    rep.sites = filter_sites(members, min_site_prevalence);
    for (auto& v : verdicts) {
        if (!v.exclusion &&
            std::find(rep.sites.dropped.begin(), rep.sites.dropped.end(), v.site_id) != rep.sites.dropped.end()) {
            auto it = std::find_if(rep.sites.table.begin(), rep.sites.table.end(),
                                   [&](const SitePrevalence& p) { return p.site_id == v.site_id; });
            v.exclusion = Exclusion{ExclusionReason::low_prevalence_site, it->prevalence};
        }
        if (v.exclusion) {
            ++rep.excluded[v.exclusion->reason];
        } else {
            ++rep.retained;
            if (v.is_case) ++rep.retained_cases;
        }
    }
    return rep;
}

} // namespace sepsis
