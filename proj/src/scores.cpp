#include "sepsis/scores.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "sepsis/error.hpp"

namespace sepsis {

using nlohmann::json;

std::string_view to_string(CompareOp op) {
    switch (op) {
    case CompareOp::lt: return "lt";
    case CompareOp::le: return "le";
    case CompareOp::gt: return "gt";
    case CompareOp::ge: return "ge";
    }
    return "?";
}

CompareOp compare_op_from_string(std::string_view s) {
    if (s == "lt") return CompareOp::lt;
    if (s == "le") return CompareOp::le;
    if (s == "gt") return CompareOp::gt;
    if (s == "ge") return CompareOp::ge;
    throw SchemaError("unknown comparison '" + std::string(s) + "'");
}

bool ScoreRule::matches(double x) const {
    if (std::isnan(x)) return false;
    switch (op) {
    case CompareOp::lt: return x < value;
    case CompareOp::le: return x <= value;
    case CompareOp::gt: return x > value;
    case CompareOp::ge: return x >= value;
    }
    return false;
}

std::shared_ptr<const ScoreDefinitions> ScoreDefinitions::from_json(const json& doc) {
    auto defs = std::make_shared<ScoreDefinitions>();
    try {
        defs->version_ = doc.at("definitions_version").get<std::string>();
        for (const auto& s : doc.at("scores")) {
            ScoreDefinition d;
            d.id = s.at("id").get<std::string>();
            d.description = s.value("description", "");
            d.min = s.at("min").get<int>();
            d.max = s.at("max").get<int>();
            for (const auto& c : s.at("components")) {
                ScoreComponent comp;
                comp.name = c.at("name").get<std::string>();
                for (const auto& r : c.at("rules")) {
                    ScoreRule rule;
                    rule.input = r.at("input").get<std::string>();
                    rule.op = compare_op_from_string(r.at("op").get<std::string>());
                    rule.value = r.at("value").get<double>();
                    rule.points = r.at("points").get<int>();
                    if (rule.points < 0) throw SchemaError("score '" + d.id + "': negative points");
                    if (r.contains("requires")) rule.requires_flags = r.at("requires").get<std::vector<std::string>>();
                    rule.partial = r.value("partial", true);
                    comp.rules.push_back(std::move(rule));
                }
                d.components.push_back(std::move(comp));
            }
            if (defs->find(d.id)) throw SchemaError("duplicate score id '" + d.id + "'");
            defs->scores_.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("score definitions: ") + e.what());
    }
    return defs;
}

std::shared_ptr<const ScoreDefinitions> ScoreDefinitions::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path.string(), 0, 0, "cannot open score definitions");
    try {
        return from_json(json::parse(in));
    } catch (const json::parse_error& e) {
        throw SchemaError(path.string(), 0, 0, e.what());
    }
}

std::shared_ptr<const ScoreDefinitions> ScoreDefinitions::default_definitions() {
    static const auto defs = from_json(json::parse(embedded::score_definitions_json()));
    return defs;
}

const ScoreDefinition* ScoreDefinitions::find(std::string_view id) const {
    for (const auto& s : scores_)
        if (s.id == id) return &s;
    return nullptr;
}

const ScoreDefinition& ScoreDefinitions::at(std::string_view id) const {
    if (const auto* s = find(id)) return *s;
    throw std::invalid_argument("unknown score id '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------

ScoreInputs::ScoreInputs(const HourlyStay& filled, const TreatmentLog* treatments)
    : stay_(filled), treatments_(treatments), n_hours_(filled.n_hours) {
    const auto n = static_cast<std::size_t>(n_hours_);
    urine_prefix_.assign(n + 1, 0.0);
    urine_obs_prefix_.assign(n + 1, 0);
    if (auto ui = filled.catalog->series_index("urine")) {
        const auto& v = filled.values[*ui];
        const auto& c = filled.counts[*ui];
        for (std::size_t t = 0; t < n; ++t) {
            const bool obs = c[t] > 0;
            urine_prefix_[t + 1] = urine_prefix_[t] + (obs ? v[t] : 0.0);
            urine_obs_prefix_[t + 1] = urine_obs_prefix_[t] + (obs ? 1 : 0);
        }
    }
}

bool ScoreInputs::sedated(long hour) const {
    if (!treatments_) return false;
    for (const auto& iv : treatments_->sedation)
        if (iv.active_in_hour(hour)) return true;
    return false;
}

double ScoreInputs::gcs(long hour) const {
    if (sedated(hour)) return 15.0;
    const auto& cat = *stay_.catalog;
    const auto t = static_cast<std::size_t>(hour);
    if (auto i = cat.series_index("tgcs")) {
        const double total = stay_.values[*i][t];
        if (!is_missing(total)) return total;
    }
    double sum = 0.0;
    for (std::string_view part : {"egcs", "mgcs", "vgcs"}) {
        auto i = cat.series_index(part);
        if (!i) return kMissing;
        const double x = stay_.values[*i][t];
        if (is_missing(x)) return kMissing;
        sum += x;
    }
    return sum;
}

double ScoreInputs::urine_24h(long hour) const {
    if (hour < kUrineMinHour) return kMissing;
    const long lo = std::max(0L, hour - (kUrineWindowHours - 1));
    const auto a = static_cast<std::size_t>(lo);
    const auto b = static_cast<std::size_t>(hour + 1);
    if (urine_obs_prefix_[b] - urine_obs_prefix_[a] == 0) return kMissing;
    const double sum = urine_prefix_[b] - urine_prefix_[a];
    const double window = static_cast<double>(hour + 1 - lo);
    return sum * static_cast<double>(kUrineWindowHours) / window;
}

double ScoreInputs::pf_ratio(long hour) const {
    const auto& cat = *stay_.catalog;
    auto pi = cat.series_index("po2");
    auto fi = cat.series_index("fio2");
    if (!pi || !fi) return kMissing;
    const auto t = static_cast<std::size_t>(hour);
    const double po2 = stay_.values[*pi][t];
    const double fio2 = stay_.values[*fi][t];
    if (is_missing(po2) || is_missing(fio2) || fio2 <= 0.0) return kMissing;
    return po2 / (fio2 / 100.0);
}

double ScoreInputs::get(std::string_view input, long hour) const {
    namespace d = derived_input;
    if (input == d::pf_ratio) return pf_ratio(hour);
    if (input == d::gcs) return gcs(hour);
    if (input == d::urine_24h) return urine_24h(hour);
    auto rate = [&](Vasopressor agent) {
        if (!treatments_) return kMissing;
        double r = 0.0;
        for (const auto& v : treatments_->vasopressors)
            if (v.agent == agent && v.span.active_in_hour(hour)) r = std::max(r, v.rate);
        return r;
    };
    if (input == d::norepi_rate) return rate(Vasopressor::norepinephrine);
    if (input == d::epi_rate) return rate(Vasopressor::epinephrine);
    if (input == d::dopa_rate) return rate(Vasopressor::dopamine);
    if (input == d::dobu_rate) return rate(Vasopressor::dobutamine);
    if (input == d::ventilated) {
        if (!treatments_) return kMissing;
        for (const auto& iv : treatments_->ventilation)
            if (iv.active_in_hour(hour)) return 1.0;
        return 0.0;
    }
    auto i = stay_.catalog->series_index(input);
    if (!i) throw std::invalid_argument("unknown score input '" + std::string(input) + "'");
    return stay_.values[*i][static_cast<std::size_t>(hour)];
}

std::vector<std::vector<int>> score_components(const ScoreDefinition& def, const ScoreInputs& inputs, bool partial) {
    const long n = inputs.n_hours();
    std::unordered_map<std::string, std::vector<double>> columns;
    auto column = [&](const std::string& id) -> const std::vector<double>& {
        auto it = columns.find(id);
        if (it != columns.end()) return it->second;
        std::vector<double> col(static_cast<std::size_t>(n));
        for (long t = 0; t < n; ++t) col[static_cast<std::size_t>(t)] = inputs.get(id, t);
        return columns.emplace(id, std::move(col)).first->second;
    };

    std::vector<std::vector<int>> out;
    out.reserve(def.components.size());
    for (const auto& comp : def.components) {
        std::vector<int> pts(static_cast<std::size_t>(n), 0);
        for (const auto& rule : comp.rules) {
            if (partial && !rule.partial) continue;
            const auto& x = column(rule.input);
            std::vector<const std::vector<double>*> flags;
            for (const auto& f : rule.requires_flags) flags.push_back(&column(f));
            for (std::size_t t = 0; t < pts.size(); ++t) {
                if (rule.points <= pts[t] || !rule.matches(x[t])) continue;
                bool ok = true;
                for (const auto* f : flags)
                    if (!((*f)[t] > 0.0)) ok = false;
                if (ok) pts[t] = rule.points;
            }
        }
        out.push_back(std::move(pts));
    }
    return out;
}

namespace {
std::vector<int> sum_rows(const std::vector<std::vector<int>>& comps, long n) {
    std::vector<int> total(static_cast<std::size_t>(n), 0);
    for (const auto& c : comps)
        for (std::size_t t = 0; t < total.size(); ++t) total[t] += c[t];
    return total;
}

std::string_view base_id(std::string_view id) {
    constexpr std::string_view suffix = "-partial";
    if (id.size() > suffix.size() && id.substr(id.size() - suffix.size()) == suffix)
        return id.substr(0, id.size() - suffix.size());
    return id;
}
} // namespace

SofaHourly sofa_hourly(const HourlyStay& filled, const TreatmentLog& treatments, const ScoreDefinitions& defs) {
    const ScoreDefinition& def = defs.at("sofa");
    ScoreInputs inputs(filled, &treatments);
    auto comps = score_components(def, inputs, false);
    SofaHourly out;
    for (std::size_t k = 0; k < kSofaComponentNames.size(); ++k) {
        auto it = std::find_if(def.components.begin(), def.components.end(),
                               [&](const ScoreComponent& c) { return c.name == kSofaComponentNames[k]; });
        if (it == def.components.end())
            throw SchemaError("sofa definition lacks component '" + std::string(kSofaComponentNames[k]) + "'");
        out.components[k] = comps[static_cast<std::size_t>(it - def.components.begin())];
    }
    out.total = sum_rows(comps, filled.n_hours);
    return out;
}

ScoreSeries score_hourly(std::string_view score_id, const HourlyStay& filled, const TreatmentLog& treatments,
                         const ScoreDefinitions& defs) {
    const ScoreDefinition& def = defs.at(score_id);
    ScoreInputs inputs(filled, &treatments);
    return {def.id, sum_rows(score_components(def, inputs, false), filled.n_hours)};
}

ScoreSeries sirs_hourly(const HourlyStay& f, const TreatmentLog& t, const ScoreDefinitions& d) {
    return score_hourly("sirs", f, t, d);
}
ScoreSeries qsofa_hourly(const HourlyStay& f, const TreatmentLog& t, const ScoreDefinitions& d) {
    return score_hourly("qsofa", f, t, d);
}
ScoreSeries mews_hourly(const HourlyStay& f, const TreatmentLog& t, const ScoreDefinitions& d) {
    return score_hourly("mews", f, t, d);
}
ScoreSeries news_hourly(const HourlyStay& f, const TreatmentLog& t, const ScoreDefinitions& d) {
    return score_hourly("news", f, t, d);
}

ScoreSeries partial_score_hourly(std::string_view score_id, const HourlyStay& filled, const ScoreDefinitions& defs) {
    const std::string_view base = base_id(score_id);
    const bool known = std::any_of(kPartialScoreIds.begin(), kPartialScoreIds.end(),
                                   [&](std::string_view p) { return base_id(p) == base; });
    if (!known) throw std::invalid_argument("no partial definition for score '" + std::string(score_id) + "'");
    const ScoreDefinition& def = defs.at(base);
    ScoreInputs inputs(filled, nullptr);
    return {std::string(base) + "-partial", sum_rows(score_components(def, inputs, true), filled.n_hours)};
}

std::vector<ScoreSeries> partial_scores(const HourlyStay& filled, const ScoreDefinitions& defs) {
    std::vector<ScoreSeries> out;
    for (auto id : kPartialScoreIds) out.push_back(partial_score_hourly(id, filled, defs));
    return out;
}

std::vector<ScoreSeries> baseline_scores(const HourlyStay& filled, const TreatmentLog& treatments,
                                         const ScoreDefinitions& defs) {
    std::vector<ScoreSeries> out;
    for (auto id : kBaselineScoreIds) out.push_back(score_hourly(id, filled, treatments, defs));
    return out;
}

} // namespace sepsis
