#include "sepsis/catalog.hpp"

#include <fstream>
#include <set>

#include "sepsis/error.hpp"

namespace sepsis {

using nlohmann::json;

std::string_view to_string(VariableKind kind) {
    switch (kind) {
    case VariableKind::vital: return "vital";
    case VariableKind::lab: return "lab";
    case VariableKind::static_: return "static";
    case VariableKind::treatment: return "treatment";
    case VariableKind::auxiliary: return "auxiliary";
    }
    return "?";
}

VariableKind variable_kind_from_string(std::string_view s) {
    if (s == "vital") return VariableKind::vital;
    if (s == "lab") return VariableKind::lab;
    if (s == "static") return VariableKind::static_;
    if (s == "treatment") return VariableKind::treatment;
    if (s == "auxiliary") return VariableKind::auxiliary;
    throw SchemaError("unknown variable kind '" + std::string(s) + "'");
}

std::shared_ptr<const VariableCatalog> VariableCatalog::from_json(const json& doc) {
    auto cat = std::make_shared<VariableCatalog>();
    try {
        cat->version_ = doc.at("catalog_version").get<std::string>();
        for (const auto& v : doc.at("variables")) {
            VariableInfo info;
            info.id = v.at("id").get<std::string>();
            info.description = v.value("description", "");
            info.canonical_unit = v.at("canonical_unit").get<std::string>();
            info.plausible_min = v.at("plausible_min").get<double>();
            info.plausible_max = v.at("plausible_max").get<double>();
            info.kind = variable_kind_from_string(v.at("kind").get<std::string>());
            if (v.contains("unit_conversions")) {
                for (const auto& c : v.at("unit_conversions")) {
                    info.conversions.push_back(
                        {c.at("unit").get<std::string>(), c.at("a").get<double>(), c.value("b", 0.0)});
                }
            }
            if (!(info.plausible_min < info.plausible_max))
                throw SchemaError("catalog: plausible_min must be < plausible_max for '" + info.id + "'");
            if (cat->by_id_.count(info.id)) throw SchemaError("catalog: duplicate variable id '" + info.id + "'");
            cat->by_id_.emplace(info.id, cat->entries_.size());
            cat->entries_.push_back(std::move(info));
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("catalog: ") + e.what());
    }
    for (const auto& e : cat->entries_) {
        if (e.is_series()) {
            cat->series_by_id_.emplace(e.id, cat->series_.size());
            cat->series_.push_back(e.id);
        }
        if (e.is_dynamic()) cat->dynamic_.push_back(e.id);
        if (e.kind == VariableKind::static_) cat->static_.push_back(e.id);
    }
    return cat;
}

std::shared_ptr<const VariableCatalog> VariableCatalog::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError(path.string(), 0, 0, "cannot open catalog");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string(), 0, 0, e.what());
    }
    return from_json(doc);
}

std::shared_ptr<const VariableCatalog> VariableCatalog::default_catalog() {
    static const auto cat = from_json(json::parse(embedded::catalog_json()));
    return cat;
}

const VariableInfo* VariableCatalog::find(std::string_view id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
}

const VariableInfo& VariableCatalog::at(std::string_view id) const {
    if (const auto* v = find(id)) return *v;
    throw SchemaError("unknown variable '" + std::string(id) + "'");
}

std::optional<std::size_t> VariableCatalog::series_index(std::string_view id) const {
    auto it = series_by_id_.find(id);
    if (it == series_by_id_.end()) return std::nullopt;
    return it->second;
}

std::size_t VariableCatalog::require_series(std::string_view id) const {
    if (auto i = series_index(id)) return *i;
    throw SchemaError("'" + std::string(id) + "' is not an hourly series variable");
}

json VariableCatalog::to_json() const {
    json vars = json::array();
    for (const auto& e : entries_) {
        json v = {{"id", e.id},
                  {"description", e.description},
                  {"canonical_unit", e.canonical_unit},
                  {"plausible_min", e.plausible_min},
                  {"plausible_max", e.plausible_max},
                  {"kind", to_string(e.kind)}};
        if (!e.conversions.empty()) {
            json conv = json::array();
            for (const auto& c : e.conversions) conv.push_back({{"unit", c.unit}, {"a", c.a}, {"b", c.b}});
            v["unit_conversions"] = conv;
        }
        vars.push_back(v);
    }
    return {{"catalog_version", version_}, {"variables", vars}};
}

} // namespace sepsis
