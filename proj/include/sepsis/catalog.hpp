#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace sepsis {

enum class VariableKind { vital, lab, static_, treatment, auxiliary };

std::string_view to_string(VariableKind kind);
VariableKind variable_kind_from_string(std::string_view s);

/// canonical = a * x + b
struct UnitConversion {
    std::string unit;
    double a = 1.0;
    double b = 0.0;
};

struct VariableInfo {
    std::string id;
    std::string description;
    std::string canonical_unit;
    double plausible_min = 0.0;
    double plausible_max = 0.0;
    VariableKind kind = VariableKind::lab;
    std::vector<UnitConversion> conversions;

    /// Model-input time series (vital or lab).
    bool is_dynamic() const { return kind == VariableKind::vital || kind == VariableKind::lab; }
    /// Anything that lives on the hourly grid.
    bool is_series() const { return is_dynamic() || kind == VariableKind::auxiliary; }
};

/// Immutable variable catalog. Loaded once and shared read-only.
///
/// Series variables (vitals, labs and auxiliary score inputs such as the GCS
/// components) get a dense index in file order; that index addresses the
/// rows of an HourlyStay.
class VariableCatalog {
public:
    static std::shared_ptr<const VariableCatalog> from_json(const nlohmann::json& doc);
    static std::shared_ptr<const VariableCatalog> load(const std::filesystem::path& path);
    /// The catalog shipped in data/catalog.json, compiled into the library.
    static std::shared_ptr<const VariableCatalog> default_catalog();

    const std::string& version() const { return version_; }
    const std::vector<VariableInfo>& entries() const { return entries_; }

    const VariableInfo* find(std::string_view id) const;
    /// Throws SchemaError for unknown ids.
    const VariableInfo& at(std::string_view id) const;

    std::size_t series_count() const { return series_.size(); }
    const std::string& series_id(std::size_t index) const { return series_[index]; }
    std::optional<std::size_t> series_index(std::string_view id) const;
    /// Throws SchemaError when `id` is not a series variable.
    std::size_t require_series(std::string_view id) const;

    /// Vital + lab variable ids in catalog order (the model's input series).
    const std::vector<std::string>& dynamic_ids() const { return dynamic_; }
    const std::vector<std::string>& static_ids() const { return static_; }

    nlohmann::json to_json() const;

private:
    std::string version_;
    std::vector<VariableInfo> entries_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    std::vector<std::string> series_;
    std::map<std::string, std::size_t, std::less<>> series_by_id_;
    std::vector<std::string> dynamic_;
    std::vector<std::string> static_;
};

using CatalogPtr = std::shared_ptr<const VariableCatalog>;

namespace embedded {
const char* catalog_json();
const char* score_definitions_json();
} // namespace embedded

} // namespace sepsis
