#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sepsis/cohort_filter.hpp"
#include "sepsis/evaluation.hpp"
#include "sepsis/features.hpp"
#include "sepsis/models.hpp"
#include "sepsis/scores.hpp"
#include "sepsis/sepsis3.hpp"
#include "sepsis/stay.hpp"
#include "sepsis/synth.hpp"

namespace sepsis::io {

namespace fs = std::filesystem;

std::vector<RawEvent> read_events(const fs::path& path);
void write_events(const fs::path& path, std::span<const RawEvent> events);

std::vector<StayStatic> read_statics(const fs::path& path);
void write_statics(const fs::path& path, std::span<const StayStatic> statics);

/// One log per stay id, in order of first appearance.
std::vector<TreatmentLog> read_treatments(const fs::path& path);
void write_treatments(const fs::path& path, std::span<const TreatmentLog> logs);

/// Long format `stay_id,hour,variable,value,count`, non-empty cells only.
void write_hourly(const fs::path& path, std::span<const HourlyStay> stays);
/// Grids are rebuilt for every stay in `statics`.
std::vector<HourlyStay> read_hourly(const fs::path& path, std::span<const StayStatic> statics, CatalogPtr catalog);

struct ScoreTable {
    std::string stay_id;
    std::vector<ScoreSeries> series;
};
/// `stay_id,hour,score_id,value`.
void write_scores(const fs::path& path, std::span<const ScoreTable> tables);
std::vector<ScoreTable> read_scores(const fs::path& path);

/// `stay_id,onset_hour,si_time,si_definition`, one row per SI window (a
/// single row with empty si_time when there is none). Needs the grid sizes
/// to rebuild labels, so n_hours travels in the labels file.
void write_annotations(const fs::path& annotations_path, const fs::path& labels_path,
                       std::span<const SepsisAnnotation> annotations);
std::vector<SepsisAnnotation> read_annotations(const fs::path& annotations_path, const fs::path& labels_path);

void write_streams(const fs::path& path, std::span<const ScoreStream> streams);
std::vector<ScoreStream> read_streams(const fs::path& path);

void write_ground_truth(const fs::path& path, std::span<const PlantedStay> truth);
std::vector<PlantedStay> read_ground_truth(const fs::path& path);

/// `stay_id,hour,eligible,<columns...>`.
void write_features(const fs::path& path, std::span<const FeatureMatrix> matrices);
std::vector<FeatureMatrix> read_features(const fs::path& path);

/// `stay_id,site_id,is_case,verdict,quantity`.
void write_verdicts(const fs::path& path, std::span<const StayVerdict> verdicts);
std::vector<StayVerdict> read_verdicts(const fs::path& path);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);

} // namespace sepsis::io
