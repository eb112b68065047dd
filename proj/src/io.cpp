#include "sepsis/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "sepsis/csv.hpp"
#include "sepsis/error.hpp"

namespace sepsis::io {

using csv::AtomicFile;
using csv::Reader;
using csv::RowWriter;

namespace {

template <class T>
T& group(std::vector<T>& out, std::unordered_map<std::string, std::size_t>& index, std::string_view id) {
    auto it = index.find(std::string(id));
    if (it != index.end()) return out[it->second];
    index.emplace(std::string(id), out.size());
    out.emplace_back();
    return out.back();
}

std::string opt(const std::optional<double>& x) { return x ? csv::format_number(*x) : std::string(); }

} // namespace

// ----- events ---------------------------------------------------------------

std::vector<RawEvent> read_events(const fs::path& path) {
    Reader r(path, {"stay_id", "variable", "time_hours", "value", "unit"});
    std::vector<RawEvent> out;
    while (r.next()) {
        RawEvent e;
        e.stay_id = r.text(0);
        e.variable = r.text(1);
        if (e.stay_id.empty()) r.fail(0, "empty stay_id");
        if (e.variable.empty()) r.fail(1, "empty variable");
        e.time = r.number(2);
        e.value = r.number(3);
        if (!std::isfinite(e.time)) r.fail(2, "time must be finite");
        if (!std::isfinite(e.value)) r.fail(3, "value must be finite");
        e.unit = r.text(4);
        out.push_back(std::move(e));
    }
    return out;
}

void write_events(const fs::path& path, std::span<const RawEvent> events) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "variable", "time_hours", "value", "unit"});
    for (const auto& e : events) {
        RowWriter w(o);
        w << e.stay_id << e.variable << e.time << e.value << e.unit;
        w.end();
    }
    f.commit();
}

// ----- statics --------------------------------------------------------------

std::vector<StayStatic> read_statics(const fs::path& path) {
    Reader r(path, {"stay_id", "age", "sex", "height", "weight", "icu_los_hours", "site_id"});
    std::vector<StayStatic> out;
    std::map<std::string, int> seen;
    while (r.next()) {
        StayStatic s;
        s.stay_id = r.text(0);
        if (s.stay_id.empty()) r.fail(0, "empty stay_id");
        if (seen[s.stay_id]++) r.fail(0, "duplicate stay_id '" + s.stay_id + "'");
        s.age = r.optional_number(1).value_or(kMissing);
        try {
            s.sex = sex_from_string(r.text(2));
        } catch (const SchemaError& e) {
            r.fail(2, e.what());
        }
        s.height = r.optional_number(3).value_or(kMissing);
        s.weight = r.optional_number(4).value_or(kMissing);
        s.icu_los_hours = r.number(5);
        if (!(s.icu_los_hours > 0) || !std::isfinite(s.icu_los_hours)) r.fail(5, "icu_los_hours must be > 0");
        s.site_id = r.text(6);
        out.push_back(std::move(s));
    }
    return out;
}

void write_statics(const fs::path& path, std::span<const StayStatic> statics) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "age", "sex", "height", "weight", "icu_los_hours", "site_id"});
    for (const auto& s : statics) {
        RowWriter w(o);
        w << s.stay_id << s.age << to_string(s.sex) << s.height << s.weight << s.icu_los_hours << s.site_id;
        w.end();
    }
    f.commit();
}

// ----- treatments -----------------------------------------------------------

std::vector<TreatmentLog> read_treatments(const fs::path& path) {
    Reader r(path, {"stay_id", "kind", "agent", "start_hours", "end_hours", "rate"});
    std::vector<TreatmentLog> out;
    std::unordered_map<std::string, std::size_t> index;
    while (r.next()) {
        const std::string_view id = r.text(0);
        if (id.empty()) r.fail(0, "empty stay_id");
        TreatmentLog& log = group(out, index, id);
        log.stay_id = id;
        const std::string_view kind = r.text(1);
        const double start = r.number(3);
        auto interval = [&]() {
            const double end = r.number(4);
            if (start > end) r.fail(4, "end_hours before start_hours");
            return Interval{start, end};
        };
        if (kind == "abx") {
            log.antibiotics.push_back(start);
        } else if (kind == "fluid_sampling") {
            log.fluid_samplings.push_back(start);
        } else if (kind == "vasopressor") {
            VasopressorInfusion v;
            try {
                v.agent = vasopressor_from_string(r.text(2));
            } catch (const SchemaError& e) {
                r.fail(2, e.what());
            }
            v.span = interval();
            v.rate = r.number(5);
            if (!(v.rate >= 0)) r.fail(5, "rate must be >= 0");
            log.vasopressors.push_back(v);
        } else if (kind == "ventilation") {
            log.ventilation.push_back(interval());
        } else if (kind == "sedation") {
            log.sedation.push_back(interval());
        } else {
            r.fail(1, "unknown treatment kind '" + std::string(kind) + "'");
        }
    }
    return out;
}

void write_treatments(const fs::path& path, std::span<const TreatmentLog> logs) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "kind", "agent", "start_hours", "end_hours", "rate"});
    for (const auto& l : logs) {
        for (double t : l.antibiotics) o << l.stay_id << ",abx,," << csv::format_number(t) << ",,\n";
        for (double t : l.fluid_samplings) o << l.stay_id << ",fluid_sampling,," << csv::format_number(t) << ",,\n";
        for (const auto& v : l.vasopressors)
            o << l.stay_id << ",vasopressor," << to_string(v.agent) << ',' << csv::format_number(v.span.start) << ','
              << csv::format_number(v.span.end) << ',' << csv::format_number(v.rate) << '\n';
        for (const auto& iv : l.ventilation)
            o << l.stay_id << ",ventilation,," << csv::format_number(iv.start) << ',' << csv::format_number(iv.end)
              << ",\n";
        for (const auto& iv : l.sedation)
            o << l.stay_id << ",sedation,," << csv::format_number(iv.start) << ',' << csv::format_number(iv.end)
              << ",\n";
    }
    f.commit();
}

// ----- hourly grid ----------------------------------------------------------

void write_hourly(const fs::path& path, std::span<const HourlyStay> stays) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "hour", "variable", "value", "count"});
    for (const auto& s : stays) {
        for (std::size_t v = 0; v < s.values.size(); ++v) {
            const std::string& var = s.catalog->series_id(v);
            // hour -1 carries a pre-admission seed
            if (!s.seed.empty() && !is_missing(s.seed[v])) o << s.stay_id << ",-1," << var << ','
                                                               << csv::format_number(s.seed[v]) << ",0\n";
            for (std::size_t t = 0; t < s.values[v].size(); ++t) {
                if (s.counts[v][t] == 0) continue;
                o << s.stay_id << ',' << t << ',' << var << ',' << csv::format_number(s.values[v][t]) << ','
                  << s.counts[v][t] << '\n';
            }
        }
    }
    f.commit();
}

std::vector<HourlyStay> read_hourly(const fs::path& path, std::span<const StayStatic> statics, CatalogPtr catalog) {
    std::vector<HourlyStay> out;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& s : statics) {
        index.emplace(s.stay_id, out.size());
        out.push_back(HourlyStay::empty(catalog, s));
    }
    Reader r(path, {"stay_id", "hour", "variable", "value", "count"});
    while (r.next()) {
        auto it = index.find(std::string(r.text(0)));
        if (it == index.end()) r.fail(0, "stay not present in the static file");
        HourlyStay& s = out[it->second];
        const long hour = r.integer(1);
        auto vi = catalog->series_index(r.text(2));
        if (!vi) r.fail(2, "unknown series variable");
        const double value = r.number(3);
        const long count = r.integer(4);
        if (hour == -1) {
            s.seed[*vi] = value;
            continue;
        }
        if (hour < 0 || hour >= s.n_hours) r.fail(1, "hour outside the stay grid");
        if (count <= 0) r.fail(4, "count must be > 0");
        s.values[*vi][static_cast<std::size_t>(hour)] = value;
        s.counts[*vi][static_cast<std::size_t>(hour)] = static_cast<int>(count);
    }
    return out;
}

// ----- scores ---------------------------------------------------------------

void write_scores(const fs::path& path, std::span<const ScoreTable> tables) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "hour", "score_id", "value"});
    for (const auto& t : tables)
        for (const auto& s : t.series)
            for (std::size_t h = 0; h < s.values.size(); ++h)
                o << t.stay_id << ',' << h << ',' << s.score_id << ',' << s.values[h] << '\n';
    f.commit();
}

std::vector<ScoreTable> read_scores(const fs::path& path) {
    Reader r(path, {"stay_id", "hour", "score_id", "value"});
    std::vector<ScoreTable> out;
    std::unordered_map<std::string, std::size_t> index;
    while (r.next()) {
        ScoreTable& t = group(out, index, r.text(0));
        t.stay_id = r.text(0);
        const std::string_view id = r.text(2);
        auto it = std::find_if(t.series.begin(), t.series.end(), [&](const ScoreSeries& s) { return s.score_id == id; });
        if (it == t.series.end()) {
            t.series.push_back({std::string(id), {}});
            it = t.series.end() - 1;
        }
        const long hour = r.integer(1);
        if (hour != static_cast<long>(it->values.size())) r.fail(1, "hours must be consecutive from 0");
        it->values.push_back(static_cast<int>(r.integer(3)));
    }
    return out;
}

// ----- annotations ----------------------------------------------------------

void write_annotations(const fs::path& annotations_path, const fs::path& labels_path,
                       std::span<const SepsisAnnotation> annotations) {
    AtomicFile fa(annotations_path);
    csv::write_header(fa.stream(), {"stay_id", "onset_hour", "si_time", "si_definition"});
    AtomicFile fl(labels_path);
    csv::write_header(fl.stream(), {"stay_id", "hour", "label", "excluded"});
    for (const auto& a : annotations) {
        const std::string onset = opt(a.onset);
        if (a.si_windows.empty()) {
            fa.stream() << a.stay_id << ',' << onset << ",,\n";
        } else {
            for (const auto& w : a.si_windows)
                fa.stream() << a.stay_id << ',' << onset << ',' << csv::format_number(w.si_time) << ','
                            << to_string(w.definition) << '\n';
        }
        for (long t = 0; t < a.n_hours; ++t)
            fl.stream() << a.stay_id << ',' << t << ',' << int(a.labels[static_cast<std::size_t>(t)]) << ','
                        << (a.excluded(t) ? 1 : 0) << '\n';
    }
    fa.commit();
    fl.commit();
}

std::vector<SepsisAnnotation> read_annotations(const fs::path& annotations_path, const fs::path& labels_path) {
    std::vector<SepsisAnnotation> out;
    std::unordered_map<std::string, std::size_t> index;
    Reader ra(annotations_path, {"stay_id", "onset_hour", "si_time", "si_definition"});
    while (ra.next()) {
        SepsisAnnotation& a = group(out, index, ra.text(0));
        a.stay_id = ra.text(0);
        a.onset = ra.optional_number(1);
        if (a.onset) a.truncate_after = *a.onset + kLabelTrail;
        if (auto si = ra.optional_number(2)) {
            SiDefinition d;
            try {
                d = si_definition_from_string(ra.text(3));
            } catch (const SchemaError& e) {
                ra.fail(3, e.what());
            }
            a.si_windows.push_back(SiWindow::at(*si, d));
        }
    }
    Reader rl(labels_path, {"stay_id", "hour", "label", "excluded"});
    while (rl.next()) {
        auto it = index.find(std::string(rl.text(0)));
        if (it == index.end()) rl.fail(0, "stay missing from the annotations file");
        SepsisAnnotation& a = out[it->second];
        const long hour = rl.integer(1);
        if (hour != a.n_hours) rl.fail(1, "hours must be consecutive from 0");
        const long label = rl.integer(2);
        if (label != 0 && label != 1) rl.fail(2, "label must be 0 or 1");
        a.labels.push_back(static_cast<std::uint8_t>(label));
        ++a.n_hours;
    }
    return out;
}

// ----- streams --------------------------------------------------------------

void write_streams(const fs::path& path, std::span<const ScoreStream> streams) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "hour", "score"});
    for (const auto& s : streams)
        for (std::size_t t = 0; t < s.scores.size(); ++t)
            o << s.stay_id << ',' << t << ',' << csv::format_number(s.scores[t]) << '\n';
    f.commit();
}

std::vector<ScoreStream> read_streams(const fs::path& path) {
    Reader r(path, {"stay_id", "hour", "score"});
    std::vector<ScoreStream> out;
    std::unordered_map<std::string, std::size_t> index;
    while (r.next()) {
        ScoreStream& s = group(out, index, r.text(0));
        s.stay_id = r.text(0);
        if (r.integer(1) != static_cast<long>(s.scores.size())) r.fail(1, "hours must be consecutive from 0");
        s.scores.push_back(r.number(2));
    }
    return out;
}

// ----- ground truth ---------------------------------------------------------

void write_ground_truth(const fs::path& path, std::span<const PlantedStay> truth) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "onset_hour", "si_time", "exclusion_reason"});
    for (const auto& t : truth) {
        const std::string onset = opt(t.onset);
        const std::string reason = t.exclusion ? std::string(to_string(*t.exclusion)) : std::string();
        if (t.si_times.empty()) {
            o << t.stay_id << ',' << onset << ",," << reason << '\n';
        } else {
            for (double si : t.si_times)
                o << t.stay_id << ',' << onset << ',' << csv::format_number(si) << ',' << reason << '\n';
        }
    }
    f.commit();
}

std::vector<PlantedStay> read_ground_truth(const fs::path& path) {
    Reader r(path, {"stay_id", "onset_hour", "si_time", "exclusion_reason"});
    std::vector<PlantedStay> out;
    std::unordered_map<std::string, std::size_t> index;
    while (r.next()) {
        PlantedStay& t = group(out, index, r.text(0));
        t.stay_id = r.text(0);
        t.onset = r.optional_number(1);
        if (auto si = r.optional_number(2)) t.si_times.push_back(*si);
        if (!r.text(3).empty()) {
            try {
                t.exclusion = exclusion_reason_from_string(r.text(3));
            } catch (const SchemaError& e) {
                r.fail(3, e.what());
            }
        }
    }
    return out;
}

// ----- features -------------------------------------------------------------

void write_features(const fs::path& path, std::span<const FeatureMatrix> matrices) {
    AtomicFile f(path);
    auto& o = f.stream();
    o << "stay_id,hour,eligible";
    if (!matrices.empty())
        for (const auto& c : *matrices.front().columns) o << ',' << c;
    o << '\n';
    for (const auto& m : matrices) {
        for (std::size_t t = 0; t < m.n_hours(); ++t) {
            o << m.stay_id << ',' << t << ',' << int(m.eligible[t]);
            for (double x : m.values.row(t)) o << ',' << csv::format_number(x);
            o << '\n';
        }
    }
    f.commit();
}

std::vector<FeatureMatrix> read_features(const fs::path& path) {
    Reader r(path);
    const auto& header = r.header();
    if (header.size() < 3 || header[0] != "stay_id" || header[1] != "hour" || header[2] != "eligible")
        throw SchemaError(path.string(), 1, 0, "feature header must start with stay_id,hour,eligible");
    auto columns = std::make_shared<const std::vector<std::string>>(header.begin() + 3, header.end());
    const bool extended = std::any_of(columns->begin(), columns->end(),
                                      [](const std::string& c) { return c.find("_mean_4h") != std::string::npos; });
    const bool with_static = std::find(columns->begin(), columns->end(), "age") != columns->end();
    const std::string spec_id = std::string(extended ? "extended" : "compact") + (with_static ? "" : "-nostatic") + "-v1";
    const std::size_t p = columns->size();

    std::vector<FeatureMatrix> out;
    std::unordered_map<std::string, std::size_t> index;
    std::unordered_map<std::string, std::vector<double>> data;
    while (r.next()) {
        FeatureMatrix& m = group(out, index, r.text(0));
        if (m.stay_id.empty()) {
            m.stay_id = r.text(0);
            m.spec_id = spec_id;
            m.columns = columns;
        }
        if (r.integer(1) != static_cast<long>(m.eligible.size())) r.fail(1, "hours must be consecutive from 0");
        const long e = r.integer(2);
        if (e != 0 && e != 1) r.fail(2, "eligible must be 0 or 1");
        m.eligible.push_back(static_cast<std::uint8_t>(e));
        auto& d = data[m.stay_id];
        for (std::size_t c = 0; c < p; ++c) d.push_back(r.optional_number(c + 3).value_or(kMissing));
    }
    for (auto& m : out) {
        m.values.rows = m.eligible.size();
        m.values.cols = p;
        m.values.data = std::move(data[m.stay_id]);
    }
    return out;
}

// ----- verdicts -------------------------------------------------------------

void write_verdicts(const fs::path& path, std::span<const StayVerdict> verdicts) {
    AtomicFile f(path);
    auto& o = f.stream();
    csv::write_header(o, {"stay_id", "site_id", "is_case", "verdict", "quantity"});
    for (const auto& v : verdicts) {
        RowWriter w(o);
        w << v.stay_id << v.site_id << (v.is_case ? 1 : 0);
        if (v.exclusion)
            w << to_string(v.exclusion->reason) << v.exclusion->quantity;
        else
            w << "pass" << "";
        w.end();
    }
    f.commit();
}

std::vector<StayVerdict> read_verdicts(const fs::path& path) {
    Reader r(path, {"stay_id", "site_id", "is_case", "verdict", "quantity"});
    std::vector<StayVerdict> out;
    while (r.next()) {
        StayVerdict v;
        v.stay_id = r.text(0);
        v.site_id = r.text(1);
        v.is_case = r.integer(2) != 0;
        if (r.text(3) != "pass") {
            try {
                v.exclusion = Exclusion{exclusion_reason_from_string(r.text(3)), r.optional_number(4).value_or(0.0)};
            } catch (const SchemaError& e) {
                r.fail(3, e.what());
            }
        }
        out.push_back(std::move(v));
    }
    return out;
}

// ----- misc -----------------------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
    AtomicFile f(path);
    f.stream() << text;
    f.commit();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError(path.string(), 0, 0, "cannot open file");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const fs::path& path) {
    try {
        return nlohmann::json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(path.string(), 0, 0, e.what());
    }
}

} // namespace sepsis::io
