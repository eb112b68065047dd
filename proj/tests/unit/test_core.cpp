#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "sepsis/csv.hpp"
#include "sepsis/error.hpp"
#include "sepsis/rng.hpp"

using namespace sepsis;
using testing::event;

TEST_CASE("default catalog holds 59 dynamic and 4 static variables") {
    auto cat = VariableCatalog::default_catalog();
    CHECK(cat->dynamic_ids().size() == 59);
    CHECK(cat->static_ids().size() == 4);
    for (const auto& e : cat->entries()) CHECK(e.plausible_min < e.plausible_max);
    CHECK(cat->find("map") != nullptr);
    CHECK(cat->find("nope") == nullptr);
    CHECK_THROWS_AS(cat->at("nope"), SchemaError);
}

TEST_CASE("catalog rejects duplicate ids and inverted bounds") {
    nlohmann::json dup = {{"variables",
                           {{{"id", "hr"}, {"canonical_unit", "bpm"}, {"plausible_min", 1}, {"plausible_max", 2}, {"kind", "vital"}},
                            {{"id", "hr"}, {"canonical_unit", "bpm"}, {"plausible_min", 1}, {"plausible_max", 2}, {"kind", "vital"}}}}};
    CHECK_THROWS_AS(VariableCatalog::from_json(dup), SchemaError);
    nlohmann::json inv = {{"variables",
                           {{{"id", "hr"}, {"canonical_unit", "bpm"}, {"plausible_min", 3}, {"plausible_max", 2}, {"kind", "vital"}}}}};
    CHECK_THROWS_AS(VariableCatalog::from_json(inv), SchemaError);
}

TEST_CASE("unit conversion") {
    auto cat = VariableCatalog::default_catalog();
    SUBCASE("fahrenheit") {
        auto e = convert_to_canonical(event("s", "temp", 1, 98.6, "F"), *cat);
        CHECK(e.value == doctest::Approx(37.0).epsilon(1e-12));
        CHECK(e.unit == "C");
    }
    SUBCASE("identity") {
        CHECK(convert_to_canonical(event("s", "hr", 1, 80, "bpm"), *cat).value == 80.0);
        CHECK(convert_to_canonical(event("s", "hr", 1, 80, ""), *cat).value == 80.0);
    }
    SUBCASE("glucose mmol/L") {
        // 5.0 mmol/L * 18.018 mg/dL per mmol/L (molar mass 180.16 g/mol / 10)
        CHECK(convert_to_canonical(event("s", "glu", 1, 5.0, "mmol/L"), *cat).value ==
              doctest::Approx(90.09).epsilon(1e-12));
    }
    SUBCASE("unknown unit") {
        CHECK_THROWS_AS(convert_to_canonical(event("s", "hr", 1, 80, "furlongs"), *cat), SchemaError);
        auto r = canonicalize(std::vector{event("s", "hr", 1, 80, "furlongs")}, *cat);
        CHECK(r.kept.empty());
        REQUIRE(r.rejected.size() == 1);
        CHECK(r.rejected[0].reason.find("furlongs") != std::string::npos);
    }
    SUBCASE("idempotent once canonical") {
        auto once = convert_to_canonical(event("s", "temp", 1, 101.0, "F"), *cat);
        auto twice = convert_to_canonical(once, *cat);
        CHECK(twice.value == once.value);
        CHECK(twice.unit == once.unit);
    }
}

TEST_CASE("plausibility filter") {
    auto cat = VariableCatalog::default_catalog();
    auto r = plausibility_filter(std::vector{event("s", "hr", 0, 300), event("s", "hr", 0, 80)}, *cat);
    REQUIRE(r.kept.size() == 1);
    CHECK(r.kept[0].value == 80);
    REQUIRE(r.rejected.size() == 1);
    CHECK(r.rejected[0].reason.find("above") != std::string::npos);
    auto empty = plausibility_filter(std::vector<RawEvent>{}, *cat);
    CHECK(empty.kept.empty());
    CHECK(empty.rejected.empty());
}

TEST_CASE("hourly median resampling") {
    auto cat = VariableCatalog::default_catalog();
    const auto st = testing::statics("s", 10.5);
    std::vector<RawEvent> ev{event("s", "map", 0.2, 65), event("s", "map", 0.5, 70), event("s", "map", 0.9, 80),
                             event("s", "hr", 3.1, 100), event("s", "hr", 3.8, 110)};
    auto g = resample_hourly(ev, st, cat);
    CHECK(g.n_hours == 11);
    CHECK(g.value("map", 0) == 70);
    CHECK(g.series_counts("map")[0] == 3);
    CHECK(g.value("hr", 3) == 105);
    CHECK(is_missing(g.value("hr", 7)));
    CHECK(g.series_counts("hr")[7] == 0);

    SUBCASE("permutation invariant") {
        auto shuffled = ev;
        std::reverse(shuffled.begin(), shuffled.end());
        auto h = resample_hourly(shuffled, st, cat);
        for (std::size_t v = 0; v < g.values.size(); ++v) {
            CHECK(g.counts[v] == h.counts[v]);
            for (std::size_t t = 0; t < g.values[v].size(); ++t)
                CHECK((g.values[v][t] == h.values[v][t] || (is_missing(g.values[v][t]) && is_missing(h.values[v][t]))));
        }
    }
    SUBCASE("pre-admission events") {
        std::vector<RawEvent> pre{event("s", "hr", -2.0, 90), event("s", "hr", 5.0, 100)};
        ResampleReport rep;
        auto dropped = resample_hourly(pre, st, cat, {}, &rep);
        CHECK(rep.dropped_pre_icu == 1);
        CHECK(is_missing(carry_forward(dropped).value("hr", 0)));
        auto seeded = resample_hourly(pre, st, cat, ResampleOptions{true}, &rep);
        CHECK(seeded.series_counts("hr")[0] == 0);
        CHECK(carry_forward(seeded).value("hr", 0) == 90);
    }
    SUBCASE("after discharge dropped") {
        ResampleReport rep;
        resample_hourly(std::vector{event("s", "hr", 11.2, 80)}, st, cat, {}, &rep);
        CHECK(rep.dropped_after_discharge == 1);
    }
    SUBCASE("mismatched stay") {
        CHECK_THROWS_AS(resample_hourly(std::vector{event("other", "hr", 1, 80)}, st, cat), SchemaError);
    }
}

TEST_CASE("resampled median lies within the hour's range") {
    auto cat = VariableCatalog::default_catalog();
    Rng rng(3);
    const auto st = testing::statics("s", 6);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RawEvent> ev;
        const int k = 1 + static_cast<int>(rng.below(6));
        double lo = 1e9, hi = -1e9;
        for (int i = 0; i < k; ++i) {
            const double x = rng.uniform(40, 160);
            lo = std::min(lo, x);
            hi = std::max(hi, x);
            ev.push_back(event("s", "hr", 2 + rng.uniform(), x));
        }
        auto g = resample_hourly(ev, st, cat);
        CHECK(g.value("hr", 2) >= lo);
        CHECK(g.value("hr", 2) <= hi);
        CHECK(g.series_counts("hr")[2] == k);
    }
}

TEST_CASE("carry forward") {
    auto s = testing::grid("s", 4, {{"hr", {{0, 5}, {3, 7}}}});
    auto f = carry_forward(s);
    auto hr = f.series("hr");
    CHECK(std::vector<double>(hr.begin(), hr.end()) == std::vector<double>{5, 5, 5, 7});
    CHECK(f.counts == s.counts);

    auto lead = carry_forward(testing::grid("s", 3, {{"hr", {{2, 3}}}}));
    CHECK(is_missing(lead.value("hr", 0)));
    CHECK(is_missing(lead.value("hr", 1)));
    CHECK(lead.value("hr", 2) == 3);
    CHECK(is_missing(lead.value("map", 2)));

    auto again = carry_forward(f);
    CHECK(testing::same(again.values, f.values));
}

TEST_CASE("treatment log validation") {
    TreatmentLog log;
    log.stay_id = "s";
    log.ventilation.push_back({5, 3});
    CHECK_THROWS_AS(log.validate(), SchemaError);
}

TEST_CASE("rng is deterministic and seeds are independent") {
    Rng a(42), b(42), c(43);
    for (int i = 0; i < 5; ++i) CHECK(a.next() == b.next());
    CHECK(Rng(42).next() != c.next());
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
    Rng r(9);
    auto idx = r.sample_without_replacement(10, 10);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(idx[i] == i);
}

TEST_CASE("csv reader reports coordinates") {
    const auto path = std::filesystem::temp_directory_path() / "sepsis_csv_test.csv";
    {
        std::ofstream o(path);
        o << "a,b\n1,2\n3,x\n";
    }
    csv::Reader r(path, {"a", "b"});
    REQUIRE(r.next());
    CHECK(r.number(1) == 2);
    REQUIRE(r.next());
    try {
        (void)r.number(1);
        FAIL("expected a schema error");
    } catch (const SchemaError& e) {
        CHECK(e.row() == 3);
        CHECK(e.column() == 2);
    }
    CHECK_THROWS_AS(csv::Reader(path, {"a", "c"}), SchemaError);
    std::filesystem::remove(path);
}

TEST_CASE("atomic file leaves nothing behind when not committed") {
    const auto path = std::filesystem::temp_directory_path() / "sepsis_atomic_test.csv";
    std::filesystem::remove(path);
    {
        csv::AtomicFile f(path);
        f.stream() << "partial";
    }
    CHECK_FALSE(std::filesystem::exists(path));
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    {
        csv::AtomicFile f(path);
        f.stream() << "done";
        f.commit();
    }
    CHECK(std::filesystem::exists(path));
    std::filesystem::remove(path);
}

TEST_CASE("number formatting round-trips") {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123}) CHECK(std::stod(csv::format_number(x)) == x);
    CHECK(csv::format_number(kMissing).empty());
}
