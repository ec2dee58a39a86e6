#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "glassbox/config.hpp"
#include "glassbox/errors.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/report.hpp"

using namespace glassbox;

namespace {

std::string temp_path(const std::string& name) { return "/tmp/glassbox_" + name; }

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

TEST_CASE("metrics: perfect predictions score 1 everywhere") {
    std::vector<std::size_t> y = {0, 1, 2, 1, 0, 2};
    Metrics m = compute_metrics(y, y, 3);
    CHECK(m.accuracy == 1.0);
    CHECK(m.macro_precision == 1.0);
    CHECK(m.macro_recall == 1.0);
    CHECK(m.macro_f1 == 1.0);
    CHECK(m.mcc == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("metrics: constant predictions on balanced binary labels give MCC 0") {
    std::vector<std::size_t> preds(10, 0);
    std::vector<std::size_t> labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    Metrics m = compute_metrics(preds, labels, 2);
    CHECK(m.mcc == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m.accuracy == doctest::Approx(0.5));
}

TEST_CASE("metrics: crafted 3-class confusion matrix vs hand computation") {
    // confusion (rows = true, cols = predicted):
    //        p0 p1 p2
    //  t0  [  4  1  0 ]
    //  t1  [  2  3  1 ]
    //  t2  [  0  2  5 ]
    std::vector<std::size_t> labels, preds;
    auto add = [&](std::size_t t, std::size_t p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back(t);
            preds.push_back(p);
        }
    };
    add(0, 0, 4); add(0, 1, 1);
    add(1, 0, 2); add(1, 1, 3); add(1, 2, 1);
    add(2, 1, 2); add(2, 2, 5);

    Metrics m = compute_metrics(preds, labels, 3);
    CHECK(m.accuracy == doctest::Approx(12.0 / 18.0).epsilon(1e-12));

    // per class: precision 4/6, 3/6, 5/6; recall 4/5, 3/6, 5/7
    const double p0 = 4.0 / 6.0, p1 = 3.0 / 6.0, p2 = 5.0 / 6.0;
    const double r0 = 4.0 / 5.0, r1 = 3.0 / 6.0, r2 = 5.0 / 7.0;
    CHECK(m.macro_precision == doctest::Approx((p0 + p1 + p2) / 3.0).epsilon(1e-12));
    CHECK(m.macro_recall == doctest::Approx((r0 + r1 + r2) / 3.0).epsilon(1e-12));
    const double f0 = 2 * p0 * r0 / (p0 + r0);
    const double f1 = 2 * p1 * r1 / (p1 + r1);
    const double f2 = 2 * p2 * r2 / (p2 + r2);
    CHECK(m.macro_f1 == doctest::Approx((f0 + f1 + f2) / 3.0).epsilon(1e-12));

    // multiclass MCC: (c*s - sum t_k p_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))
    const double c = 12, s = 18;
    const double t[3] = {5, 6, 7}, p[3] = {6, 6, 6};
    const double tp_sum = t[0] * p[0] + t[1] * p[1] + t[2] * p[2];
    const double pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    const double tt = t[0] * t[0] + t[1] * t[1] + t[2] * t[2];
    const double mcc = (c * s - tp_sum) / std::sqrt((s * s - pp) * (s * s - tt));
    CHECK(m.mcc == doctest::Approx(mcc).epsilon(1e-12));
}

TEST_CASE("metrics: length mismatch throws") {
    std::vector<std::size_t> a = {0, 1}, b = {0};
    CHECK_THROWS_AS(compute_metrics(a, b, 2), DataError);
}

TEST_CASE("config: defaults, typed getters, unknown keys") {
    RunConfig cfg;
    CHECK(cfg.get_int("seed") == 42);
    CHECK(cfg.get_int("threads") == 1);
    CHECK(cfg.get("placement") == "embedding");
    CHECK(cfg.get_double("test_fraction") == doctest::Approx(0.2));

    cfg.set("seed", "7");
    CHECK(cfg.get_int("seed") == 7);
    CHECK_THROWS_AS(cfg.set("definitely.not.a.key", "1"), UsageError);
    CHECK_THROWS_AS(cfg.get("definitely.not.a.key"), UsageError);
    CHECK_THROWS_AS([&] { cfg.set("seed", "twelve"); return cfg.get_int("seed"); }(),
                    Error);
}

TEST_CASE("config: file load with comments, later flags win") {
    const std::string path = temp_path("cfg_test.conf");
    write_file(path,
               "# comment line\n"
               "seed = 99\n"
               "surrogate = dt\n"
               "\n"
               "top_k=5\n");
    RunConfig cfg;
    cfg.load_file(path);
    CHECK(cfg.get_int("seed") == 99);
    CHECK(cfg.get("surrogate") == "dt");
    CHECK(cfg.get_int("top_k") == 5);
    cfg.set("seed", "100");  // a flag override lands after the file
    CHECK(cfg.get_int("seed") == 100);
    std::remove(path.c_str());

    RunConfig missing;
    CHECK_THROWS_AS(missing.load_file("/tmp/glassbox_no_such_file.conf"), UsageError);
}

TEST_CASE("config hash changes iff a resolved parameter changes") {
    RunConfig a, b;
    CHECK(a.hash() == b.hash());
    b.set("seed", "43");
    CHECK(a.hash() != b.hash());
    b.set("seed", "42");  // back to the default value
    CHECK(a.hash() == b.hash());

    RunConfig c;
    c.set("cae.epochs", c.get("cae.epochs"));  // same value, same hash
    CHECK(c.hash() == a.hash());
}

TEST_CASE("report: schema version, byte-identical round trip") {
    Report r;
    CHECK(r.body.at("schema_version") == kReportSchemaVersion);
    r.body["run"] = {{"seed", 42}, {"started_at", "2024-01-01T00:00:00Z"}};
    r.body["metrics"] = {{"accuracy", 0.94}, {"mcc", 0.91}};
    r.validate();

    const std::string path = temp_path("report_test.json");
    r.save(path);
    Report loaded = Report::load(path);
    CHECK(loaded.dump() == r.dump());
    loaded.save(path);  // save(load(x)) must reproduce the bytes
    std::ifstream in(path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(bytes == r.dump());
    std::remove(path.c_str());
}

TEST_CASE("report: validation rejects bad schema and non-finite numbers") {
    Report wrong;
    wrong.body["schema_version"] = 2;
    CHECK_THROWS_AS(wrong.validate(), UsageError);

    Report nan_report;
    nan_report.body["metrics"]["nested"]["value"] =
        std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(nan_report.validate(), NumericError);
}

TEST_CASE("report: timestamp stripping for rerun comparison") {
    Report a, b;
    a.body["run"] = {{"seed", 1}, {"started_at", "t1"}, {"finished_at", "t2"}};
    b.body["run"] = {{"seed", 1}, {"started_at", "t3"}, {"finished_at", "t4"}};
    a.body["payload"] = {1, 2, 3};
    b.body["payload"] = {1, 2, 3};
    CHECK(a.dump() != b.dump());
    CHECK(a.without_timestamps() == b.without_timestamps());

    b.body["payload"] = {1, 2, 4};
    CHECK(a.without_timestamps() != b.without_timestamps());
}
