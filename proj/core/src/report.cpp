#include <cmath>
#include <fstream>

#include "glassbox/errors.hpp"
#include "glassbox/report.hpp"

namespace glassbox {

Report::Report() {
    body = nlohmann::json::object();
    body["schema_version"] = kReportSchemaVersion;
}

void Report::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("WriteFailed", "cannot write report: " + path);
    out << dump();
}

Report Report::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("ReadFailed", "cannot read report: " + path);
    Report r;
    try {
        r.body = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("ReportParse", std::string("invalid report json: ") + e.what());
    }
    return r;
}

namespace {
void check_finite(const nlohmann::json& j, const std::string& where) {
    if (j.is_number_float()) {
        if (!std::isfinite(j.get<double>())) {
            throw NumericError("NonFiniteReport", "non-finite value at " + where);
        }
    } else if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            check_finite(it.value(), where + "." + it.key());
        }
    } else if (j.is_array()) {
        for (std::size_t i = 0; i < j.size(); ++i) {
            check_finite(j[i], where + "[" + std::to_string(i) + "]");
        }
    }
}
}  // namespace

void Report::validate() const {
    if (!body.is_object() || !body.contains("schema_version") ||
        body["schema_version"] != kReportSchemaVersion) {
        throw UsageError("SchemaVersion", "report schema_version must be " +
                                              std::to_string(kReportSchemaVersion));
    }
    check_finite(body, "report");
}

nlohmann::json Report::without_timestamps() const {
    nlohmann::json j = body;
    if (j.contains("run") && j["run"].is_object()) {
        j["run"].erase("started_at");
        j["run"].erase("finished_at");
    }
    return j;
}

}  // namespace glassbox
