#pragma once

#include <string>

#include "json.hpp"

namespace glassbox {

inline constexpr int kReportSchemaVersion = 1;

// report.json wrapper. Keys are kept sorted (nlohmann default) so that
// load -> save round-trips byte-identically.
struct Report {
    nlohmann::json body;

    Report();

    void save(const std::string& path) const;
    static Report load(const std::string& path);

    // Throws NumericError on any non-finite number, UsageError on schema issues.
    void validate() const;

    // Serialization used for both files and determinism comparison.
    std::string dump() const { return body.dump(2) + "\n"; }

    // Copy with volatile fields (timestamps) blanked, for rerun comparison.
    nlohmann::json without_timestamps() const;
};

}  // namespace glassbox
