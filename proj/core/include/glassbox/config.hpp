#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace glassbox {

// Flat key=value run configuration. Defaults live in the registry; a config
// file and then CLI flags override them (flags win). Unknown keys reject.
class RunConfig {
public:
    RunConfig();

    static const std::map<std::string, std::string>& defaults();

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);  // throws on unknown key
    bool has(const std::string& key) const;

    const std::string& get(const std::string& key) const;
    long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // All resolved key=value pairs, sorted by key.
    const std::map<std::string, std::string>& resolved() const { return values_; }

    // FNV-1a over the sorted resolved pairs.
    std::uint64_t hash() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace glassbox
