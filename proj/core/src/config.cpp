#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "glassbox/config.hpp"
#include "glassbox/errors.hpp"

namespace glassbox {

const std::map<std::string, std::string>& RunConfig::defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", "42"},
        {"threads", "1"},
        {"top_k", "20"},
        {"placement", "embedding"},
        {"surrogate", "ert"},
        {"delimiter", ","},
        {"test_fraction", "0.2"},
        {"synth.rows", "2000"},
        {"synth.cols", "1000"},
        {"synth.informative", "20"},
        {"synth.classes", "4"},
        {"synth.noise_sigma", "0.5"},
        {"cae.embedding_dim", "16"},
        {"cae.epochs", "50"},
        {"cae.batch_size", "64"},
        {"cae.learning_rate", "0.001"},
        {"cae.alpha_recon", "0.5"},
        {"cae.alpha_ce", "0.5"},
        {"cae.weight_decay", "0.0001"},
        {"cae.pool_window", "2"},
        {"cae.channels", "8,16"},
        {"cae.kernel_width", "5"},
        {"probe.heads", "1"},
        {"probe.epochs", "30"},
        {"probe.hidden", "32"},
        {"probe.learning_rate", "0.001"},
        {"sensitivity.scheme", "gaussian"},
        {"sensitivity.weight", "1.0"},
        {"fidelity.targets", "class"},
        {"surrogate.targets", "ground_truth"},
        {"forest.n_trees", "100"},
        {"forest.max_depth", "8"},
        {"forest.min_leaf", "2"},
        {"rules.min_support", "0.01"},
        {"rules.min_confidence", "0.6"},
        {"rules.max_conditions", "5"},
        {"shap.background", "32"},
        {"shap.permutations", "200"},
        {"cf.max_changes", "2"},
        {"cf.quantile_candidates", "9"},
        {"cf.max_results", "3"},
        {"explain.instances", "5"},
    };
    return d;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) {
        throw UsageError("UnknownConfigKey", "unknown config key: " + key);
    }
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

namespace {
std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}
}  // namespace

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("ConfigNotFound", "cannot open config file: " + path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw UsageError("ConfigParse",
                             path + ":" + std::to_string(lineno) + ": expected key=value");
        }
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw UsageError("UnknownConfigKey", "unknown config key: " + key);
    return it->second;
}

long RunConfig::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t pos = 0;
        long r = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw UsageError("ConfigParse", key + ": not an integer: " + v);
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw UsageError("ConfigParse", key + ": not a number: " + v);
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("ConfigParse", key + ": not a boolean: " + v);
}

std::uint64_t RunConfig::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& [k, v] : values_) {
        // worker count is an execution resource, not an experiment parameter;
        // results must be identical at any thread count, so it stays unhashed
        if (k == "threads") continue;
        mix(k);
        mix("=");
        mix(v);
        mix("\n");
    }
    return h;
}

}  // namespace glassbox
