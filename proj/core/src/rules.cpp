#include "glassbox/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "glassbox/errors.hpp"

namespace glassbox {

bool Rule::matches(std::span<const double> x) const {
    for (const Condition& c : antecedent) {
        if (!c.matches(x[c.feature])) return false;
    }
    return true;
}

std::size_t Rule::predicted_class() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < consequent.size(); ++c) {
        if (consequent[c] > consequent[best]) best = c;
    }
    return best;
}

std::size_t DecisionList::predict(std::span<const double> x) const {
    const int idx = match_index(x);
    return idx < 0 ? default_class : rules[static_cast<std::size_t>(idx)].predicted_class();
}

int DecisionList::match_index(std::span<const double> x) const {
    for (std::size_t i = 0; i < rules.size(); ++i) {
        if (rules[i].matches(x)) return static_cast<int>(i);
    }
    return -1;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void walk(const TreeNode& node, std::vector<Condition>& path, std::size_t tree_id,
          std::size_t& leaf_id, std::vector<Rule>& out) {
    if (node.is_leaf()) {
        Rule r;
        r.antecedent = path;
        std::sort(r.antecedent.begin(), r.antecedent.end(),
                  [](const Condition& a, const Condition& b) { return a.feature < b.feature; });
        r.consequent = node.distribution();
        r.coverage = node.total();
        r.tree_id = tree_id;
        r.leaf_id = leaf_id++;
        out.push_back(std::move(r));
        return;
    }
    auto tighten = [&](bool left) {
        // conditions on the same feature merge into the tightest interval
        for (Condition& c : path) {
            if (c.feature != node.feature) continue;
            if (left) {
                c.upper = std::min(c.upper, node.threshold);
            } else {
                c.lower = std::max(c.lower, node.threshold);
            }
            return true;
        }
        return false;
    };

    {
        std::vector<Condition> saved = path;
        if (!tighten(true)) path.push_back({node.feature, -kInf, node.threshold});
        walk(*node.left, path, tree_id, leaf_id, out);
        path = std::move(saved);
    }
    {
        std::vector<Condition> saved = path;
        if (!tighten(false)) path.push_back({node.feature, node.threshold, kInf});
        walk(*node.right, path, tree_id, leaf_id, out);
        path = std::move(saved);
    }
}

}  // namespace

std::vector<Rule> extract_rules(const TreeNode& tree, std::size_t tree_id) {
    std::vector<Rule> out;
    std::vector<Condition> path;
    std::size_t leaf_id = 0;
    walk(tree, path, tree_id, leaf_id, out);
    return out;
}

Rule score_rule(Rule rule, const Dataset& d) {
    if (d.n_rows == 0) throw DataError("EmptyDataset", "score_rule: no rows");
    const std::size_t cls = rule.predicted_class();
    std::size_t covered = 0, agree = 0;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        if (!rule.matches(d.row(r))) continue;
        ++covered;
        if (d.labels[r] == cls) ++agree;
    }
    rule.coverage = covered;
    rule.support = static_cast<double>(covered) / static_cast<double>(d.n_rows);
    rule.confidence = covered > 0 ? static_cast<double>(agree) / static_cast<double>(covered) : 0.0;
    return rule;
}

std::vector<Rule> filter_rules(std::vector<Rule> rules, const RuleThresholds& t) {
    std::erase_if(rules, [&](const Rule& r) {
        return r.support < t.min_support || r.confidence < t.min_confidence ||
               r.coverage < t.min_coverage;
    });
    return rules;
}

namespace {

std::size_t majority_class(const Dataset& d, const std::vector<char>& covered) {
    std::vector<std::size_t> counts(d.n_classes(), 0);
    bool any = false;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        if (!covered[r]) {
            counts[d.labels[r]]++;
            any = true;
        }
    }
    if (!any) {
        counts.assign(d.n_classes(), 0);
        for (std::size_t y : d.labels) counts[y]++;
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > counts[best]) best = c;
    }
    return best;
}

}  // namespace

DecisionList assemble_decision_list(const std::vector<Rule>& rules, const Dataset& d,
                                    const RuleThresholds& t) {
    DecisionList list;
    list.thresholds = t;

    std::vector<char> covered(d.n_rows, 0);
    std::vector<char> used(rules.size(), 0);
    std::size_t remaining = d.n_rows;

    while (remaining > 0) {
        int best = -1;
        double best_conf = -1.0, best_supp = -1.0;
        std::size_t best_len = 0;
        Rule best_scored;
        for (std::size_t i = 0; i < rules.size(); ++i) {
            if (used[i]) continue;
            const std::size_t cls = rules[i].predicted_class();
            std::size_t cov = 0, agree = 0;
            for (std::size_t r = 0; r < d.n_rows; ++r) {
                if (covered[r] || !rules[i].matches(d.row(r))) continue;
                ++cov;
                if (d.labels[r] == cls) ++agree;
            }
            const double supp = static_cast<double>(cov) / static_cast<double>(d.n_rows);
            const double conf = cov > 0 ? static_cast<double>(agree) / static_cast<double>(cov) : 0.0;
            if (cov < t.min_coverage || supp < t.min_support || conf < t.min_confidence) continue;
            const bool better =
                conf > best_conf ||
                (conf == best_conf &&
                 (supp > best_supp ||
                  (supp == best_supp && rules[i].antecedent.size() < best_len)));
            if (best < 0 || better) {
                best = static_cast<int>(i);
                best_conf = conf;
                best_supp = supp;
                best_len = rules[i].antecedent.size();
                best_scored = rules[i];
                best_scored.coverage = cov;
                best_scored.support = supp;
                best_scored.confidence = conf;
            }
        }
        if (best < 0) break;
        used[static_cast<std::size_t>(best)] = 1;
        for (std::size_t r = 0; r < d.n_rows; ++r) {
            if (!covered[r] && best_scored.matches(d.row(r))) {
                covered[r] = 1;
                --remaining;
            }
        }
        list.rules.push_back(std::move(best_scored));
    }

    list.default_class = majority_class(d, covered);
    list.degenerate = list.rules.empty();
    return list;
}

double list_fidelity(const DecisionList& list, const std::vector<std::size_t>& model_preds,
                     const Dataset& d) {
    if (d.n_rows == 0) throw DataError("EmptyDataset", "list_fidelity: no rows");
    std::size_t agree = 0;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        if (list.predict(d.row(r)) == model_preds[r]) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(d.n_rows);
}

double list_fidelity(const DecisionList& list, const SurrogateModel& surrogate,
                     const Dataset& d) {
    return list_fidelity(list, predict_all(surrogate, d), d);
}

double list_confidence(const DecisionList& list, const Dataset& d) {
    if (d.n_rows == 0) throw DataError("EmptyDataset", "list_confidence: no rows");
    // coverage-weighted mean rule confidence; default rows count with the
    // default class's empirical accuracy on them
    std::vector<std::size_t> match_count(list.rules.size(), 0);
    std::size_t default_count = 0, default_agree = 0;
    double weighted = 0.0;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        const int idx = list.match_index(d.row(r));
        if (idx >= 0) {
            match_count[static_cast<std::size_t>(idx)]++;
        } else {
            ++default_count;
            if (d.labels[r] == list.default_class) ++default_agree;
        }
    }
    for (std::size_t i = 0; i < list.rules.size(); ++i) {
        weighted += static_cast<double>(match_count[i]) * list.rules[i].confidence;
    }
    if (default_count > 0) {
        weighted += static_cast<double>(default_agree);  // count * (agree/count)
    }
    return weighted / static_cast<double>(d.n_rows);
}

std::string rule_to_text(const Rule& rule, const std::vector<std::string>& feature_names,
                         const std::vector<std::string>& class_names) {
    std::ostringstream os;
    os << "IF ";
    if (rule.antecedent.empty()) {
        os << "TRUE";
    } else {
        for (std::size_t i = 0; i < rule.antecedent.size(); ++i) {
            const Condition& c = rule.antecedent[i];
            if (i > 0) os << " AND ";
            const std::string& name = feature_names[c.feature];
            if (c.lower == -kInf) {
                os << name << " < " << c.upper;
            } else if (c.upper == kInf) {
                os << name << " >= " << c.lower;
            } else {
                os << c.lower << " <= " << name << " < " << c.upper;
            }
        }
    }
    os << " THEN class=" << class_names[rule.predicted_class()] << " (conf " << rule.confidence
       << ", supp " << rule.support << ")";
    return os.str();
}

}  // namespace glassbox
