#include "glassbox/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "glassbox/errors.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox {

FeatureRanking FeatureRanking::from_scores(std::vector<double> scores, std::size_t k_cut,
                                           std::string method) {
    FeatureRanking r;
    r.order.resize(scores.size());
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    r.scores = std::move(scores);
    r.k_cut = k_cut;
    r.method = std::move(method);
    return r;
}

void Dataset::validate() const {
    if (n_rows < 1 || n_cols < 1) throw DataError("EmptyDataset", "dataset has no rows or columns");
    if (features.size() != n_rows * n_cols) throw DataError("ShapeMismatch", "feature buffer size");
    if (labels.size() != n_rows) throw DataError("ShapeMismatch", "label count");
    if (class_names.size() < 2) throw DataError("InvalidConfig", "need at least two classes");
    if (feature_names.size() != n_cols) throw DataError("ShapeMismatch", "feature name count");
    for (double v : features) {
        if (!std::isfinite(v)) throw DataError("NonFiniteValue", "non-finite feature value");
    }
    for (std::size_t y : labels) {
        if (y >= class_names.size()) throw DataError("InvalidLabel", "label out of range");
    }
    std::unordered_set<std::string> seen;
    for (const auto& n : feature_names) {
        if (!seen.insert(n).second) throw DataError("DuplicateHeader", "duplicate feature name " + n);
    }
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, delim)) out.push_back(cell);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

std::string strip(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column, char delimiter) {
    std::ifstream in(path);
    if (!in) throw DataError("EmptyFile", "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("EmptyFile", path + " is empty");

    std::vector<std::string> header = split_line(line, delimiter);
    for (auto& h : header) h = strip(h);
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
        if (!seen.insert(h).second) throw DataError("DuplicateHeader", "duplicate column " + h);
    }
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == label_column) label_idx = i;
    }
    if (label_idx == header.size()) {
        throw DataError("MissingColumn", "label column " + label_column + " not in header");
    }

    Dataset d;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i != label_idx) d.feature_names.push_back(header[i]);
    }
    d.n_cols = d.feature_names.size();
    if (d.n_cols == 0) throw DataError("EmptyFile", "no feature columns");

    std::unordered_map<std::string, std::size_t> class_index;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (strip(line).empty()) continue;
        ++row_no;
        std::vector<std::string> cells = split_line(line, delimiter);
        if (cells.size() != header.size()) {
            throw DataError("NonNumericCell",
                            "row " + std::to_string(row_no) + ": wrong field count");
        }
        std::size_t fi = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string cell = strip(cells[c]);
            if (c == label_idx) {
                auto [it, inserted] = class_index.try_emplace(cell, class_index.size());
                if (inserted) d.class_names.push_back(cell);
                d.labels.push_back(it->second);
            } else {
                std::size_t consumed = 0;
                double v = 0.0;
                try {
                    v = std::stod(cell, &consumed);
                } catch (const std::exception&) {
                    consumed = 0;
                }
                if (consumed != cell.size() || cell.empty() || !std::isfinite(v)) {
                    throw DataError("NonNumericCell", "row " + std::to_string(row_no) +
                                                          ", column " + header[c] +
                                                          ": not numeric: '" + cell + "'");
                }
                d.features.push_back(v);
                ++fi;
            }
        }
    }
    d.n_rows = row_no;
    if (d.n_rows == 0) throw DataError("EmptyFile", path + " has no data rows");
    d.validate();
    return d;
}

std::pair<Dataset, ScalerParams> standardize(const Dataset& d) {
    if (d.n_rows < 2) throw DataError("InvalidConfig", "standardize needs at least 2 rows");
    ScalerParams p;
    p.means.assign(d.n_cols, 0.0);
    p.std_devs.assign(d.n_cols, 0.0);
    const double n = static_cast<double>(d.n_rows);
    for (std::size_t c = 0; c < d.n_cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < d.n_rows; ++r) s += d.at(r, c);
        p.means[c] = s / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < d.n_rows; ++r) {
            const double dv = d.at(r, c) - p.means[c];
            ss += dv * dv;
        }
        const double sd = std::sqrt(ss / n);
        p.std_devs[c] = sd > 0.0 ? sd : 0.0;
    }
    return {apply_scaler(d, p), p};
}

Dataset apply_scaler(const Dataset& d, const ScalerParams& p) {
    if (p.means.size() != d.n_cols) throw DataError("ShapeMismatch", "scaler width");
    Dataset out = d;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        for (std::size_t c = 0; c < d.n_cols; ++c) {
            const double sd = p.std_devs[c] > 0.0 ? p.std_devs[c] : 1.0;
            out.features[r * d.n_cols + c] = (d.at(r, c) - p.means[c]) / sd;
        }
    }
    return out;
}

Dataset invert_scaler(const Dataset& d, const ScalerParams& p) {
    if (p.means.size() != d.n_cols) throw DataError("ShapeMismatch", "scaler width");
    Dataset out = d;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        for (std::size_t c = 0; c < d.n_cols; ++c) {
            const double sd = p.std_devs[c] > 0.0 ? p.std_devs[c] : 1.0;
            out.features[r * d.n_cols + c] = d.at(r, c) * sd + p.means[c];
        }
    }
    return out;
}

namespace {

Dataset take_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.n_rows = rows.size();
    out.n_cols = d.n_cols;
    out.feature_names = d.feature_names;
    out.class_names = d.class_names;
    out.features.reserve(rows.size() * d.n_cols);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        auto row = d.row(r);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(d.labels[r]);
    }
    return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw UsageError("InvalidConfig", "test_fraction must be in (0, 1)");
    }
    std::vector<std::vector<std::size_t>> by_class(d.n_classes());
    for (std::size_t r = 0; r < d.n_rows; ++r) by_class[d.labels[r]].push_back(r);

    std::vector<char> in_test(d.n_rows, 0);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& rows = by_class[c];
        if (rows.empty()) continue;
        std::mt19937_64 rng(mix_seed(seed, c));
        std::shuffle(rows.begin(), rows.end(), rng);
        auto n_test = static_cast<std::size_t>(
            std::llround(test_fraction * static_cast<double>(rows.size())));
        n_test = std::min(n_test, rows.size());
        if (n_test == rows.size()) {
            throw DataError("DegenerateSplit",
                            "class " + d.class_names[c] + " would vanish from training set");
        }
        for (std::size_t i = 0; i < n_test; ++i) in_test[rows[i]] = 1;
    }

    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        (in_test[r] ? test_rows : train_rows).push_back(r);
    }
    if (train_rows.empty() || test_rows.empty()) {
        throw DataError("DegenerateSplit", "a partition is empty after rounding");
    }
    return {take_rows(d, train_rows), take_rows(d, test_rows)};
}

SynthDataset synth_highdim(std::size_t n, std::size_t m_total, std::size_t m_informative,
                           std::size_t classes, double noise_sigma, std::uint64_t seed) {
    if (m_informative > m_total || classes < 2 || n == 0 || m_total == 0) {
        throw UsageError("InvalidConfig", "synth_highdim: invalid sizes");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> label_dist(0, classes - 1);

    std::vector<std::size_t> cols(m_total);
    std::iota(cols.begin(), cols.end(), 0);
    std::shuffle(cols.begin(), cols.end(), rng);
    std::vector<std::size_t> informative(cols.begin(),
                                         cols.begin() + static_cast<std::ptrdiff_t>(m_informative));
    std::sort(informative.begin(), informative.end());
    std::vector<char> is_informative(m_total, 0);
    for (std::size_t c : informative) is_informative[c] = 1;

    // Per-(class, informative-column) mean offsets, ~2 sigma apart on average.
    std::vector<double> mu(classes * m_informative);
    for (double& v : mu) v = 2.0 * gauss(rng);
    std::vector<std::size_t> informative_slot(m_total, 0);
    for (std::size_t i = 0; i < informative.size(); ++i) informative_slot[informative[i]] = i;

    SynthDataset out;
    Dataset& d = out.data;
    d.n_rows = n;
    d.n_cols = m_total;
    d.features.resize(n * m_total);
    d.labels.resize(n);
    for (std::size_t c = 0; c < m_total; ++c) d.feature_names.push_back("f" + std::to_string(c));
    for (std::size_t c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));

    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t y = label_dist(rng);
        d.labels[r] = y;
        for (std::size_t c = 0; c < m_total; ++c) {
            double v;
            if (is_informative[c]) {
                v = mu[y * m_informative + informative_slot[c]] + noise_sigma * gauss(rng);
            } else {
                v = gauss(rng);
            }
            d.features[r * m_total + c] = v;
        }
    }
    out.informative = std::move(informative);
    d.validate();
    return out;
}

ReducedDataset reduce_to_topk(const Dataset& d, const FeatureRanking& ranking, std::size_t k) {
    if (k > d.n_cols) throw UsageError("KTooLarge", "k exceeds feature count");
    if (ranking.scores.size() != d.n_cols || ranking.order.size() != d.n_cols) {
        throw DataError("ShapeMismatch", "ranking does not cover all features");
    }
    ReducedDataset out;
    out.rank_order.assign(ranking.order.begin(),
                          ranking.order.begin() + static_cast<std::ptrdiff_t>(k));
    out.selected_indices = out.rank_order;
    std::sort(out.selected_indices.begin(), out.selected_indices.end());

    Dataset& b = out.base;
    b.n_rows = d.n_rows;
    b.n_cols = k;
    b.labels = d.labels;
    b.class_names = d.class_names;
    for (std::size_t c : out.selected_indices) b.feature_names.push_back(d.feature_names[c]);
    b.features.resize(d.n_rows * k);
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        for (std::size_t i = 0; i < k; ++i) {
            b.features[r * k + i] = d.at(r, out.selected_indices[i]);
        }
    }
    return out;
}

}  // namespace glassbox
