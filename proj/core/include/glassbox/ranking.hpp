#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace glassbox {

// Per-input-feature relevance with a descending order and a chosen cut.
// Ties in score order break to the lower original index.
struct FeatureRanking {
    std::vector<double> scores;       // length M, nonnegative
    std::vector<std::size_t> order;   // permutation of [0, M) by descending score
    std::size_t k_cut = 0;
    std::string method;  // attention-input | attention-embedding-chained | sensitivity

    static FeatureRanking from_scores(std::vector<double> scores, std::size_t k_cut,
                                      std::string method);
};

}  // namespace glassbox
