#pragma once

#include <cstddef>
#include <span>

namespace glassbox {

struct Metrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    double mcc = 0.0;  // multiclass, full confusion-matrix formula
};

Metrics compute_metrics(std::span<const std::size_t> predictions,
                        std::span<const std::size_t> labels, std::size_t n_classes);

}  // namespace glassbox
