#include "glassbox/metrics.hpp"

#include <cmath>
#include <vector>

#include "glassbox/errors.hpp"

namespace glassbox {

Metrics compute_metrics(std::span<const std::size_t> predictions,
                        std::span<const std::size_t> labels, std::size_t n_classes) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw DataError("ShapeMismatch", "compute_metrics: length mismatch");
    }
    const std::size_t n = predictions.size();
    std::vector<std::size_t> confusion(n_classes * n_classes, 0);  // [true][pred]
    for (std::size_t i = 0; i < n; ++i) {
        confusion[labels[i] * n_classes + predictions[i]]++;
    }

    Metrics m;
    std::size_t correct = 0;
    for (std::size_t c = 0; c < n_classes; ++c) correct += confusion[c * n_classes + c];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    double prec_sum = 0.0, rec_sum = 0.0, f1_sum = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::size_t tp = confusion[c * n_classes + c];
        std::size_t pred_c = 0, true_c = 0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            pred_c += confusion[k * n_classes + c];
            true_c += confusion[c * n_classes + k];
        }
        const double prec = pred_c > 0 ? static_cast<double>(tp) / static_cast<double>(pred_c) : 0.0;
        const double rec = true_c > 0 ? static_cast<double>(tp) / static_cast<double>(true_c) : 0.0;
        prec_sum += prec;
        rec_sum += rec;
        f1_sum += prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    }
    const double k = static_cast<double>(n_classes);
    m.macro_precision = prec_sum / k;
    m.macro_recall = rec_sum / k;
    m.macro_f1 = f1_sum / k;

    // MCC = (c*s - sum t_k p_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))
    double c_total = static_cast<double>(correct);
    double s = static_cast<double>(n);
    double tp_dot = 0.0, p_sq = 0.0, t_sq = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        double pred_c = 0.0, true_c = 0.0;
        for (std::size_t j = 0; j < n_classes; ++j) {
            pred_c += static_cast<double>(confusion[j * n_classes + c]);
            true_c += static_cast<double>(confusion[c * n_classes + j]);
        }
        tp_dot += true_c * pred_c;
        p_sq += pred_c * pred_c;
        t_sq += true_c * true_c;
    }
    const double denom = std::sqrt((s * s - p_sq) * (s * s - t_sq));
    m.mcc = denom > 0.0 ? (c_total * s - tp_dot) / denom : 0.0;
    return m;
}

}  // namespace glassbox
