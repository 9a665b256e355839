#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace reveal {

// Multiclass F1 summary. Micro-F1 for single-label multiclass equals global
// accuracy; macro is the unweighted class mean with 0/0 := 0; weighted is
// the support-weighted mean. Classes absent from both preds and gts keep
// F1 = 0 and still enter the macro mean.
struct MetricsReport {
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double weighted_f1 = 0.0;
    std::vector<double> per_class_f1;
    std::vector<std::size_t> support;  // gt count per class
    std::size_t total = 0;
};

inline MetricsReport evaluate_metrics(const std::vector<std::size_t>& preds,
                                      const std::vector<std::size_t>& gts,
                                      std::size_t num_classes) {
    if (preds.size() != gts.size())
        throw std::invalid_argument("evaluate_metrics: preds/gts length mismatch");
    MetricsReport r;
    r.total = preds.size();
    std::vector<std::size_t> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] >= num_classes || gts[i] >= num_classes)
            throw std::invalid_argument("evaluate_metrics: label id out of range");
        if (preds[i] == gts[i]) {
            ++tp[gts[i]];
            ++correct;
        } else {
            ++fp[preds[i]];
            ++fn[gts[i]];
        }
    }
    r.per_class_f1.resize(num_classes, 0.0);
    r.support.resize(num_classes, 0);
    double macro_sum = 0.0, weighted_sum = 0.0;
    for (std::size_t k = 0; k < num_classes; ++k) {
        r.support[k] = tp[k] + fn[k];
        double denom = static_cast<double>(2 * tp[k] + fp[k] + fn[k]);
        double f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp[k]) / denom : 0.0;
        r.per_class_f1[k] = f1;
        macro_sum += f1;
        weighted_sum += f1 * static_cast<double>(r.support[k]);
    }
    r.macro_f1 = num_classes ? macro_sum / static_cast<double>(num_classes) : 0.0;
    r.weighted_f1 = r.total ? weighted_sum / static_cast<double>(r.total) : 0.0;
    r.micro_f1 = r.total ? static_cast<double>(correct) / static_cast<double>(r.total) : 0.0;
    return r;
}

}  // namespace reveal
