#include "memerl/errors.hpp"
#include "memerl/metrics.hpp"
#include "memerl/util.hpp"

namespace memerl {

std::size_t ConfusionMatrix::total() const {
    std::size_t n = 0;
    for (const auto& row : counts)
        for (auto c : row) n += c;
    return n;
}

std::size_t ConfusionMatrix::correct() const { return counts[0][0] + counts[1][1]; }

std::size_t ConfusionMatrix::unparseable() const { return counts[0][2] + counts[1][2]; }

namespace {

int index_of(Label l) { return l == Label::Hateful ? 0 : 1; }

ClassMetrics class_metrics(const ConfusionMatrix& cm, int cls) {
    const int other = 1 - cls;
    const double tp = static_cast<double>(cm.counts[cls][cls]);
    const double fp = static_cast<double>(cm.counts[other][cls]);
    const std::size_t support = cm.counts[cls][0] + cm.counts[cls][1] + cm.counts[cls][2];
    ClassMetrics m;
    m.support = support;
    m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    m.recall = support > 0 ? tp / static_cast<double>(support) : 0.0;
    m.f1 = m.precision + m.recall > 0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

}  // namespace

ClassificationReport classification_report(const std::vector<std::optional<Label>>& preds,
                                           const std::vector<Label>& golds) {
    if (preds.size() != golds.size())
        throw LengthMismatch(strprintf("%zu predictions for %zu gold labels", preds.size(), golds.size()));
    ClassificationReport r;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int pred = preds[i] ? index_of(*preds[i]) : 2;
        ++r.confusion.counts[index_of(golds[i])][pred];
    }
    const std::size_t n = r.confusion.total();
    r.hateful = class_metrics(r.confusion, 0);
    r.non_hateful = class_metrics(r.confusion, 1);
    if (n > 0) {
        r.accuracy = static_cast<double>(r.confusion.correct()) / static_cast<double>(n);
        r.weighted_f1 = (r.hateful.f1 * static_cast<double>(r.hateful.support) +
                         r.non_hateful.f1 * static_cast<double>(r.non_hateful.support)) /
                        static_cast<double>(n);
    }
    r.macro_f1 = 0.5 * (r.hateful.f1 + r.non_hateful.f1);
    return r;
}

}  // namespace memerl
