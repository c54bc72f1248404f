#pragma once

#include <cstdint>
#include <iomanip>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eafnet::metrics {

// Rows are ground truth, columns are predictions.
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int classes) : k_(classes), counts_(static_cast<std::size_t>(classes) * classes, 0)
    {
        if (classes < 1) throw std::invalid_argument("confusion matrix needs at least one class");
    }

    int classes() const { return k_; }
    std::uint64_t at(int truth, int pred) const { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }
    std::uint64_t& at(int truth, int pred) { return counts_[static_cast<std::size_t>(truth) * k_ + pred]; }
    const std::vector<std::uint64_t>& counts() const { return counts_; }

    std::uint64_t total() const
    {
        std::uint64_t t = 0;
        for (auto c : counts_) t += c;
        return t;
    }

    void merge(const ConfusionMatrix& o)
    {
        if (o.k_ != k_) throw std::invalid_argument("cannot merge confusion matrices of different size");
        for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    }

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int k_ = 0;
    std::vector<std::uint64_t> counts_;
};

inline void update_confusion(ConfusionMatrix& cm, const std::vector<int>& labels, const std::vector<int>& predictions,
                             const std::set<int>& ignore_ids = {})
{
    if (labels.size() != predictions.size()) {
        throw std::invalid_argument("update_confusion: " + std::to_string(labels.size()) + " labels vs " +
                                    std::to_string(predictions.size()) + " predictions");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int t = labels[i], p = predictions[i];
        if (ignore_ids.count(t)) continue;
        if (t < 0 || t >= cm.classes() || p < 0 || p >= cm.classes()) {
            throw std::out_of_range("update_confusion: class id outside 0.." + std::to_string(cm.classes() - 1));
        }
        ++cm.at(t, p);
    }
}

// Per-pixel argmax over N x K x H x W scores; ties go to the lowest class id.
template <class Scores>
std::vector<int> argmax_channels(const Scores& scores, int n, int k, int h, int w)
{
    if (scores.size() != static_cast<std::size_t>(n) * k * h * w) throw std::invalid_argument("argmax: size mismatch");
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<int> out(static_cast<std::size_t>(n) * plane);
    for (int b = 0; b < n; ++b) {
        const auto* base = scores.data() + static_cast<std::size_t>(b) * k * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            int best = 0;
            for (int c = 1; c < k; ++c) {
                if (base[c * plane + i] > base[static_cast<std::size_t>(best) * plane + i]) best = c;
            }
            out[b * plane + i] = best;
        }
    }
    return out;
}

struct ClassMetrics {
    std::optional<double> iou, precision, recall;  // empty when the denominator is zero
};

struct MetricsReport {
    std::vector<ClassMetrics> per_class;
    std::vector<int> evaluated;
    std::optional<double> miou;  // empty when no evaluated class is defined

    void write_csv(std::ostream& os, const std::vector<std::string>& names = {}) const
    {
        const auto cell = [](const std::optional<double>& v) {
            if (!v) return std::string("nan");
            std::ostringstream s;
            s << std::setprecision(17) << *v;
            return s.str();
        };
        os << "class,iou,precision,recall\n";
        for (std::size_t c = 0; c < per_class.size(); ++c) {
            os << (c < names.size() ? names[c] : std::to_string(c)) << ',' << cell(per_class[c].iou) << ','
               << cell(per_class[c].precision) << ',' << cell(per_class[c].recall) << '\n';
        }
        os << "mIoU," << cell(miou) << ",,\n";
    }
};

inline std::vector<int> default_evaluated_classes(int classes)
{
    std::vector<int> v;
    for (int c = 1; c < classes; ++c) v.push_back(c);
    return v;
}

inline MetricsReport compute_metrics(const ConfusionMatrix& cm, const std::vector<int>& evaluated)
{
    const int k = cm.classes();
    MetricsReport r;
    r.evaluated = evaluated;
    r.per_class.resize(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) {
        std::uint64_t tp = cm.at(c, c), fp = 0, fn = 0;
        for (int o = 0; o < k; ++o) {
            if (o == c) continue;
            fp += cm.at(o, c);
            fn += cm.at(c, o);
        }
        auto& m = r.per_class[static_cast<std::size_t>(c)];
        if (tp + fp + fn > 0) m.iou = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    }
    double sum = 0;
    int defined = 0;
    for (int c : evaluated) {
        if (c < 0 || c >= k) throw std::out_of_range("compute_metrics: evaluated class " + std::to_string(c));
        if (const auto& iou = r.per_class[static_cast<std::size_t>(c)].iou) {
            sum += *iou;
            ++defined;
        }
    }
    if (defined > 0) r.miou = sum / defined;
    return r;
}

inline MetricsReport compute_metrics(const ConfusionMatrix& cm)
{
    return compute_metrics(cm, default_evaluated_classes(cm.classes()));
}

}  // namespace eafnet::metrics
