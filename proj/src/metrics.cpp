#include "sfuse/metrics.hpp"

namespace sfuse {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

std::uint64_t ConfusionMatrix::trace() const {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) n += counts[i][i];
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t i) const {
  std::uint64_t n = 0;
  for (auto c : counts[i]) n += c;
  return n;
}

std::uint64_t ConfusionMatrix::col_sum(std::size_t j) const {
  std::uint64_t n = 0;
  for (const auto& row : counts) n += row[j];
  return n;
}

MetricsReport compute_metrics(const ConfusionMatrix& matrix) {
  const std::uint64_t total = matrix.total();
  if (total == 0) throw Error("metrics: confusion matrix is empty");
  MetricsReport r;
  r.accuracy = static_cast<double>(matrix.trace()) / static_cast<double>(total);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    const auto hit = static_cast<double>(matrix.counts[i][i]);
    const std::uint64_t row = matrix.row_sum(i);
    const std::uint64_t col = matrix.col_sum(i);
    if (row == 0) r.no_samples.push_back(static_cast<int>(i));
    if (col == 0) r.no_predictions.push_back(static_cast<int>(i));
    const double rec = row ? hit / static_cast<double>(row) : 0.0;
    const double prec = col ? hit / static_cast<double>(col) : 0.0;
    r.class_recall[i] = rec;
    r.class_precision[i] = prec;
    r.class_f_score[i] = prec + rec > 0.0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    r.precision += prec;
    r.recall += rec;
    r.f_score += r.class_f_score[i];
  }
  r.precision /= static_cast<double>(kNumClasses);
  r.recall /= static_cast<double>(kNumClasses);
  r.f_score /= static_cast<double>(kNumClasses);
  return r;
}

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                std::to_string(labels.size()) + " labels");
  }
  if (labels.empty()) throw Error("evaluate: no samples");
  ConfusionMatrix m;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const int t = labels[k];
    const int p = predictions[k];
    if (t < 0 || t >= static_cast<int>(kNumClasses) || p < 0 || p >= static_cast<int>(kNumClasses)) {
      throw Error("evaluate: class index out of range at sample " + std::to_string(k));
    }
    ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

std::pair<ConfusionMatrix, MetricsReport> evaluate(std::span<const int> predictions, std::span<const int> labels) {
  ConfusionMatrix m = confusion_matrix(predictions, labels);
  return {m, compute_metrics(m)};
}

}  // namespace sfuse
