#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "sfuse/dataset.hpp"

namespace sfuse {

/// counts[i][j]: samples with true label i predicted as j.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses> counts{};

  std::uint64_t total() const;
  std::uint64_t trace() const;
  std::uint64_t row_sum(std::size_t i) const;  // true-label total
  std::uint64_t col_sum(std::size_t j) const;  // predicted total

  bool operator==(const ConfusionMatrix&) const = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;  // macro averages over all classes
  double recall = 0.0;
  double f_score = 0.0;
  std::array<double, kNumClasses> class_precision{};
  std::array<double, kNumClasses> class_recall{};
  std::array<double, kNumClasses> class_f_score{};
  std::vector<int> no_samples;      // classes with an empty row (recall set to 0)
  std::vector<int> no_predictions;  // classes with an empty column (precision set to 0)
};

/// accuracy = trace / total; recall_i = C[i][i] / row_i; precision_i =
/// C[i][i] / col_i; f_i = 2 p r / (p + r) (0 when p + r = 0); macro values
/// divide the per-class sums by the class count.
MetricsReport compute_metrics(const ConfusionMatrix& matrix);

ConfusionMatrix confusion_matrix(std::span<const int> predictions, std::span<const int> labels);

std::pair<ConfusionMatrix, MetricsReport> evaluate(std::span<const int> predictions, std::span<const int> labels);

}  // namespace sfuse
