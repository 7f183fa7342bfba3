#pragma once

#include <span>
#include <string_view>

namespace adaptkit {

enum class Metric { accuracy, f1, spearman };

std::string_view metric_name(Metric m);
Metric parse_metric(std::string_view name);

// Fraction of exact matches. Throws ValidationError on empty or mismatched input.
double accuracy(std::span<const int> predictions, std::span<const int> labels);

// Binary F1 with class 1 as positive; 0 when precision or recall has a zero denominator.
double f1_binary(std::span<const int> predictions, std::span<const int> labels);

// Pearson correlation of average ranks. 0 when either side is constant.
double spearman(std::span<const double> predictions, std::span<const double> labels);

}  // namespace adaptkit
