#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmv/ndimage.hpp"

namespace mmv {

/// Product-moment correlation over all elements. Throws ZeroVariance.
double pearson(const Image& a, const Image& b);

struct SsimOptions {
  std::size_t window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
};

/// Mean SSIM over every fully contained uniform window. Windows span Y, X and
/// Z when Z is longer than 1; other axes are independent slices. Local
/// statistics use population (co)variance.
double ssim(const Image& a, const Image& b, double data_range, const SsimOptions& options = {});

/// value >= t -> 1, else 0.
Image threshold_mask(const Image& img, double t);

/// 2|P∩G| / (|P|+|G|); 1 when both masks are empty. Throws NonBinaryInput.
double dice_f1(const Image& pred, const Image& gt);
/// |P∩G| / |P∪G|; 1 when both masks are empty. Throws NonBinaryInput.
double iou(const Image& pred, const Image& gt);

enum class Metric { Pearson, Ssim, Dice, Iou };

std::string_view metric_name(Metric m) noexcept;
Metric parse_metric(std::string_view s);

struct MetricReport {
  std::string name;
  std::vector<std::string> ids;  ///< samples that produced a value, in id order
  std::vector<double> values;
  double mean = 0.0;
  double std = 0.0;  ///< population
  std::size_t n = 0;

  /// "<name>: <mean> ± <std> (n=<n>)", three decimals.
  std::string line() const;
};

/// Mean and population std recomputed from `values`.
MetricReport make_report(std::string name, std::vector<std::string> ids, std::vector<double> values);

struct EvalPair {
  std::string id;
  std::filesystem::path prediction;
  std::filesystem::path ground_truth;
};

struct EvalOptions {
  std::vector<Metric> metrics{Metric::Pearson};
  double threshold = 0.5;              ///< applied to predictions before dice/iou
  std::optional<double> data_range;    ///< required for ssim
  std::size_t workers = 1;
};

struct EvalFailure {
  std::string id;
  std::string metric;  ///< empty when the pair could not be loaded at all
  std::string message;
};

struct EvalResult {
  std::vector<MetricReport> reports;  ///< one per requested metric, in request order
  std::vector<EvalFailure> failures;
};

/// Evaluates every pair. Per-sample failures are collected and excluded from
/// the aggregates. Values are reduced in id order whatever the worker count.
EvalResult evaluate_set(const std::vector<EvalPair>& pairs, const EvalOptions& options);

/// Per-sample values, aggregates and failures as sorted-key JSON.
std::string eval_report_json(const EvalResult& result);

}  // namespace mmv
