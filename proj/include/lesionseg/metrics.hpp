#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lesionseg/error.hpp"
#include "lesionseg/image.hpp"

namespace lesionseg {

// Intersection over union. Two empty masks score 1.
inline double jaccard(const Mask& a, const Mask& b) {
  if (!same_size(a, b) || a.data.size() != b.data.size()) {
    throw InvalidArgument("jaccard: mask dimensions differ");
  }
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const bool x = a.data[i] != 0, y = b.data[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

inline constexpr double kDefaultJaccardCutoff = 0.65;

// Challenge scoring: anything strictly below the cutoff counts as zero.
inline double thresholded_jaccard(double j, double cutoff = kDefaultJaccardCutoff) {
  if (!(j >= 0.0 && j <= 1.0)) throw InvalidArgument("jaccard value outside [0, 1]");
  return j < cutoff ? 0.0 : j;
}

struct EvalRow {
  std::string id;
  double raw = 0.0;
  double thresholded = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> per_image;
  double mean_raw = 0.0;
  double mean_thresholded = 0.0;
  double cutoff = kDefaultJaccardCutoff;
};

struct EvalPair {
  Mask predicted;
  Mask truth;
  std::string id;
};

inline EvalReport evaluate_dataset(std::span<const EvalPair> pairs,
                                   double cutoff = kDefaultJaccardCutoff) {
  if (pairs.empty()) throw InvalidArgument("evaluate_dataset needs at least one pair");
  EvalReport report;
  report.cutoff = cutoff;
  report.per_image.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (!same_size(p.predicted, p.truth)) {
      throw DataError("size mismatch between prediction and truth for '" + p.id + "'");
    }
    const double j = jaccard(p.predicted, p.truth);
    report.per_image.push_back({p.id, j, thresholded_jaccard(j, cutoff)});
  }
  std::sort(report.per_image.begin(), report.per_image.end(),
            [](const EvalRow& a, const EvalRow& b) { return a.id < b.id; });
  double raw = 0.0, thr = 0.0;
  for (const auto& row : report.per_image) {
    raw += row.raw;
    thr += row.thresholded;
  }
  const auto n = static_cast<double>(report.per_image.size());
  report.mean_raw = raw / n;
  report.mean_thresholded = thr / n;
  return report;
}

}  // namespace lesionseg
