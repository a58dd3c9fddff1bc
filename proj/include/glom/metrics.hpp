#ifndef GLOM_METRICS_HPP
#define GLOM_METRICS_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "glom/error.hpp"

namespace glom {

// Square count matrix indexed by (true class, predicted class).
struct ConfusionMatrix {
  std::vector<std::string> class_names;
  std::vector<long long> counts;  // row-major [true][pred]

  explicit ConfusionMatrix(std::vector<std::string> names = {})
      : class_names(std::move(names)),
        counts(class_names.size() * class_names.size(), 0) {}

  int num_classes() const { return static_cast<int>(class_names.size()); }

  long long& at(int truth, int pred) {
    return counts[static_cast<std::size_t>(truth) * class_names.size() +
                  static_cast<std::size_t>(pred)];
  }
  long long at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * class_names.size() +
                  static_cast<std::size_t>(pred)];
  }

  void add(int truth, int pred) {
    if (truth < 0 || truth >= num_classes() || pred < 0 || pred >= num_classes())
      throw DataError("confusion matrix: class index outside vocabulary");
    ++at(truth, pred);
  }

  long long total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
  }

  long long trace() const {
    long long t = 0;
    for (int c = 0; c < num_classes(); ++c) t += at(c, c);
    return t;
  }

  static ConfusionMatrix from_pairs(std::vector<std::string> names,
                                    std::span<const int> truth,
                                    std::span<const int> pred) {
    if (truth.size() != pred.size())
      throw DataError("confusion matrix: label vectors differ in length");
    ConfusionMatrix cm(std::move(names));
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], pred[i]);
    return cm;
  }
};

enum class Averaging { binary, macro };

struct MetricsReport {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double accuracy = 0;
  Averaging mode = Averaging::binary;
  bool zero_division = false;  // some denominator was empty and yielded 0

  bool operator==(const MetricsReport&) const = default;
};

// Binary mode scores the given positive class (the lesion class by
// convention); macro averages per-class precision/recall unweighted. F1 is
// always the harmonic mean of the report's own P and R.
inline MetricsReport compute_metrics(const ConfusionMatrix& cm, Averaging mode,
                                     int positive_class = 0) {
  if (cm.num_classes() == 0 || cm.total() == 0)
    throw DataError("metrics: empty confusion matrix");
  MetricsReport r;
  r.mode = mode;

  auto ratio = [&](long long num, long long den) {
    if (den == 0) {
      r.zero_division = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };

  if (mode == Averaging::binary) {
    if (cm.num_classes() != 2)
      throw ParameterError("metrics: binary averaging needs a 2-class matrix");
    if (positive_class < 0 || positive_class > 1)
      throw ParameterError("metrics: positive class outside {0,1}");
    const int p = positive_class, n = 1 - positive_class;
    const long long tp = cm.at(p, p), fp = cm.at(n, p), fn = cm.at(p, n);
    r.precision = ratio(tp, tp + fp);
    r.recall = ratio(tp, tp + fn);
  } else {
    double psum = 0, rsum = 0;
    for (int c = 0; c < cm.num_classes(); ++c) {
      long long tp = cm.at(c, c), fp = 0, fn = 0;
      for (int o = 0; o < cm.num_classes(); ++o) {
        if (o == c) continue;
        fp += cm.at(o, c);
        fn += cm.at(c, o);
      }
      psum += ratio(tp, tp + fp);
      rsum += ratio(tp, tp + fn);
    }
    r.precision = psum / cm.num_classes();
    r.recall = rsum / cm.num_classes();
  }
  r.f1 = (r.precision + r.recall) > 0
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  r.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
  return r;
}

struct MetricStats {
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;

  bool operator==(const MetricStats&) const = default;
};

struct MetricsSummary {
  std::vector<MetricsReport> per_fold;
  MetricStats mean;
  MetricStats stddev;  // sample standard deviation (n-1)

  bool operator==(const MetricsSummary&) const = default;
};

// The one canonical aggregation; recomputing from per_fold reproduces mean
// and stddev bit-for-bit.
inline MetricsSummary summarize(std::vector<MetricsReport> per_fold) {
  if (per_fold.empty()) throw DataError("summary: no per-fold reports");
  MetricsSummary s;
  s.per_fold = std::move(per_fold);
  const double k = static_cast<double>(s.per_fold.size());
  auto accumulate = [&](auto get) {
    double sum = 0;
    for (const auto& r : s.per_fold) sum += get(r);
    const double mean = sum / k;
    double var = 0;
    for (const auto& r : s.per_fold) {
      const double d = get(r) - mean;
      var += d * d;
    }
    const double sd = s.per_fold.size() > 1 ? std::sqrt(var / (k - 1.0)) : 0.0;
    return std::pair<double, double>(mean, sd);
  };
  std::tie(s.mean.precision, s.stddev.precision) =
      accumulate([](const MetricsReport& r) { return r.precision; });
  std::tie(s.mean.recall, s.stddev.recall) =
      accumulate([](const MetricsReport& r) { return r.recall; });
  std::tie(s.mean.f1, s.stddev.f1) =
      accumulate([](const MetricsReport& r) { return r.f1; });
  std::tie(s.mean.accuracy, s.stddev.accuracy) =
      accumulate([](const MetricsReport& r) { return r.accuracy; });
  return s;
}

}  // namespace glom

#endif  // GLOM_METRICS_HPP
