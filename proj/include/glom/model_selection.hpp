#ifndef GLOM_MODEL_SELECTION_HPP
#define GLOM_MODEL_SELECTION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "glom/augment.hpp"
#include "glom/dataset.hpp"
#include "glom/error.hpp"
#include "glom/features.hpp"
#include "glom/folds.hpp"
#include "glom/metrics.hpp"
#include "glom/nn.hpp"
#include "glom/svm.hpp"

namespace glom {

// Candidate lists per kernel; the defaults are the standard evaluation grid
// (C: 6 values; gamma: 5; degree: 4).
struct GridSpec {
  KernelKind kind = KernelKind::linear;
  std::vector<double> C_values = {0.001, 0.01, 0.1, 1, 10, 100};
  std::vector<double> gamma_values = {0.001, 0.01, 1, 1.5, 2};
  std::vector<int> degree_values = {1, 2, 3, 4};

  static GridSpec table_defaults(KernelKind kind) {
    GridSpec g;
    g.kind = kind;
    return g;
  }

  void validate() const {
    if (C_values.empty()) throw ParameterError("grid: empty C list");
    if (kind != KernelKind::linear && gamma_values.empty())
      throw ParameterError("grid: empty gamma list");
    if (kind == KernelKind::polynomial && degree_values.empty())
      throw ParameterError("grid: empty degree list");
  }

  // Exact Cartesian product over the lists the kernel uses.
  std::size_t size() const {
    std::size_t s = C_values.size();
    if (kind != KernelKind::linear) s *= gamma_values.size();
    if (kind == KernelKind::polynomial) s *= degree_values.size();
    return s;
  }

  // Enumeration order: C outermost, then gamma, then degree; the tie-break
  // "smaller C, then gamma, then degree" is therefore "first cell wins".
  std::vector<std::pair<KernelSpec, double>> cells() const {
    validate();
    std::vector<std::pair<KernelSpec, double>> out;
    const bool has_gamma = kind != KernelKind::linear;
    const bool has_degree = kind == KernelKind::polynomial;
    for (double C : C_values) {
      if (!has_gamma) {
        out.push_back({KernelSpec{kind}, C});
        continue;
      }
      for (double gamma : gamma_values) {
        if (!has_degree) {
          out.push_back({KernelSpec{kind, gamma}, C});
          continue;
        }
        for (int degree : degree_values)
          out.push_back({KernelSpec{kind, gamma, degree}, C});
      }
    }
    return out;
  }
};

struct GridCellScore {
  KernelSpec kernel;
  double C = 1.0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
};

struct KernelGridOutcome {
  KernelKind kind;
  std::vector<GridCellScore> cells;  // enumeration order
  GridCellScore best;
};

struct GridSearchResult {
  std::vector<KernelGridOutcome> per_kernel;
  GridCellScore best;  // cross-kernel ties resolved by kernel declaration order
};

namespace ms_detail {

// One fold's SVM subproblem: training rows first, then validation rows, with
// the dot products and squared distances shared by every grid cell.
struct FoldProblem {
  int nt = 0, nv = 0;
  std::vector<int> train_labels, val_labels;
  int num_classes = 0;
  std::vector<double> dot, sqd;  // (nt+nv)^2 row-major

  int total() const { return nt + nv; }
};

inline FoldProblem build_fold_problem(const Tensor& rows, int nt,
                                      std::vector<int> train_labels,
                                      std::vector<int> val_labels,
                                      int num_classes) {
  FoldProblem fp;
  fp.nt = nt;
  fp.nv = rows.dim(0) - nt;
  fp.train_labels = std::move(train_labels);
  fp.val_labels = std::move(val_labels);
  fp.num_classes = num_classes;
  const int m = rows.dim(0), d = rows.dim(1);
  fp.dot.resize(static_cast<std::size_t>(m) * m);
  using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<MatRM>(fp.dot.data(), m, m).noalias() =
      Eigen::Map<const MatRM>(rows.data(), m, d) *
      Eigen::Map<const MatRM>(rows.data(), m, d).transpose();
  fp.sqd.resize(fp.dot.size());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      fp.sqd[static_cast<std::size_t>(i) * m + j] =
          std::max(fp.dot[static_cast<std::size_t>(i) * m + i] +
                       fp.dot[static_cast<std::size_t>(j) * m + j] -
                       2.0 * fp.dot[static_cast<std::size_t>(i) * m + j],
                   0.0);
  return fp;
}

// Kernel matrix over the fold's rows for one parameter cell.
inline std::vector<double> map_kernel(const FoldProblem& fp,
                                      const KernelSpec& resolved) {
  const std::size_t m2 = fp.dot.size();
  std::vector<double> K(m2);
  switch (resolved.kind) {
    case KernelKind::linear:
      K = fp.dot;
      break;
    case KernelKind::rbf:
      for (std::size_t i = 0; i < m2; ++i)
        K[i] = std::exp(-resolved.gamma * fp.sqd[i]);
      break;
    case KernelKind::polynomial:
      for (std::size_t i = 0; i < m2; ++i)
        K[i] = std::pow(resolved.gamma * fp.dot[i] + resolved.coef0,
                        static_cast<double>(resolved.degree));
      break;
    case KernelKind::sigmoid:
      for (std::size_t i = 0; i < m2; ++i)
        K[i] = std::tanh(resolved.gamma * fp.dot[i] + resolved.coef0);
      break;
  }
  return K;
}

// Validation predictions for one cell: a direct binary machine for two
// classes, one-vs-all otherwise.
inline std::vector<int> predict_fold(const FoldProblem& fp,
                                     const KernelSpec& resolved, double C,
                                     const SmoOptions& opt) {
  const int m = fp.total();
  const std::vector<double> K = map_kernel(fp, resolved);
  auto k_at = [&](int i, int j) {
    return K[static_cast<std::size_t>(i) * m + j];
  };

  const int machines = fp.num_classes == 2 ? 1 : fp.num_classes;
  std::vector<std::vector<double>> decisions(
      static_cast<std::size_t>(machines),
      std::vector<double>(static_cast<std::size_t>(fp.nv), 0.0));
  for (int c = 0; c < machines; ++c) {
    std::vector<int> y;
    y.reserve(static_cast<std::size_t>(fp.nt));
    for (int l : fp.train_labels) y.push_back(l == c ? +1 : -1);
    SmoSolution sol = smo_solve(fp.nt, y, k_at, C, opt);
    for (int v = 0; v < fp.nv; ++v) {
      double f = sol.bias;
      for (int i = 0; i < fp.nt; ++i)
        if (sol.alpha[static_cast<std::size_t>(i)] > 0)
          f += sol.alpha[static_cast<std::size_t>(i)] *
               y[static_cast<std::size_t>(i)] * k_at(i, fp.nt + v);
      decisions[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)] = f;
    }
  }

  std::vector<int> pred(static_cast<std::size_t>(fp.nv), 0);
  for (int v = 0; v < fp.nv; ++v) {
    if (fp.num_classes == 2) {
      pred[static_cast<std::size_t>(v)] =
          decisions[0][static_cast<std::size_t>(v)] >= 0 ? 0 : 1;
    } else {
      int best = 0;
      double best_val = decisions[0][static_cast<std::size_t>(v)];
      for (int c = 1; c < machines; ++c)
        if (decisions[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)] >
            best_val) {
          best_val = decisions[static_cast<std::size_t>(c)][static_cast<std::size_t>(v)];
          best = c;
        }
      pred[static_cast<std::size_t>(v)] = best;
    }
  }
  return pred;
}

inline double fold_accuracy(const FoldProblem& fp, const std::vector<int>& pred) {
  int ok = 0;
  for (int v = 0; v < fp.nv; ++v)
    if (pred[static_cast<std::size_t>(v)] == fp.val_labels[static_cast<std::size_t>(v)])
      ++ok;
  return fp.nv > 0 ? static_cast<double>(ok) / fp.nv : 0.0;
}

// Scores every cell of every grid over the given fold problems.
inline GridSearchResult run_grids(const std::vector<FoldProblem>& folds,
                                  const std::vector<GridSpec>& grids,
                                  const SmoOptions& opt) {
  if (folds.empty()) throw PlanError("grid search: no folds");
  const int d_hint = 0;
  (void)d_hint;
  GridSearchResult result;
  bool any = false;
  for (const auto& grid : grids) {
    KernelGridOutcome outcome;
    outcome.kind = grid.kind;
    bool first = true;
    for (const auto& [kernel, C] : grid.cells()) {
      GridCellScore score;
      score.kernel = kernel;
      score.C = C;
      std::vector<MetricsReport> accs;
      double sum = 0.0;
      std::vector<double> per_fold;
      for (const auto& fp : folds) {
        const KernelSpec resolved = kernel;  // grid gammas are explicit
        const double acc = fold_accuracy(fp, predict_fold(fp, resolved, C, opt));
        per_fold.push_back(acc);
        sum += acc;
      }
      score.mean_accuracy = sum / static_cast<double>(per_fold.size());
      double var = 0.0;
      for (double a : per_fold) {
        const double d = a - score.mean_accuracy;
        var += d * d;
      }
      score.std_accuracy = per_fold.size() > 1
                               ? std::sqrt(var / (static_cast<double>(per_fold.size()) - 1.0))
                               : 0.0;
      outcome.cells.push_back(score);
      // strict > keeps the first (smallest C/gamma/degree) cell on ties
      if (first || score.mean_accuracy > outcome.best.mean_accuracy) {
        outcome.best = score;
        first = false;
      }
    }
    if (!any || outcome.best.mean_accuracy > result.best.mean_accuracy) {
      result.best = outcome.best;
      any = true;
    }
    result.per_kernel.push_back(std::move(outcome));
  }
  return result;
}

}  // namespace ms_detail

// Exhaustive kernel-parameter search scored by cross-validated accuracy on
// the plan's held-out folds. Rows with augmented provenance join every
// training side their source belongs to and never the validation side.
inline GridSearchResult grid_search(const FeatureMatrix& features,
                                    const FoldPlan& plan,
                                    const std::vector<GridSpec>& grids,
                                    const SmoOptions& opt = {}) {
  features.validate();
  for (int idx : features.source_index)
    if (idx < 0 || idx >= plan.n)
      throw PlanError("grid search: feature row source outside the fold plan");

  const int num_classes = static_cast<int>(features.class_names.size());
  std::vector<ms_detail::FoldProblem> folds;
  for (int k = 0; k < plan.K; ++k) {
    std::vector<char> in_fold(static_cast<std::size_t>(plan.n), 0);
    for (int i : plan.folds[static_cast<std::size_t>(k)])
      in_fold[static_cast<std::size_t>(i)] = 1;

    std::vector<int> train_rows, val_rows;
    for (int r = 0; r < features.rows(); ++r) {
      const bool held_out = in_fold[static_cast<std::size_t>(
          features.source_index[static_cast<std::size_t>(r)])];
      if (!held_out)
        train_rows.push_back(r);
      else if (!features.augmented[static_cast<std::size_t>(r)])
        val_rows.push_back(r);
    }
    if (train_rows.empty() || val_rows.empty())
      throw PlanError("grid search: fold " + std::to_string(k) +
                      " has an empty side");

    Tensor rows({static_cast<int>(train_rows.size() + val_rows.size()),
                 features.dim()});
    std::vector<int> train_labels, val_labels;
    int at = 0;
    for (int r : train_rows) {
      const auto src = features.row(r);
      std::copy(src.begin(), src.end(),
                rows.data() + static_cast<std::size_t>(at++) * features.dim());
      train_labels.push_back(features.labels[static_cast<std::size_t>(r)]);
    }
    for (int r : val_rows) {
      const auto src = features.row(r);
      std::copy(src.begin(), src.end(),
                rows.data() + static_cast<std::size_t>(at++) * features.dim());
      val_labels.push_back(features.labels[static_cast<std::size_t>(r)]);
    }
    // grid gammas are explicit values; resolve the "1/num_features" default
    // for cells that leave gamma unset
    folds.push_back(ms_detail::build_fold_problem(
        rows, static_cast<int>(train_rows.size()), std::move(train_labels),
        std::move(val_labels), num_classes));
  }

  std::vector<GridSpec> resolved = grids;
  for (auto& g : resolved) g.validate();
  return ms_detail::run_grids(folds, resolved, opt);
}

inline std::string grid_param_text(const GridCellScore& cell) {
  char buf[96];
  std::string out;
  std::snprintf(buf, sizeof buf, "'C': %g", cell.C);
  out += buf;
  if (cell.kernel.uses_gamma()) {
    std::snprintf(buf, sizeof buf, ", 'gamma': %g", cell.kernel.gamma);
    out += buf;
  }
  if (cell.kernel.kind == KernelKind::polynomial) {
    std::snprintf(buf, sizeof buf, ", 'degree': %d", cell.kernel.degree);
    out += buf;
  }
  return out;
}

inline std::string kernel_display_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::linear: return "Linear";
    case KernelKind::rbf: return "RBF";
    case KernelKind::polynomial: return "Polynomial";
    case KernelKind::sigmoid: return "Sigmoid";
  }
  return "?";
}

// Record shape: "Linear, 'C': 1, 1.000 (±0.000)".
inline std::string grid_row_text(KernelKind kind, const GridCellScore& cell) {
  char buf[64];
  std::snprintf(buf, sizeof buf, ", %.3f (±%.3f)", cell.mean_accuracy,
                cell.std_accuracy);
  return kernel_display_name(kind) + ", " + grid_param_text(cell) + buf;
}

// Best epoch across folds: highest stored validation accuracy, ties to the
// lowest fold index, then the earliest epoch.
inline int select_best_fold(const std::vector<ModelCheckpoint>& checkpoints) {
  if (checkpoints.empty()) throw DataError("select_best_model: no candidates");
  int best = 0;
  for (int i = 1; i < static_cast<int>(checkpoints.size()); ++i) {
    const auto& a = checkpoints[static_cast<std::size_t>(i)].meta;
    const auto& b = checkpoints[static_cast<std::size_t>(best)].meta;
    if (a.val_accuracy > b.val_accuracy) best = i;
  }
  return best;
}

inline const ModelCheckpoint& select_best_model(
    const std::vector<ModelCheckpoint>& checkpoints) {
  return checkpoints[static_cast<std::size_t>(select_best_fold(checkpoints))];
}

enum class PipelineKind { cnn_mlp, cnn_svm };

struct PipelineSpec {
  PipelineKind kind = PipelineKind::cnn_svm;
  int arch_id = 4;
  int input_size = 64;
  FinalActivation head = FinalActivation::softmax;
  FeatureTap tap = FeatureTap::backbone;
  AugmentSpec augment;  // ranges only; the seed is derived from the train seed
  std::vector<KernelKind> kernels = {KernelKind::linear, KernelKind::rbf,
                                     KernelKind::polynomial, KernelKind::sigmoid};
  SmoOptions smo;
  int positive_class = 0;  // binary metrics: which class is the lesion
  std::optional<ModelCheckpoint> init_from;  // head-adapted transfer start
};

struct FoldOutcome {
  MetricsReport mlp_report;
  ModelCheckpoint checkpoint;
  TrainingTrace trace;
  std::vector<std::string> train_ids, val_ids;  // provenance, for leak checks
};

struct CvResult {
  MetricsSummary summary;                  // the requested pipeline's metrics
  MetricsSummary mlp_summary;
  std::optional<MetricsSummary> svm_summary;
  std::vector<FoldOutcome> folds;
  int best_fold = 0;
  std::optional<GridSearchResult> grid;
};

namespace ms_detail {

inline LabeledImageSet subset(const LabeledImageSet& data,
                              const std::vector<int>& indices) {
  LabeledImageSet out;
  out.class_names = data.class_names;
  for (int i : indices) out.samples.push_back(data.samples[static_cast<std::size_t>(i)]);
  return out;
}

inline MetricsReport report_for(const std::vector<int>& truth,
                                const std::vector<int>& pred,
                                const std::vector<std::string>& names,
                                int positive_class) {
  ConfusionMatrix cm = ConfusionMatrix::from_pairs(
      names, std::span<const int>(truth), std::span<const int>(pred));
  return names.size() == 2
             ? compute_metrics(cm, Averaging::binary, positive_class)
             : compute_metrics(cm, Averaging::macro);
}

}  // namespace ms_detail

// The experiment harness. For every fold: augment the training folds (the
// validation fold only ever sees originals), train the CNN, and score the
// best checkpoint on the held-out fold. The cnn-svm pipeline then takes the
// best backbone across folds, re-extracts features per fold, grid-searches
// the kernels, and reports the winning configuration's per-fold metrics.
inline CvResult cross_validate(const PipelineSpec& pipeline,
                               const LabeledImageSet& data,
                               const FoldPlan& plan, const TrainConfig& cfg) {
  data.validate();
  if (plan.n != static_cast<int>(data.size()))
    throw PlanError("cross_validate: plan covers " + std::to_string(plan.n) +
                    " samples, data has " + std::to_string(data.size()));
  plan.validate();
  const int num_classes = static_cast<int>(data.class_names.size());

  CvResult result;
  std::vector<MetricsReport> mlp_reports;
  std::vector<ModelCheckpoint> checkpoints;

  auto fold_training_set = [&](int k) {
    LabeledImageSet train_set = ms_detail::subset(data, plan.training_indices(k));
    if (cfg.augmentation) {
      AugmentSpec aug = pipeline.augment;
      aug.seed = derive_seed(cfg.seed, 0xA9);
      train_set = augment(train_set, aug);
    }
    return train_set;
  };

  for (int k = 0; k < plan.K; ++k) {
    LabeledImageSet train_set = fold_training_set(k);
    LabeledImageSet val_set =
        ms_detail::subset(data, plan.folds[static_cast<std::size_t>(k)]);

    // leakage guard: the held-out fold holds originals only, never ids that
    // appear on the training side
    std::set<std::string> train_ids;
    for (const auto& s : train_set.samples) train_ids.insert(s.id);
    for (const auto& s : val_set.samples) {
      if (s.augmented)
        throw PlanError("cross_validate: augmented sample in validation fold");
      if (train_ids.count(s.id))
        throw PlanError("cross_validate: sample '" + s.id +
                        "' leaked into fold " + std::to_string(k));
    }

    Model model =
        pipeline.init_from
            ? adapt_head(*pipeline.init_from, num_classes, cfg.seed)
            : build_architecture(
                  ArchitectureSpec::standard(pipeline.arch_id, num_classes,
                                             pipeline.input_size, pipeline.head),
                  cfg.seed);
    model.spec.feature_tap = pipeline.tap;

    TrainResult tr = train(model, train_set, val_set, cfg);
    tr.best.meta.extra["fold"] = k;

    // per-fold metrics of the best epoch's checkpoint on the held-out fold
    Model best_model = model_from_checkpoint(tr.best);
    std::vector<int> truth, pred;
    for (const auto& s : val_set.samples) {
      Tensor batch({1, 3, pipeline.input_size, pipeline.input_size});
      std::copy(s.image.data(), s.image.data() + s.image.size(), batch.data());
      ForwardResult r = forward(best_model, batch, ops::Mode::eval);
      truth.push_back(s.label);
      pred.push_back(argmax_row(r.probs, 0));
    }
    FoldOutcome outcome;
    outcome.mlp_report = ms_detail::report_for(truth, pred, data.class_names,
                                               pipeline.positive_class);
    outcome.checkpoint = tr.best;
    outcome.trace = std::move(tr.trace);
    for (const auto& s : train_set.samples) outcome.train_ids.push_back(s.id);
    for (const auto& s : val_set.samples) outcome.val_ids.push_back(s.id);

    mlp_reports.push_back(outcome.mlp_report);
    checkpoints.push_back(outcome.checkpoint);
    result.folds.push_back(std::move(outcome));
  }

  result.mlp_summary = summarize(mlp_reports);
  result.best_fold = select_best_fold(checkpoints);

  if (pipeline.kind == PipelineKind::cnn_mlp) {
    result.summary = result.mlp_summary;
    return result;
  }

  // CNN-SVM: one backbone (the best checkpoint across folds) feeds every
  // fold's SVM; training folds keep their augmented copies.
  const ModelCheckpoint& backbone = checkpoints[static_cast<std::size_t>(result.best_fold)];
  std::vector<ms_detail::FoldProblem> problems;
  for (int k = 0; k < plan.K; ++k) {
    LabeledImageSet train_set = fold_training_set(k);
    LabeledImageSet val_set =
        ms_detail::subset(data, plan.folds[static_cast<std::size_t>(k)]);
    Tensor train_f = extract_features(backbone, train_set, cfg.batch_size);
    Tensor val_f = extract_features(backbone, val_set, cfg.batch_size);

    Tensor rows({train_f.dim(0) + val_f.dim(0), train_f.dim(1)});
    std::copy(train_f.data(), train_f.data() + train_f.size(), rows.data());
    std::copy(val_f.data(), val_f.data() + val_f.size(),
              rows.data() + train_f.size());
    problems.push_back(ms_detail::build_fold_problem(
        rows, train_f.dim(0), train_set.labels(), val_set.labels(), num_classes));
  }

  std::vector<GridSpec> grids;
  for (KernelKind kind : pipeline.kernels)
    grids.push_back(GridSpec::table_defaults(kind));
  result.grid = ms_detail::run_grids(problems, grids, pipeline.smo);

  // full metrics of the winning configuration, refit per fold
  std::vector<MetricsReport> svm_reports;
  for (const auto& fp : problems) {
    const std::vector<int> pred = ms_detail::predict_fold(
        fp, result.grid->best.kernel, result.grid->best.C, pipeline.smo);
    svm_reports.push_back(ms_detail::report_for(
        fp.val_labels, pred, data.class_names, pipeline.positive_class));
  }
  result.svm_summary = summarize(svm_reports);
  result.summary = *result.svm_summary;
  return result;
}

// --- reports ---

struct ReportContext {
  std::string split;     // "90/10", "80/20", "67/33", "50/50" or "K=<k>"
  std::string pipeline;  // "cnn-mlp" | "cnn-svm"
  int K = 0;
  nlohmann::json best_params;  // null unless a grid search ran
};

inline std::string split_name(int K) {
  switch (K) {
    case 10: return "90/10";
    case 5: return "80/20";
    case 3: return "67/33";
    case 2: return "50/50";
    default: return "K=" + std::to_string(K);
  }
}

inline std::string render_mu_sigma(double mu, double sigma) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f (±%.3f)", mu, sigma);
  return buf;
}

inline nlohmann::json report_to_json(const MetricsSummary& summary,
                                     const ReportContext& ctx) {
  nlohmann::json per_fold = nlohmann::json::array();
  for (std::size_t k = 0; k < summary.per_fold.size(); ++k) {
    const auto& r = summary.per_fold[k];
    per_fold.push_back({{"fold", k},
                        {"P", r.precision},
                        {"R", r.recall},
                        {"F1", r.f1},
                        {"ACC", r.accuracy},
                        {"mode", r.mode == Averaging::binary ? "binary" : "macro"},
                        {"zero_division", r.zero_division}});
  }
  return nlohmann::json{
      {"split", ctx.split},
      {"pipeline", ctx.pipeline},
      {"K", ctx.K},
      {"per_fold", std::move(per_fold)},
      {"mean",
       {{"P", summary.mean.precision},
        {"R", summary.mean.recall},
        {"F1", summary.mean.f1},
        {"ACC", summary.mean.accuracy}}},
      {"std",
       {{"P", summary.stddev.precision},
        {"R", summary.stddev.recall},
        {"F1", summary.stddev.f1},
        {"ACC", summary.stddev.accuracy}}},
      {"best_params", ctx.best_params}};
}

inline std::pair<MetricsSummary, ReportContext> report_from_json(
    const nlohmann::json& j) {
  MetricsSummary s;
  try {
    for (const auto& rj : j.at("per_fold")) {
      MetricsReport r;
      r.precision = rj.at("P").get<double>();
      r.recall = rj.at("R").get<double>();
      r.f1 = rj.at("F1").get<double>();
      r.accuracy = rj.at("ACC").get<double>();
      r.mode = rj.value("mode", "binary") == "macro" ? Averaging::macro
                                                     : Averaging::binary;
      r.zero_division = rj.value("zero_division", false);
      s.per_fold.push_back(r);
    }
    s.mean.precision = j.at("mean").at("P").get<double>();
    s.mean.recall = j.at("mean").at("R").get<double>();
    s.mean.f1 = j.at("mean").at("F1").get<double>();
    s.mean.accuracy = j.at("mean").at("ACC").get<double>();
    s.stddev.precision = j.at("std").at("P").get<double>();
    s.stddev.recall = j.at("std").at("R").get<double>();
    s.stddev.f1 = j.at("std").at("F1").get<double>();
    s.stddev.accuracy = j.at("std").at("ACC").get<double>();
    ReportContext ctx;
    ctx.split = j.at("split").get<std::string>();
    ctx.pipeline = j.at("pipeline").get<std::string>();
    ctx.K = j.at("K").get<int>();
    ctx.best_params = j.value("best_params", nlohmann::json());
    return {std::move(s), std::move(ctx)};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("report: bad JSON: " + std::string(e.what()));
  }
}

inline std::string report_table_text(const MetricsSummary& summary,
                                     const ReportContext& ctx) {
  char buf[160];
  std::string out = "split " + ctx.split + ", pipeline " + ctx.pipeline +
                    ", K=" + std::to_string(ctx.K) + "\n";
  out += "fold    P        R        F1       ACC\n";
  for (std::size_t k = 0; k < summary.per_fold.size(); ++k) {
    const auto& r = summary.per_fold[k];
    std::snprintf(buf, sizeof buf, "%-7zu %-8.3f %-8.3f %-8.3f %-8.3f\n", k,
                  r.precision, r.recall, r.f1, r.accuracy);
    out += buf;
  }
  out += "mean    " + render_mu_sigma(summary.mean.precision, summary.stddev.precision) +
         "  " + render_mu_sigma(summary.mean.recall, summary.stddev.recall) +
         "  " + render_mu_sigma(summary.mean.f1, summary.stddev.f1) + "  " +
         render_mu_sigma(summary.mean.accuracy, summary.stddev.accuracy) + "\n";
  return out;
}

// Writes <dir>/report.json and <dir>/report.txt; optionally the per-fold
// per-epoch curves as <dir>/traces.csv.
inline void emit_report(const MetricsSummary& summary, const ReportContext& ctx,
                        const std::string& dir,
                        const std::vector<TrainingTrace>* traces = nullptr) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("report: cannot create '" + dir + "': " + ec.message());

  {
    std::ofstream out(std::filesystem::path(dir) / "report.json");
    if (!out) throw IoError("report: cannot write report.json under '" + dir + "'");
    out << report_to_json(summary, ctx).dump(2) << '\n';
  }
  {
    std::ofstream out(std::filesystem::path(dir) / "report.txt");
    if (!out) throw IoError("report: cannot write report.txt under '" + dir + "'");
    out << report_table_text(summary, ctx);
  }
  if (traces) {
    std::ofstream out(std::filesystem::path(dir) / "traces.csv");
    if (!out) throw IoError("report: cannot write traces.csv under '" + dir + "'");
    out << "fold,epoch,train_loss,train_acc,val_acc\n";
    char buf[128];
    for (std::size_t k = 0; k < traces->size(); ++k)
      for (std::size_t e = 0; e < (*traces)[k].epochs.size(); ++e) {
        const auto& ep = (*traces)[k].epochs[e];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%.9g,%.9g,%.9g\n", k, e,
                      ep.train_loss, ep.train_acc, ep.val_acc);
        out << buf;
      }
  }
}

}  // namespace glom

#endif  // GLOM_MODEL_SELECTION_HPP
