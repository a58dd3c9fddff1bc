#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "glom/model_selection.hpp"
#include "testing_util.hpp"

using namespace glom;
using glomtest::random_tensor;
namespace fs = std::filesystem;

TEST_CASE("grid sizes match the parameter table: 6/30/120/30") {
  CHECK(GridSpec::table_defaults(KernelKind::linear).size() == 6);
  CHECK(GridSpec::table_defaults(KernelKind::rbf).size() == 30);
  CHECK(GridSpec::table_defaults(KernelKind::polynomial).size() == 120);
  CHECK(GridSpec::table_defaults(KernelKind::sigmoid).size() == 30);
  for (KernelKind k : {KernelKind::linear, KernelKind::rbf,
                       KernelKind::polynomial, KernelKind::sigmoid})
    CHECK(GridSpec::table_defaults(k).cells().size() ==
          GridSpec::table_defaults(k).size());
}

namespace {

// Features trivially separated by coordinate 0.
FeatureMatrix separable_features(int n, int d, std::uint64_t seed) {
  FeatureMatrix fm;
  fm.class_names = {"lesion", "normal"};
  glom::Rng rng(seed);
  fm.data = random_tensor({n, d}, rng, -0.2, 0.2);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    fm.data.at(i, 0) = label == 0 ? rng.uniform(2.0, 3.0) : rng.uniform(-3.0, -2.0);
    fm.ids.push_back("s" + std::to_string(i));
    fm.labels.push_back(label);
    fm.source_index.push_back(i);
    fm.augmented.push_back(0);
  }
  return fm;
}

}  // namespace

TEST_CASE("grid search visits the product and keeps the first best on ties") {
  FeatureMatrix fm = separable_features(40, 8, 100);
  FoldPlan plan = kfold_split(fm.labels, 2, 3);
  GridSearchResult r =
      grid_search(fm, plan, {GridSpec::table_defaults(KernelKind::linear)});
  REQUIRE(r.per_kernel.size() == 1);
  CHECK(r.per_kernel[0].cells.size() == 6);
  // everything separates perfectly, so the tie-break keeps the smallest C
  CHECK(r.best.mean_accuracy == 1.0);
  CHECK(r.best.C == 0.001);
}

TEST_CASE("grid search is deterministic") {
  FeatureMatrix fm = separable_features(30, 6, 101);
  FoldPlan plan = kfold_split(fm.labels, 3, 9);
  std::vector<GridSpec> grids{GridSpec::table_defaults(KernelKind::rbf)};
  GridSearchResult a = grid_search(fm, plan, grids);
  GridSearchResult b = grid_search(fm, plan, grids);
  REQUIRE(a.per_kernel[0].cells.size() == b.per_kernel[0].cells.size());
  for (std::size_t i = 0; i < a.per_kernel[0].cells.size(); ++i)
    CHECK(a.per_kernel[0].cells[i].mean_accuracy ==
          b.per_kernel[0].cells[i].mean_accuracy);
}

TEST_CASE("degenerate single-cell grid returns that cell") {
  FeatureMatrix fm = separable_features(20, 4, 102);
  FoldPlan plan = kfold_split(fm.labels, 2, 1);
  GridSpec g = GridSpec::table_defaults(KernelKind::linear);
  g.C_values = {7.5};
  GridSearchResult r = grid_search(fm, plan, {g});
  CHECK(r.per_kernel[0].cells.size() == 1);
  CHECK(r.best.C == 7.5);

  GridSpec empty = g;
  empty.C_values.clear();
  CHECK_THROWS_AS(grid_search(fm, plan, {empty}), ParameterError);
}

TEST_CASE("grid report rows render in the record shape") {
  GridCellScore cell;
  cell.kernel = KernelSpec{KernelKind::linear};
  cell.C = 1;
  cell.mean_accuracy = 1.0;
  cell.std_accuracy = 0.0;
  CHECK(grid_row_text(KernelKind::linear, cell) ==
        "Linear, 'C': 1, 1.000 (±0.000)");

  GridCellScore rbf;
  rbf.kernel = KernelSpec{KernelKind::rbf, 0.001};
  rbf.C = 0.1;
  rbf.mean_accuracy = 0.9955;
  rbf.std_accuracy = 0.0104;
  CHECK(grid_row_text(KernelKind::rbf, rbf) ==
        "RBF, 'C': 0.1, 'gamma': 0.001, 0.996 (±0.010)");
}

TEST_CASE("select_best_model picks the peak, ties to the lowest fold") {
  auto ckpt = [](double acc, int epoch) {
    ModelCheckpoint c;
    c.meta.val_accuracy = acc;
    c.meta.epoch = epoch;
    return c;
  };
  std::vector<ModelCheckpoint> cands{ckpt(0.90, 3), ckpt(0.95, 9), ckpt(0.93, 1)};
  CHECK(select_best_fold(cands) == 1);
  CHECK(select_best_model(cands).meta.val_accuracy == 0.95);

  std::vector<ModelCheckpoint> equal(4, ckpt(0.8, 2));
  CHECK(select_best_fold(equal) == 0);

  std::vector<ModelCheckpoint> single{ckpt(0.5, 0)};
  CHECK(select_best_fold(single) == 0);
  CHECK_THROWS_AS(select_best_fold({}), DataError);
}

TEST_CASE("mu-sigma rendering matches the table format") {
  CHECK(render_mu_sigma(0.996, 0.008) == "0.996 (±0.008)");
  CHECK(render_mu_sigma(1.0, 0.0) == "1.000 (±0.000)");
}

TEST_CASE("report json round-trips to an equal summary") {
  std::vector<MetricsReport> folds;
  glom::Rng rng(103);
  for (int k = 0; k < 5; ++k) {
    MetricsReport r;
    r.precision = rng.uniform(0.9, 1.0);
    r.recall = rng.uniform(0.9, 1.0);
    r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
    r.accuracy = rng.uniform(0.9, 1.0);
    r.mode = Averaging::macro;
    folds.push_back(r);
  }
  MetricsSummary s = summarize(folds);
  ReportContext ctx{"90/10", "cnn-svm", 5, nlohmann::json{{"kernel", "linear"}}};

  auto dir = fs::temp_directory_path() / "glom_report_tests";
  fs::remove_all(dir);
  std::vector<TrainingTrace> traces(5);
  for (auto& t : traces)
    t.epochs = {{0.5, 0.7, 0.6}, {0.3, 0.9, 0.8}};
  emit_report(s, ctx, dir.string(), &traces);

  REQUIRE(fs::exists(dir / "report.json"));
  REQUIRE(fs::exists(dir / "report.txt"));
  REQUIRE(fs::exists(dir / "traces.csv"));

  std::ifstream in(dir / "report.json");
  nlohmann::json j;
  in >> j;
  auto [loaded, lctx] = report_from_json(j);
  CHECK(loaded == s);
  CHECK(lctx.split == "90/10");
  CHECK(lctx.pipeline == "cnn-svm");
  CHECK(lctx.K == 5);
  CHECK(lctx.best_params.at("kernel") == "linear");

  std::ifstream tr(dir / "traces.csv");
  std::string header;
  std::getline(tr, header);
  CHECK(header == "fold,epoch,train_loss,train_acc,val_acc");
  int rows = 0;
  std::string line;
  while (std::getline(tr, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 10);
}

TEST_CASE("split names") {
  CHECK(split_name(10) == "90/10");
  CHECK(split_name(5) == "80/20");
  CHECK(split_name(3) == "67/33");
  CHECK(split_name(2) == "50/50");
  CHECK(split_name(7) == "K=7");
}

namespace {

// 8 distinct images duplicated so both folds of a manual 2-fold plan hold
// identical data.
LabeledImageSet duplicated_set() {
  LabeledImageSet set;
  set.class_names = {"lesion", "normal"};
  glom::Rng rng(104);
  std::vector<Tensor> images;
  for (int i = 0; i < 8; ++i) {
    const double lo = (i < 4) ? 0.0 : 0.55;
    images.push_back(random_tensor({3, 64, 64}, rng, lo, lo + 0.45));
  }
  for (int half = 0; half < 2; ++half)
    for (int i = 0; i < 8; ++i) {
      Sample s;
      s.id = (half == 0 ? "a" : "b") + std::to_string(i);
      s.image = images[static_cast<std::size_t>(i)];
      s.label = i < 4 ? 0 : 1;
      s.source_index = half * 8 + i;
      set.samples.push_back(std::move(s));
    }
  return set;
}

FoldPlan half_plan() {
  FoldPlan plan;
  plan.n = 16;
  plan.K = 2;
  plan.seed = 0;
  plan.folds = {{0, 1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11, 12, 13, 14, 15}};
  plan.validate();
  return plan;
}

}  // namespace

TEST_CASE("identical folds by construction give zero variance") {
  LabeledImageSet data = duplicated_set();
  FoldPlan plan = half_plan();

  PipelineSpec pipeline;
  pipeline.kind = PipelineKind::cnn_svm;
  pipeline.kernels = {KernelKind::linear};
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 31;
  cfg.learning_rate = 1e-3;

  CvResult r = cross_validate(pipeline, data, plan, cfg);

  REQUIRE(r.mlp_summary.per_fold.size() == 2);
  CHECK(r.mlp_summary.stddev.precision == 0.0);
  CHECK(r.mlp_summary.stddev.recall == 0.0);
  CHECK(r.mlp_summary.stddev.f1 == 0.0);
  CHECK(r.mlp_summary.stddev.accuracy == 0.0);

  REQUIRE(r.svm_summary.has_value());
  CHECK(r.svm_summary->stddev.accuracy == 0.0);
  CHECK(r.summary.per_fold.size() == 2);
  REQUIRE(r.grid.has_value());
  CHECK(r.grid->per_kernel.size() == 1);
  CHECK(r.grid->per_kernel[0].cells.size() == 6);
}

TEST_CASE("validation folds never see augmented or training ids") {
  LabeledImageSet data = duplicated_set();
  FoldPlan plan = half_plan();
  PipelineSpec pipeline;
  pipeline.kind = PipelineKind::cnn_mlp;
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 5;

  CvResult r = cross_validate(pipeline, data, plan, cfg);
  for (const auto& fold : r.folds) {
    CHECK(fold.train_ids.size() == 16);  // 8 originals + 8 augmented copies
    std::set<std::string> train(fold.train_ids.begin(), fold.train_ids.end());
    for (const auto& id : fold.val_ids) {
      CHECK_FALSE(train.count(id));
      CHECK(id.find("~") == std::string::npos);
    }
  }
  CHECK(r.folds[0].trace.epochs.size() == 1);
}

TEST_CASE("cross_validate rejects a mismatched plan") {
  LabeledImageSet data = duplicated_set();
  FoldPlan plan = half_plan();
  plan.n = 15;
  plan.folds[1].pop_back();
  PipelineSpec pipeline;
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(cross_validate(pipeline, data, plan, cfg), PlanError);
}
