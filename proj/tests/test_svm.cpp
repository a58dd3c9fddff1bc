#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "glom/svm.hpp"
#include "qp_oracle.hpp"
#include "testing_util.hpp"

using namespace glom;
using glomtest::random_tensor;

namespace {

std::span<const double> row_of(const Tensor& X, int i) {
  return {X.data() + static_cast<std::size_t>(i) * X.dim(1),
          static_cast<std::size_t>(X.dim(1))};
}

// Random binary instance with both signs present.
struct Instance {
  Tensor X{{1, 1}};
  std::vector<int> y;
};

Instance random_instance(glom::Rng& rng, int n, int d) {
  Instance inst;
  inst.X = random_tensor({n, d}, rng, -1.0, 1.0);
  inst.y.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) inst.y[static_cast<std::size_t>(i)] = i < n / 2 ? +1 : -1;
  // nudge the two populations apart so instances are not hopeless
  for (int i = 0; i < n; ++i)
    inst.X.at(i, 0) += inst.y[static_cast<std::size_t>(i)] * 0.5;
  return inst;
}

std::vector<double> gram(const Tensor& X, const KernelSpec& spec) {
  const int n = X.dim(0);
  const KernelSpec k = spec.resolved(X.dim(1));
  std::vector<double> K(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      K[static_cast<std::size_t>(i) * n + j] = kernel_eval(k, row_of(X, i), row_of(X, j));
  return K;
}

}  // namespace

TEST_CASE("kernel function values") {
  Tensor x({1, 2}, {1, 2});
  Tensor y({1, 2}, {3, 4});
  KernelSpec lin;
  CHECK(kernel_eval(lin, row_of(x, 0), row_of(y, 0)) == 11.0);

  KernelSpec rbf{KernelKind::rbf, 0.7};
  CHECK(kernel_eval(rbf, row_of(x, 0), row_of(x, 0)) == 1.0);

  KernelSpec poly{KernelKind::polynomial, 1.0, 1, 0.0};
  glom::Rng rng(50);
  for (int t = 0; t < 10; ++t) {
    Tensor a = random_tensor({1, 4}, rng);
    Tensor b = random_tensor({1, 4}, rng);
    CHECK(kernel_eval(poly, row_of(a, 0), row_of(b, 0)) ==
          Catch::Approx(kernel_eval(lin, row_of(a, 0), row_of(b, 0))));
  }

  Tensor bad({1, 3}, {1, 2, 3});
  CHECK_THROWS_AS(kernel_eval(lin, row_of(x, 0), row_of(bad, 0)), DimensionError);
  KernelSpec bad_gamma{KernelKind::rbf, -1.0};
  CHECK_THROWS_AS(kernel_eval(bad_gamma, row_of(x, 0), row_of(y, 0)), ParameterError);
}

TEST_CASE("kernel symmetry for all kinds") {
  glom::Rng rng(51);
  const KernelSpec kinds[] = {{KernelKind::linear},
                              {KernelKind::rbf, 0.5},
                              {KernelKind::polynomial, 1.5, 3, 0.7},
                              {KernelKind::sigmoid, 0.3, 0, 0.2}};
  for (const auto& spec : kinds)
    for (int t = 0; t < 20; ++t) {
      Tensor a = random_tensor({1, 5}, rng);
      Tensor b = random_tensor({1, 5}, rng);
      CHECK(kernel_eval(spec, row_of(a, 0), row_of(b, 0)) ==
            kernel_eval(spec, row_of(b, 0), row_of(a, 0)));
    }
}

TEST_CASE("rbf gram matrices are positive semi-definite") {
  glom::Rng rng(52);
  for (int t = 0; t < 10; ++t) {
    const int n = 4 + static_cast<int>(rng.below(13));
    Tensor X = random_tensor({n, 3}, rng, -2.0, 2.0);
    const auto K = gram(X, KernelSpec{KernelKind::rbf, rng.uniform(0.1, 3.0)});
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = K[static_cast<std::size_t>(i) * n + j];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("two-point problem solves to f(x) = x - 1 exactly") {
  Tensor X({2, 1}, {0.0, 2.0});
  std::vector<int> y{-1, +1};
  SmoDiagnostics diag;
  SvmModel m = smo_fit(X, y, KernelSpec{KernelKind::linear}, 100.0, {}, &diag);

  REQUIRE(m.support_count() == 2);
  CHECK(m.alpha[0] == Catch::Approx(0.5).margin(1e-6));
  CHECK(m.alpha[1] == Catch::Approx(0.5).margin(1e-6));
  CHECK(m.bias == Catch::Approx(-1.0).margin(1e-6));

  const double x1 = 1.0, x3 = 3.0;
  CHECK(decision(m, {&x1, 1}) == Catch::Approx(0.0).margin(1e-6));
  CHECK(decision(m, {&x3, 1}) == Catch::Approx(2.0).margin(1e-6));

  // sum alpha_i y_i = 0
  double say = 0.0;
  for (int i = 0; i < m.support_count(); ++i)
    say += m.alpha[static_cast<std::size_t>(i)] * m.labels[static_cast<std::size_t>(i)];
  CHECK(std::abs(say) < 1e-9);
}

TEST_CASE("xor is not linearly separable: training accuracy at most 3/4") {
  Tensor X({4, 2}, {0, 0, 1, 1, 0, 1, 1, 0});
  std::vector<int> y{-1, -1, +1, +1};
  SvmModel m = smo_fit(X, y, KernelSpec{KernelKind::linear}, 10.0);
  int correct = 0;
  for (int i = 0; i < 4; ++i)
    if (predict(m, row_of(X, i)) == y[static_cast<std::size_t>(i)]) ++correct;

  // enumeration oracle: best half-plane over boundaries through point pairs
  // plus a dense seeded sweep of directions
  int best = 0;
  glom::Rng rng(53);
  auto score = [&](double w0, double w1, double b) {
    int pos = 0, neg = 0;
    for (int i = 0; i < 4; ++i) {
      const double v = w0 * X.at(i, 0) + w1 * X.at(i, 1) + b;
      const int pred = v >= 0 ? +1 : -1;
      if (pred == y[static_cast<std::size_t>(i)]) ++pos;
      if (-pred == y[static_cast<std::size_t>(i)]) ++neg;
    }
    best = std::max({best, pos, neg});
  };
  for (int t = 0; t < 20000; ++t)
    score(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-2, 2));
  CHECK(best == 3);
  CHECK(correct <= best);
}

TEST_CASE("rbf with gamma 100 memorizes distinct points") {
  glom::Rng rng(54);
  Tensor X = random_tensor({12, 2}, rng, 0.0, 1.0);
  std::vector<int> y;
  for (int i = 0; i < 12; ++i) y.push_back(rng.bernoulli(0.5) ? +1 : -1);
  y[0] = +1;
  y[1] = -1;
  SvmModel m = smo_fit(X, y, KernelSpec{KernelKind::rbf, 100.0}, 1e4);
  for (int i = 0; i < 12; ++i)
    CHECK(predict(m, row_of(X, i)) == y[static_cast<std::size_t>(i)]);
}

TEST_CASE("smo rejects degenerate inputs") {
  Tensor X({2, 1}, {0.0, 1.0});
  CHECK_THROWS_AS(smo_fit(X, {1, 1}, KernelSpec{}, 1.0), DataError);
  CHECK_THROWS_AS(smo_fit(X, {1, 0}, KernelSpec{}, 1.0), DataError);
  CHECK_THROWS_AS(smo_fit(X, {1, -1}, KernelSpec{}, -1.0), ParameterError);
}

TEST_CASE("kkt conditions hold at convergence") {
  glom::Rng rng(55);
  const KernelSpec kinds[] = {{KernelKind::linear},
                              {KernelKind::rbf, 0.8},
                              {KernelKind::polynomial, 0.7, 2, 0.5},
                              {KernelKind::sigmoid, 0.2, 0, 0.1}};
  const double tol = 1e-3;
  for (int t = 0; t < 12; ++t) {
    const int n = 6 + static_cast<int>(rng.below(8));
    Instance inst = random_instance(rng, n, 3);
    const KernelSpec& kernel = kinds[t % 4];
    const double C = (t % 3 == 0) ? 0.5 : (t % 3 == 1 ? 1.0 : 10.0);
    SmoDiagnostics diag;
    SvmModel m = smo_fit(inst.X, inst.y, kernel, C, {tol, 0}, &diag);
    CHECK(diag.final_violation <= tol);

    double say = 0.0;
    for (std::size_t i = 0; i < diag.alpha.size(); ++i)
      say += diag.alpha[i] * inst.y[i];
    CHECK(std::abs(say) < 1e-9);

    for (int i = 0; i < n; ++i) {
      const double yf = inst.y[static_cast<std::size_t>(i)] * decision(m, row_of(inst.X, i));
      const double a = diag.alpha[static_cast<std::size_t>(i)];
      const double slack = tol + 1e-9;
      if (a <= 1e-12) {
        CHECK(yf >= 1.0 - slack);
      } else if (a >= C - 1e-12) {
        CHECK(yf <= 1.0 + slack);
      } else {
        CHECK(std::abs(yf - 1.0) <= slack);
      }
    }
  }
}

TEST_CASE("dual objective matches the projected-gradient oracle") {
  glom::Rng rng(56);
  const KernelSpec kinds[] = {{KernelKind::linear},
                              {KernelKind::rbf, 1.0},
                              {KernelKind::polynomial, 0.8, 2, 0.3},
                              {KernelKind::sigmoid, 0.15, 0, 0.05}};
  int instances = 0;
  for (int t = 0; t < 52; ++t) {
    const int n = 4 + static_cast<int>(rng.below(5));  // n <= 8
    Instance inst = random_instance(rng, n, 2);
    const KernelSpec& kernel = kinds[t % 4];
    const double C = (t % 2 == 0) ? 1.0 : 4.0;

    SmoDiagnostics diag;
    smo_fit(inst.X, inst.y, kernel, C, {1e-10, 0}, &diag);
    CHECK(diag.final_violation < 1e-3);

    const auto K = gram(inst.X, kernel);
    const auto oracle = glomtest::qp_dual_oracle(K, inst.y, C);
    CHECK(diag.dual_objective == Catch::Approx(oracle.objective).margin(1e-6));
    ++instances;
  }
  CHECK(instances >= 50);
}

TEST_CASE("empty support set decides by bias alone") {
  SvmModel m;
  m.bias = -0.75;
  m.support_vectors = Tensor({1, 2});
  const double x[2] = {3.0, 4.0};
  CHECK(decision(m, {x, 2}) == -0.75);
  CHECK(predict(m, {x, 2}) == -1);
}

TEST_CASE("predict sign convention, zero maps to +1") {
  SvmModel m;
  m.support_vectors = Tensor({1, 1});
  m.bias = 0.0;
  const double x = 1.0;
  CHECK(predict(m, {&x, 1}) == +1);
  m.bias = -1e-30;
  CHECK(predict(m, {&x, 1}) == -1);
  m.bias = 2.0;
  CHECK(predict(m, {&x, 1}) == +1);
}

TEST_CASE("prediction is invariant under positive scaling of alpha and bias") {
  glom::Rng rng(57);
  Instance inst = random_instance(rng, 14, 3);
  SvmModel m = smo_fit(inst.X, inst.y, KernelSpec{KernelKind::rbf, 0.6}, 2.0);
  SvmModel scaled = m;
  const double lambda = 37.5;
  for (auto& a : scaled.alpha) a *= lambda;
  scaled.bias *= lambda;
  for (int t = 0; t < 30; ++t) {
    Tensor x = random_tensor({1, 3}, rng, -2.0, 2.0);
    CHECK(predict(m, row_of(x, 0)) == predict(scaled, row_of(x, 0)));
  }
}

TEST_CASE("ova fits one machine per class in vocabulary order") {
  glom::Rng rng(58);
  const int per = 8;
  Tensor X({4 * per, 2});
  std::vector<int> labels;
  const double centers[4][2] = {{0, 0}, {5, 0}, {0, 5}, {5, 5}};
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < per; ++i) {
      X.at(c * per + i, 0) = centers[c][0] + rng.normal(0, 0.3);
      X.at(c * per + i, 1) = centers[c][1] + rng.normal(0, 0.3);
      labels.push_back(c);
    }
  OvaModel model = ova_fit(X, labels, {"a", "b", "c", "d"},
                           KernelSpec{KernelKind::linear}, 10.0);
  REQUIRE(model.machines.size() == 4);
  CHECK(model.class_names == std::vector<std::string>{"a", "b", "c", "d"});
  int correct = 0;
  for (int i = 0; i < 4 * per; ++i)
    if (ova_predict(model, row_of(X, i)) == labels[static_cast<std::size_t>(i)]) ++correct;
  CHECK(correct == 4 * per);

  CHECK_THROWS_AS(ova_fit(X, std::vector<int>(labels.size(), 0), {"a"},
                          KernelSpec{}, 1.0),
                  DataError);
}

TEST_CASE("two-class ova agrees with the direct binary machine") {
  glom::Rng rng(59);
  Instance inst = random_instance(rng, 20, 2);
  for (auto& v : inst.X.values()) v *= 2.0;  // widen the margin
  SvmModel direct = smo_fit(inst.X, inst.y, KernelSpec{KernelKind::linear}, 10.0);
  std::vector<int> labels01;
  for (int v : inst.y) labels01.push_back(v > 0 ? 0 : 1);  // class 0 == +1
  OvaModel ova = ova_fit(inst.X, labels01, {"pos", "neg"},
                         KernelSpec{KernelKind::linear}, 10.0);
  for (int i = 0; i < inst.X.dim(0); ++i) {
    const int direct_label = predict(direct, row_of(inst.X, i)) > 0 ? 0 : 1;
    CHECK(ova_predict(ova, row_of(inst.X, i)) == direct_label);
  }
}

TEST_CASE("ova argmax is invariant under strictly increasing maps") {
  glom::Rng rng(60);
  Instance inst = random_instance(rng, 16, 3);
  std::vector<int> labels;
  for (int i = 0; i < 16; ++i) labels.push_back(static_cast<int>(rng.below(3)));
  labels[0] = 0; labels[1] = 1; labels[2] = 2;
  OvaModel model =
      ova_fit(inst.X, labels, {"x", "y", "z"}, KernelSpec{KernelKind::rbf, 0.5}, 5.0);
  auto monotone = [](double v) { return std::tanh(v) * 3.0 + v * v * v; };
  for (int t = 0; t < 20; ++t) {
    Tensor x = random_tensor({1, 3}, rng, -2.0, 2.0);
    int arg_raw = 0, arg_mapped = 0;
    double best_raw = -1e300, best_mapped = -1e300;
    for (std::size_t c = 0; c < model.machines.size(); ++c) {
      const double v = decision(model.machines[c], row_of(x, 0));
      if (v > best_raw) { best_raw = v; arg_raw = static_cast<int>(c); }
      if (monotone(v) > best_mapped) { best_mapped = monotone(v); arg_mapped = static_cast<int>(c); }
    }
    CHECK(ova_predict(model, row_of(x, 0)) == arg_raw);
    CHECK(arg_raw == arg_mapped);
  }
}

TEST_CASE("all-equal decisions tie to class 0") {
  OvaModel model;
  model.class_names = {"a", "b", "c"};
  for (int c = 0; c < 3; ++c) {
    SvmModel m;
    m.support_vectors = Tensor({1, 2});
    m.bias = 0.42;
    model.machines.push_back(m);
  }
  const double x[2] = {1.0, 2.0};
  CHECK(ova_predict(model, {x, 2}) == 0);
}

TEST_CASE("svm serialization round-trips bit-exactly") {
  glom::Rng rng(61);
  Instance inst = random_instance(rng, 18, 4);
  std::vector<int> labels;
  for (int v : inst.y) labels.push_back(v > 0 ? 0 : 1);
  OvaModel model = ova_fit(inst.X, labels, {"lesion", "normal"},
                           KernelSpec{KernelKind::polynomial, 1.5, 2, 0.0}, 2.0);

  auto dir = std::filesystem::temp_directory_path() / "glom_svm_tests";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "model.gsvm").string();
  save_svm(model, path);
  OvaModel loaded = load_svm(path);

  REQUIRE(loaded.machines.size() == model.machines.size());
  CHECK(loaded.class_names == model.class_names);
  for (std::size_t c = 0; c < model.machines.size(); ++c) {
    CHECK(loaded.machines[c].kernel == model.machines[c].kernel);
    CHECK(loaded.machines[c].bias == model.machines[c].bias);
    CHECK(loaded.machines[c].alpha == model.machines[c].alpha);
    CHECK(loaded.machines[c].labels == model.machines[c].labels);
    CHECK(loaded.machines[c].support_vectors == model.machines[c].support_vectors);
  }

  // file-level round trip
  const auto path2 = (dir / "model2.gsvm").string();
  save_svm(loaded, path2);
  std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
  std::string ba((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string bb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(ba == bb);
}

TEST_CASE("svm files reject corruption") {
  glom::Rng rng(62);
  Instance inst = random_instance(rng, 10, 2);
  std::vector<int> labels;
  for (int v : inst.y) labels.push_back(v > 0 ? 0 : 1);
  OvaModel model = ova_fit(inst.X, labels, {"p", "n"}, KernelSpec{}, 1.0);
  auto dir = std::filesystem::temp_directory_path() / "glom_svm_tests";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "corrupt.gsvm").string();
  save_svm(model, path);

  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  {  // truncation
    std::ofstream out(path, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 9));
  }
  CHECK_THROWS_AS(load_svm(path), IntegrityError);

  {  // not a glom-svm header
    std::string mutated = bytes;
    const auto pos = mutated.find("glom-svm");
    mutated.replace(pos, 8, "glom-xxx");
    std::ofstream out(path, std::ios::binary);
    out.write(mutated.data(), static_cast<std::streamsize>(mutated.size()));
  }
  CHECK_THROWS_AS(load_svm(path), FormatError);
}
