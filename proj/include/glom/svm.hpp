#ifndef GLOM_SVM_HPP
#define GLOM_SVM_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "glom/error.hpp"
#include "glom/tensor.hpp"

namespace glom {

enum class KernelKind { linear, rbf, polynomial, sigmoid };

inline const char* kernel_name(KernelKind k) {
  switch (k) {
    case KernelKind::linear: return "linear";
    case KernelKind::rbf: return "rbf";
    case KernelKind::polynomial: return "polynomial";
    case KernelKind::sigmoid: return "sigmoid";
  }
  return "?";
}

inline KernelKind kernel_from_name(const std::string& name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "rbf") return KernelKind::rbf;
  if (name == "polynomial" || name == "poly") return KernelKind::polynomial;
  if (name == "sigmoid") return KernelKind::sigmoid;
  throw ParameterError("svm: unknown kernel '" + name + "'");
}

// gamma <= 0 means "unset"; resolved to 1/num_features at fit time. coef0
// defaults to 0 (the parameter tables give no grid for it).
struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  double gamma = 0.0;
  int degree = 3;
  double coef0 = 0.0;

  bool uses_gamma() const { return kind != KernelKind::linear; }

  KernelSpec resolved(int num_features) const {
    KernelSpec r = *this;
    if (uses_gamma() && r.gamma <= 0.0)
      r.gamma = 1.0 / static_cast<double>(num_features);
    if (kind != KernelKind::polynomial) r.degree = 0;
    if (kind == KernelKind::linear || kind == KernelKind::rbf) r.coef0 = 0.0;
    return r;
  }

  void validate() const {
    if (uses_gamma() && gamma <= 0.0)
      throw ParameterError("svm: gamma must be positive for " +
                           std::string(kernel_name(kind)));
    if (kind == KernelKind::polynomial && degree < 1)
      throw ParameterError("svm: polynomial degree must be a positive integer");
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"kind", kernel_name(kind)}};
    if (uses_gamma()) j["gamma"] = gamma;
    if (kind == KernelKind::polynomial) j["degree"] = degree;
    if (kind == KernelKind::polynomial || kind == KernelKind::sigmoid)
      j["coef0"] = coef0;
    return j;
  }

  static KernelSpec from_json(const nlohmann::json& j) {
    KernelSpec s;
    s.kind = kernel_from_name(j.at("kind").get<std::string>());
    if (j.contains("gamma")) s.gamma = j.at("gamma").get<double>();
    if (j.contains("degree")) s.degree = j.at("degree").get<int>();
    if (j.contains("coef0")) s.coef0 = j.at("coef0").get<double>();
    return s;
  }

  bool operator==(const KernelSpec&) const = default;
};

namespace svm_detail {
inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline double sqdist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}
}  // namespace svm_detail

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                          std::span<const double> y) {
  if (x.size() != y.size())
    throw DimensionError("kernel: feature rows of length " +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  spec.validate();
  switch (spec.kind) {
    case KernelKind::linear:
      return svm_detail::dot(x, y);
    case KernelKind::rbf:
      return std::exp(-spec.gamma * svm_detail::sqdist(x, y));
    case KernelKind::polynomial:
      return std::pow(spec.gamma * svm_detail::dot(x, y) + spec.coef0,
                      static_cast<double>(spec.degree));
    case KernelKind::sigmoid:
      return std::tanh(spec.gamma * svm_detail::dot(x, y) + spec.coef0);
  }
  throw ParameterError("kernel: unknown kind");
}

// Support vectors with their labels and positive dual coefficients, plus the
// bias: everything the decision function needs.
struct SvmModel {
  KernelSpec kernel;  // gamma resolved
  double C = 1.0;
  double bias = 0.0;
  Tensor support_vectors{{1, 1}};     // [v,d]; v may be 0 (empty sum)
  std::vector<double> alpha;          // alpha_i > 0
  std::vector<double> labels;         // y_i in {-1,+1}
  double train_tol = 1e-3;

  int support_count() const { return static_cast<int>(alpha.size()); }
  int dim() const { return support_vectors.dim(1); }

  std::span<const double> sv(int i) const {
    return {support_vectors.data() + static_cast<std::size_t>(i) * dim(),
            static_cast<std::size_t>(dim())};
  }
};

// Eq.-style decision value: sum_i y_i alpha_i N(x_i, x) + b.
inline double decision(const SvmModel& model, std::span<const double> x) {
  if (model.support_count() > 0 && static_cast<int>(x.size()) != model.dim())
    throw DimensionError("svm decision: input dim " + std::to_string(x.size()) +
                         " vs model dim " + std::to_string(model.dim()));
  double f = model.bias;
  for (int i = 0; i < model.support_count(); ++i)
    f += model.labels[static_cast<std::size_t>(i)] *
         model.alpha[static_cast<std::size_t>(i)] *
         kernel_eval(model.kernel, model.sv(i), x);
  return f;
}

// Sign of the decision; exact zero maps to +1.
inline int predict(const SvmModel& model, std::span<const double> x) {
  return decision(model, x) >= 0.0 ? +1 : -1;
}

struct SmoOptions {
  double tol = 1e-3;
  // Pair updates allowed before giving up; 0 means the default 10*n sweeps
  // (10*n*n updates).
  long long max_iter = 0;
};

struct SmoDiagnostics {
  long long iterations = 0;
  double final_violation = 0.0;
  double dual_objective = 0.0;        // max form: sum(alpha) - 0.5 a'Qa
  std::vector<double> alpha;          // full dual vector, zeros included
};

struct SmoSolution {
  std::vector<double> alpha;
  double bias = 0.0;
  long long iterations = 0;
  double final_violation = 0.0;
  double dual_objective = 0.0;  // max form: sum(alpha) - 0.5 a'Qa
};

// Two-variable SMO with maximal-violating-pair selection on the dual of the
// soft-margin problem, over an arbitrary kernel accessor K(i,j). Indefinite
// kernels (sigmoid) get the usual tau floor on the pair curvature.
template <class KFn>
SmoSolution smo_solve(int n, const std::vector<int>& y, KFn&& K, double C,
                      const SmoOptions& opt = {}) {
  if (static_cast<int>(y.size()) != n)
    throw DimensionError("smo: label count mismatch");
  if (C <= 0) throw ParameterError("smo: C must be positive");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v == +1) has_pos = true;
    else if (v == -1) has_neg = true;
    else throw DataError("smo: labels must be +-1");
  }
  if (!has_pos || !has_neg)
    throw DataError("smo: need at least one sample of each sign");

  auto Q = [&](int i, int j) {
    return y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)] *
           K(i, j);
  };

  std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
  std::vector<double> G(static_cast<std::size_t>(n), -1.0);  // (Q a)_i - 1

  const double tau = 1e-12;
  const long long max_iter =
      opt.max_iter > 0 ? opt.max_iter
                       : 10LL * static_cast<long long>(n) * n;
  long long it = 0;
  double violation = std::numeric_limits<double>::infinity();

  while (it < max_iter) {
    // maximal violating pair
    int i = -1, j = -1;
    double m = -std::numeric_limits<double>::infinity();
    double M = std::numeric_limits<double>::infinity();
    for (int t = 0; t < n; ++t) {
      const double yt = y[static_cast<std::size_t>(t)];
      const double v = -yt * G[static_cast<std::size_t>(t)];
      const bool in_up = (yt > 0 && alpha[static_cast<std::size_t>(t)] < C) ||
                         (yt < 0 && alpha[static_cast<std::size_t>(t)] > 0);
      const bool in_low = (yt < 0 && alpha[static_cast<std::size_t>(t)] < C) ||
                          (yt > 0 && alpha[static_cast<std::size_t>(t)] > 0);
      if (in_up && v > m) {
        m = v;
        i = t;
      }
      if (in_low && v < M) {
        M = v;
        j = t;
      }
    }
    violation = m - M;
    if (violation <= opt.tol || i < 0 || j < 0) break;

    const double yi = y[static_cast<std::size_t>(i)];
    const double yj = y[static_cast<std::size_t>(j)];
    const double old_ai = alpha[static_cast<std::size_t>(i)];
    const double old_aj = alpha[static_cast<std::size_t>(j)];

    if (yi != yj) {
      const double quad = std::max(Q(i, i) + Q(j, j) + 2.0 * Q(i, j), tau);
      const double delta = (-G[static_cast<std::size_t>(i)] -
                            G[static_cast<std::size_t>(j)]) / quad;
      const double diff = old_ai - old_aj;
      double ai = old_ai + delta;
      double aj = old_aj + delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > C) { ai = C; aj = C - diff; }
      } else {
        if (aj > C) { aj = C; ai = C + diff; }
      }
      alpha[static_cast<std::size_t>(i)] = ai;
      alpha[static_cast<std::size_t>(j)] = aj;
    } else {
      const double quad = std::max(Q(i, i) + Q(j, j) - 2.0 * Q(i, j), tau);
      const double delta = (G[static_cast<std::size_t>(i)] -
                            G[static_cast<std::size_t>(j)]) / quad;
      const double sum = old_ai + old_aj;
      double ai = old_ai - delta;
      double aj = old_aj + delta;
      if (sum > C) {
        if (ai > C) { ai = C; aj = sum - C; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > C) {
        if (aj > C) { aj = C; ai = sum - C; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
      alpha[static_cast<std::size_t>(i)] = ai;
      alpha[static_cast<std::size_t>(j)] = aj;
    }

    const double dai = alpha[static_cast<std::size_t>(i)] - old_ai;
    const double daj = alpha[static_cast<std::size_t>(j)] - old_aj;
    for (int t = 0; t < n; ++t)
      G[static_cast<std::size_t>(t)] += Q(t, i) * dai + Q(t, j) * daj;
    ++it;
  }

  if (violation > opt.tol)
    throw ConvergenceError(
        "smo: no convergence after " + std::to_string(it) +
        " updates, KKT violation " + std::to_string(violation));

  // bias: average of y_i - sum_j alpha_j y_j K_ij over unbounded support
  // vectors (each equals -y_i G_i); fall back to the violation midpoint.
  double b = 0.0;
  int free_count = 0;
  double m_fin = -std::numeric_limits<double>::infinity();
  double M_fin = std::numeric_limits<double>::infinity();
  for (int t = 0; t < n; ++t) {
    const double yt = y[static_cast<std::size_t>(t)];
    const double v = -yt * G[static_cast<std::size_t>(t)];
    if (alpha[static_cast<std::size_t>(t)] > 0 &&
        alpha[static_cast<std::size_t>(t)] < C) {
      b += v;
      ++free_count;
    }
    const bool in_up = (yt > 0 && alpha[static_cast<std::size_t>(t)] < C) ||
                       (yt < 0 && alpha[static_cast<std::size_t>(t)] > 0);
    const bool in_low = (yt < 0 && alpha[static_cast<std::size_t>(t)] < C) ||
                        (yt > 0 && alpha[static_cast<std::size_t>(t)] > 0);
    if (in_up) m_fin = std::max(m_fin, v);
    if (in_low) M_fin = std::min(M_fin, v);
  }
  b = free_count > 0 ? b / free_count : (m_fin + M_fin) / 2.0;

  SmoSolution sol;
  sol.alpha = std::move(alpha);
  sol.bias = b;
  sol.iterations = it;
  sol.final_violation = violation;
  for (int a = 0; a < n; ++a) {
    sol.dual_objective += sol.alpha[static_cast<std::size_t>(a)];
    // 0.5 a'Qa via the maintained gradient: G = Qa - 1
    sol.dual_objective -= 0.5 * sol.alpha[static_cast<std::size_t>(a)] *
                          (G[static_cast<std::size_t>(a)] + 1.0);
  }
  return sol;
}

// Fits on raw feature rows: resolves the kernel, precomputes the full Gram
// matrix (n stays small here), and keeps only the support vectors.
inline SvmModel smo_fit(const Tensor& X, const std::vector<int>& y,
                        const KernelSpec& kernel_in, double C,
                        const SmoOptions& opt = {},
                        SmoDiagnostics* diag = nullptr) {
  if (X.rank() != 2) throw DimensionError("smo_fit: X must be [n,d]");
  const int n = X.dim(0), d = X.dim(1);
  const KernelSpec kernel = kernel_in.resolved(d);
  kernel.validate();

  auto row = [&](int i) {
    return std::span<const double>(X.data() + static_cast<std::size_t>(i) * d,
                                   static_cast<std::size_t>(d));
  };
  std::vector<double> K(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const double k = kernel_eval(kernel, row(i), row(j));
      K[static_cast<std::size_t>(i) * n + j] = k;
      K[static_cast<std::size_t>(j) * n + i] = k;
    }

  SmoSolution sol = smo_solve(
      n, y,
      [&](int i, int j) { return K[static_cast<std::size_t>(i) * n + j]; }, C,
      opt);

  if (diag) {
    diag->iterations = sol.iterations;
    diag->final_violation = sol.final_violation;
    diag->alpha = sol.alpha;
    diag->dual_objective = sol.dual_objective;
  }

  SvmModel model;
  model.kernel = kernel;
  model.C = C;
  model.bias = sol.bias;
  model.train_tol = opt.tol;
  std::vector<int> keep;
  for (int t = 0; t < n; ++t)
    if (sol.alpha[static_cast<std::size_t>(t)] > 0) keep.push_back(t);
  model.support_vectors =
      Tensor({std::max<int>(1, static_cast<int>(keep.size())), d});
  for (std::size_t s = 0; s < keep.size(); ++s) {
    const auto r = row(keep[s]);
    std::copy(r.begin(), r.end(),
              model.support_vectors.data() + s * static_cast<std::size_t>(d));
    model.alpha.push_back(sol.alpha[static_cast<std::size_t>(keep[s])]);
    model.labels.push_back(static_cast<double>(y[static_cast<std::size_t>(keep[s])]));
  }
  return model;
}

// One binary machine per class, in class-vocabulary order.
struct OvaModel {
  std::vector<std::string> class_names;
  std::vector<SvmModel> machines;
};

inline OvaModel ova_fit(const Tensor& X, const std::vector<int>& labels,
                        const std::vector<std::string>& class_names,
                        const KernelSpec& kernel, double C,
                        const SmoOptions& opt = {}) {
  const int num_classes = static_cast<int>(class_names.size());
  if (num_classes < 2) throw DataError("ova_fit: need at least two classes");
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= num_classes)
      throw DataError("ova_fit: label outside vocabulary");
    ++counts[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < num_classes; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw DataError("ova_fit: class '" + class_names[static_cast<std::size_t>(c)] +
                      "' has no samples");

  OvaModel model;
  model.class_names = class_names;
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> y;
    y.reserve(labels.size());
    for (int l : labels) y.push_back(l == c ? +1 : -1);
    model.machines.push_back(smo_fit(X, y, kernel, C, opt));
  }
  return model;
}

// Argmax of the per-class decision values; ties to the lowest class index.
inline int ova_predict(const OvaModel& model, std::span<const double> x) {
  int best = 0;
  double best_val = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < model.machines.size(); ++c) {
    const double v = decision(model.machines[c], x);
    if (v > best_val) {
      best_val = v;
      best = static_cast<int>(c);
    }
  }
  return best;
}

// --- serialization: JSON header + little-endian double payload ---

static_assert(std::endian::native == std::endian::little,
              "svm payloads are little-endian; big-endian hosts unsupported");

inline constexpr std::uint32_t kSvmFormatVersion = 1;

namespace svm_detail {

inline nlohmann::json machine_header(const SvmModel& m) {
  return nlohmann::json{{"kernel", m.kernel.to_json()},
                        {"C", m.C},
                        {"bias", m.bias},
                        {"tol", m.train_tol},
                        {"v", m.support_count()},
                        {"dim", m.dim()}};
}

inline void append_doubles(std::string& out, const double* p, std::size_t count) {
  out.append(reinterpret_cast<const char*>(p), count * sizeof(double));
}

}  // namespace svm_detail

// A file holds one or more machines (a binary model is the 1-machine case).
inline void save_svm(const OvaModel& model, const std::string& path) {
  nlohmann::json machines = nlohmann::json::array();
  for (const auto& m : model.machines)
    machines.push_back(svm_detail::machine_header(m));
  nlohmann::json header{{"format", "glom-svm"},
                        {"version", kSvmFormatVersion},
                        {"class_names", model.class_names},
                        {"machines", std::move(machines)}};
  const std::string header_bytes = header.dump();

  std::string payload;
  for (const auto& m : model.machines) {
    svm_detail::append_doubles(payload, m.support_vectors.data(),
                               static_cast<std::size_t>(m.support_count()) *
                                   static_cast<std::size_t>(m.dim()));
    svm_detail::append_doubles(payload, m.alpha.data(), m.alpha.size());
    svm_detail::append_doubles(payload, m.labels.data(), m.labels.size());
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("svm: cannot write '" + path + "'");
  const std::uint64_t len = header_bytes.size();
  out.write(reinterpret_cast<const char*>(&len), 8);
  out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("svm: short write to '" + path + "'");
}

inline OvaModel load_svm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("svm: cannot read '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  if (blob.size() < 8) throw IntegrityError("svm: truncated file '" + path + "'");
  std::uint64_t header_len;
  std::memcpy(&header_len, blob.data(), 8);
  if (blob.size() < 8 + header_len)
    throw IntegrityError("svm: truncated header in '" + path + "'");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.substr(8, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("svm: bad header JSON: " + std::string(e.what()));
  }
  if (header.value("format", "") != "glom-svm")
    throw FormatError("svm: '" + path + "' is not a glom-svm file");
  if (header.at("version").get<std::uint32_t>() > kSvmFormatVersion)
    throw VersionError("svm: version newer than supported");

  OvaModel model;
  model.class_names = header.at("class_names").get<std::vector<std::string>>();
  std::size_t at = 8 + header_len;
  auto take = [&](double* dst, std::size_t count) {
    if (blob.size() < at + count * sizeof(double))
      throw IntegrityError("svm: truncated payload in '" + path + "'");
    std::memcpy(dst, blob.data() + at, count * sizeof(double));
    at += count * sizeof(double);
  };
  for (const auto& mh : header.at("machines")) {
    SvmModel m;
    m.kernel = KernelSpec::from_json(mh.at("kernel"));
    m.C = mh.at("C").get<double>();
    m.bias = mh.at("bias").get<double>();
    m.train_tol = mh.at("tol").get<double>();
    const int v = mh.at("v").get<int>();
    const int dim = mh.at("dim").get<int>();
    m.support_vectors = Tensor({std::max(1, v), dim});
    m.alpha.resize(static_cast<std::size_t>(v));
    m.labels.resize(static_cast<std::size_t>(v));
    take(m.support_vectors.data(), static_cast<std::size_t>(v) * dim);
    take(m.alpha.data(), m.alpha.size());
    take(m.labels.data(), m.labels.size());
    model.machines.push_back(std::move(m));
  }
  if (at != blob.size())
    throw IntegrityError("svm: trailing bytes in '" + path + "'");
  return model;
}

}  // namespace glom

#endif  // GLOM_SVM_HPP
