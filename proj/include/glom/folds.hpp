#ifndef GLOM_FOLDS_HPP
#define GLOM_FOLDS_HPP

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "glom/error.hpp"
#include "glom/random.hpp"

namespace glom {

// Deterministic partition of [0,n) into K folds whose sizes differ by at
// most one, class-stratified to within one sample per class per fold.
struct FoldPlan {
  int n = 0;
  int K = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> folds;

  void validate() const {
    if (static_cast<int>(folds.size()) != K)
      throw PlanError("fold plan: expected " + std::to_string(K) + " folds");
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    int total = 0;
    for (const auto& fold : folds)
      for (int i : fold) {
        if (i < 0 || i >= n || seen[static_cast<std::size_t>(i)])
          throw PlanError("fold plan: indices do not partition [0,n)");
        seen[static_cast<std::size_t>(i)] = 1;
        ++total;
      }
    if (total != n) throw PlanError("fold plan: indices do not cover [0,n)");
  }

  std::vector<int> training_indices(int fold) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < K; ++k) {
      if (k == fold) continue;
      out.insert(out.end(), folds[static_cast<std::size_t>(k)].begin(),
                 folds[static_cast<std::size_t>(k)].end());
    }
    return out;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"n", n}, {"K", K}, {"seed", seed}, {"folds", folds}};
  }

  static FoldPlan from_json(const nlohmann::json& j) {
    FoldPlan p;
    p.n = j.at("n").get<int>();
    p.K = j.at("K").get<int>();
    p.seed = j.at("seed").get<std::uint64_t>();
    p.folds = j.at("folds").get<std::vector<std::vector<int>>>();
    p.validate();
    return p;
  }
};

// Stratified K-fold split. Per class, shuffled indices are dealt into K
// contiguous chunks; the per-class remainder rotates across folds so overall
// fold sizes still differ by at most one.
inline FoldPlan kfold_split(const std::vector<int>& labels, int K,
                            std::uint64_t seed) {
  const int n = static_cast<int>(labels.size());
  if (K < 2) throw ParameterError("kfold: K must be at least 2");
  if (n < K)
    throw ParameterError("kfold: n=" + std::to_string(n) + " smaller than K=" +
                         std::to_string(K));

  int num_classes = 0;
  for (int l : labels) {
    if (l < 0) throw DataError("kfold: negative label");
    num_classes = std::max(num_classes, l + 1);
  }

  FoldPlan plan;
  plan.n = n;
  plan.K = K;
  plan.seed = seed;
  plan.folds.assign(static_cast<std::size_t>(K), {});

  Rng rng(derive_seed(seed, 0xF01D));
  int extra_cursor = 0;  // rotates the fold receiving each class's remainder
  for (int c = 0; c < num_classes; ++c) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (labels[static_cast<std::size_t>(i)] == c) members.push_back(i);
    rng.shuffle(members);
    const int base = static_cast<int>(members.size()) / K;
    const int rem = static_cast<int>(members.size()) % K;
    std::size_t next = 0;
    for (int offset = 0; offset < K; ++offset) {
      const int fold = (extra_cursor + offset) % K;
      const int take = base + (offset < rem ? 1 : 0);
      for (int t = 0; t < take; ++t)
        plan.folds[static_cast<std::size_t>(fold)].push_back(members[next++]);
    }
    extra_cursor = (extra_cursor + rem) % K;
  }
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  plan.validate();
  return plan;
}

inline void save_fold_plan(const FoldPlan& plan, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("fold plan: cannot write '" + path + "'");
  out << plan.to_json().dump(2) << '\n';
}

inline FoldPlan load_fold_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("fold plan: cannot read '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("fold plan: bad JSON in '" + path + "': " + e.what());
  }
  return FoldPlan::from_json(j);
}

}  // namespace glom

#endif  // GLOM_FOLDS_HPP
