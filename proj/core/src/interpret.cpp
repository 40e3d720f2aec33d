#include "featimp/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "featimp/parallel.hpp"
#include "featimp/rng.hpp"
#include "featimp/stats.hpp"

namespace featimp {

std::string to_string(ImportanceMethod method) {
  switch (method) {
    case ImportanceMethod::Coefficient:
      return "coefficient";
    case ImportanceMethod::Univariate:
      return "univariate";
    case ImportanceMethod::Gini:
      return "gini";
    case ImportanceMethod::Permutation:
      return "permutation";
  }
  return "coefficient";
}

ImportanceMethod importance_method_from_string(const std::string& s) {
  if (s == "coefficient") {
    return ImportanceMethod::Coefficient;
  }
  if (s == "univariate") {
    return ImportanceMethod::Univariate;
  }
  if (s == "gini") {
    return ImportanceMethod::Gini;
  }
  if (s == "permutation") {
    return ImportanceMethod::Permutation;
  }
  throw ValidationError("unknown importance method: " + s);
}

}  // namespace featimp

namespace featimp::interpret {

std::vector<double> Predictor::predict_proba(const FeatureMatrix& x) const {
  if (const auto* lm = std::get_if<linear::LinearModel>(&model_)) {
    return linear::predict_proba(*lm, x);
  }
  return trees::predict_proba(std::get<trees::EnsembleModel>(model_), x);
}

std::vector<int> Predictor::predict_class(const FeatureMatrix& x) const {
  const std::vector<double> p = predict_proba(x);
  std::vector<int> cls(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    cls[i] = p[i] > 0.5 ? 1 : 0;
  }
  return cls;
}

std::string Predictor::kind() const {
  if (std::holds_alternative<linear::LinearModel>(model_)) {
    return "lr";
  }
  return std::get<trees::EnsembleModel>(model_).kind == trees::EnsembleKind::Forest ? "rf"
                                                                                    : "gbm";
}

ImportanceReport permutation_importance(const Predictor& model, const LabeledDataset& test,
                                        std::uint64_t seed, int repeats, int threads) {
  test.validate();
  test.require_complete("permutation_importance");
  if (repeats < 1) {
    throw ValidationError("permutation_importance: repeats must be positive");
  }
  const std::size_t n = test.n_rows();
  const std::size_t d = test.n_cols();

  const std::vector<int> base_class = model.predict_class(test.x);
  const double base_accuracy = stats::accuracy(test.y, base_class);

  // Features are striped across workers; each worker owns one private copy of
  // the matrix and restores the column it shuffled before moving on. The
  // caller's matrix is never touched, and per-(seed, feature, repeat)
  // permutation substreams make the result independent of scheduling.
  std::vector<double> scores(d, 0.0);
  const std::size_t n_workers =
      std::min<std::size_t>(std::max(threads, 1), d);
  const auto worker = [&](std::size_t w) {
    FeatureMatrix work = test.x;
    for (std::size_t j = w; j < d; j += n_workers) {
      const std::vector<double> original = test.x.column(j);
      double total = 0.0;
      for (int rep = 0; rep < repeats; ++rep) {
        rng::Rng rng(rng::mix({seed, static_cast<std::uint64_t>(j),
                               static_cast<std::uint64_t>(rep)}));
        const std::vector<std::size_t> perm = rng.permutation(n);
        for (std::size_t i = 0; i < n; ++i) {
          work.at(i, j) = original[perm[i]];
        }
        const std::vector<int> permuted_class = model.predict_class(work);
        total += base_accuracy - stats::accuracy(test.y, permuted_class);
      }
      work.set_column(j, original);
      scores[j] = total / static_cast<double>(repeats);
    }
  };
  parallel_for(n_workers, static_cast<int>(n_workers), worker);

  ImportanceReport report;
  report.method = ImportanceMethod::Permutation;
  report.model_kind = model.kind();
  report.feature_names = test.feature_names();
  report.scores = std::move(scores);
  report.seed = seed;
  report.repeats = repeats;
  return report;
}

CorrelationMatrix importance_correlation(std::span<const ImportanceReport> reports) {
  if (reports.size() < 2) {
    throw ValidationError("importance_correlation: need at least 2 reports");
  }
  const std::size_t d = reports[0].scores.size();
  for (const auto& rep : reports) {
    if (rep.scores.size() != d || rep.feature_names != reports[0].feature_names) {
      throw ValidationError("importance_correlation: reports must share the feature set");
    }
  }

  CorrelationMatrix out;
  out.degenerate.resize(reports.size());
  for (std::size_t a = 0; a < reports.size(); ++a) {
    std::string label = to_string(reports[a].method);
    if (!reports[a].model_kind.empty()) {
      label = reports[a].model_kind + "_" + label;
    }
    out.labels.push_back(label);
    const auto result = stats::pearson(reports[a].scores, reports[a].scores);
    out.degenerate[a] = !result.defined;
  }
  out.r.assign(reports.size(), std::vector<double>(reports.size(), 0.0));
  for (std::size_t a = 0; a < reports.size(); ++a) {
    out.r[a][a] = 1.0;
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      const auto result = stats::pearson(reports[a].scores, reports[b].scores);
      out.r[a][b] = result.r;
      out.r[b][a] = result.r;
    }
  }
  return out;
}

namespace {

/// Plain UPGMA on a dense distance matrix. Clusters carry their creation id
/// (leaves 0..n-1, merge k creates n+k); ties pick the lowest (a, b) pair.
Dendrogram cluster_average_linkage(const std::vector<std::vector<double>>& distance) {
  const std::size_t n = distance.size();
  Dendrogram out;
  if (n == 1) {
    out.leaf_order = {0};
    return out;
  }

  std::vector<std::vector<double>> dist = distance;
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  std::vector<int> sizes(n, 1);
  std::vector<bool> active(n, true);
  std::vector<std::pair<int, int>> children(2 * n - 1, {-1, -1});

  for (std::size_t merge = 0; merge + 1 < n; ++merge) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t bi = 0;
    std::size_t bj = 0;
    bool found = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) {
        continue;
      }
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!active[j]) {
          continue;
        }
        const double dij = dist[i][j];
        const bool better =
            dij < best ||
            (dij == best && found &&
             std::minmax(ids[i], ids[j]) < std::minmax(ids[bi], ids[bj]));
        if (!found || better) {
          best = dij;
          bi = i;
          bj = j;
          found = true;
        }
      }
    }

    const int new_id = static_cast<int>(n + merge);
    const int size = sizes[bi] + sizes[bj];
    const auto [lo, hi] = std::minmax(ids[bi], ids[bj]);
    out.merges.push_back({lo, hi, best, size});
    children[static_cast<std::size_t>(new_id)] = {lo, hi};

    // Lance-Williams update for average linkage, stored in slot bi.
    for (std::size_t k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) {
        continue;
      }
      const double updated = (static_cast<double>(sizes[bi]) * dist[bi][k] +
                              static_cast<double>(sizes[bj]) * dist[bj][k]) /
                             static_cast<double>(size);
      dist[bi][k] = updated;
      dist[k][bi] = updated;
    }
    ids[bi] = new_id;
    sizes[bi] = size;
    active[bj] = false;
  }

  // Leaf order by recursive traversal of the final cluster.
  std::vector<int> stack{static_cast<int>(2 * n - 2)};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (id < static_cast<int>(n)) {
      out.leaf_order.push_back(id);
    } else {
      const auto [a, b] = children[static_cast<std::size_t>(id)];
      stack.push_back(b);  // b pops second: leaf order is a's leaves then b's
      stack.push_back(a);
    }
  }
  return out;
}

std::vector<std::vector<double>> euclidean_row_distances(const FeatureMatrix& m) {
  const std::size_t n = m.n_rows();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (std::size_t c = 0; c < m.n_cols(); ++c) {
        const double diff = m.at(i, c) - m.at(j, c);
        sum += diff * diff;
      }
      dist[i][j] = dist[j][i] = std::sqrt(sum);
    }
  }
  return dist;
}

FeatureMatrix transpose(const FeatureMatrix& m) {
  FeatureMatrix t(m.n_cols(), m.n_rows());
  for (std::size_t i = 0; i < m.n_rows(); ++i) {
    for (std::size_t j = 0; j < m.n_cols(); ++j) {
      t.at(j, i) = m.at(i, j);
    }
  }
  return t;
}

}  // namespace

BiclusterResult bicluster(const FeatureMatrix& values) {
  if (values.n_rows() == 0 || values.n_cols() == 0) {
    throw ValidationError("bicluster: matrix must be nonempty");
  }
  if (values.has_missing()) {
    throw ValidationError("bicluster: matrix must not contain missing values");
  }
  BiclusterResult result;
  result.rows = cluster_average_linkage(euclidean_row_distances(values));
  result.cols = cluster_average_linkage(euclidean_row_distances(transpose(values)));
  return result;
}

std::vector<std::size_t> top_k_features(const ImportanceReport& report, std::size_t k) {
  if (k > report.scores.size()) {
    throw ValidationError("top_k_features: k exceeds the feature count");
  }
  std::vector<std::size_t> order(report.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (report.scores[a] != report.scores[b]) {
      return report.scores[a] > report.scores[b];
    }
    return a < b;
  });
  order.resize(k);
  return order;
}

}  // namespace featimp::interpret
