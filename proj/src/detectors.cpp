#include "gammacontam/detectors.hpp"

#include "gammacontam/csv.hpp"
#include "gammacontam/error.hpp"
#include "gammacontam/scorespace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gammacontam {
namespace {

using Eigen::Index;
using Eigen::MatrixXd;

MatrixXd pairwise_distances(const MatrixXd& rows) {
  const Index n = rows.rows();
  MatrixXd d = MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double v = (rows.row(i) - rows.row(j)).norm();
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

// Distances from i to every other point, sorted ascending.
std::vector<double> sorted_neighbour_distances(const MatrixXd& dist, Index i) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(dist.rows() - 1));
  for (Index j = 0; j < dist.rows(); ++j)
    if (j != i) out.push_back(dist(i, j));
  std::sort(out.begin(), out.end());
  return out;
}

void check_k(int k, Index n, int min_k, const char* who) {
  if (k < min_k || k > n - 1)
    throw InputError(std::string(who) + ": k=" + std::to_string(k) + " outside [" +
                     std::to_string(min_k) + ", " + std::to_string(n - 1) + "]");
}

double average_path_length(double n) {
  if (n <= 1.0) return 0.0;
  if (n == 2.0) return 1.0;
  constexpr double euler = 0.5772156649015329;
  return 2.0 * (std::log(n - 1.0) + euler) - 2.0 * (n - 1.0) / n;
}

struct IsolationNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  int left = -1;
  int right = -1;
  int size = 0;
};

class IsolationTree {
 public:
  IsolationTree(const MatrixXd& rows, std::vector<Index> sample, int height_limit,
                std::mt19937_64& rng) {
    build(rows, sample, 0, height_limit, rng);
  }

  double path_length(const Eigen::RowVectorXd& x) const {
    int node = 0;
    int depth = 0;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = nodes_[static_cast<std::size_t>(node)];
      node = x(nd.feature) < nd.split ? nd.left : nd.right;
      ++depth;
    }
    return depth + average_path_length(nodes_[static_cast<std::size_t>(node)].size);
  }

 private:
  int build(const MatrixXd& rows, std::vector<Index>& idx, int depth, int limit,
            std::mt19937_64& rng) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_.back().size = static_cast<int>(idx.size());
    if (idx.size() <= 1 || depth >= limit) return id;

    std::vector<int> candidates;
    std::vector<std::pair<double, double>> ranges;
    for (Index f = 0; f < rows.cols(); ++f) {
      double lo = rows(idx.front(), f), hi = lo;
      for (Index i : idx) {
        lo = std::min(lo, rows(i, f));
        hi = std::max(hi, rows(i, f));
      }
      if (hi > lo) {
        candidates.push_back(static_cast<int>(f));
        ranges.emplace_back(lo, hi);
      }
    }
    if (candidates.empty()) return id;

    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    const std::size_t c = pick(rng);
    const int feature = candidates[c];
    std::uniform_real_distribution<double> uniform(ranges[c].first, ranges[c].second);
    double split = uniform(rng);
    if (split <= ranges[c].first) split = std::nextafter(ranges[c].first, ranges[c].second);

    std::vector<Index> left, right;
    for (Index i : idx) (rows(i, feature) < split ? left : right).push_back(i);

    const int l = build(rows, left, depth + 1, limit, rng);
    const int r = build(rows, right, depth + 1, limit, rng);
    auto& nd = nodes_[static_cast<std::size_t>(id)];
    nd.feature = feature;
    nd.split = split;
    nd.left = l;
    nd.right = r;
    return id;
  }

  std::vector<IsolationNode> nodes_;
};

// Lexicographic row order; makes seeded subsampling independent of the
// input row order.
std::vector<Index> canonical_order(const MatrixXd& rows) {
  std::vector<Index> order(static_cast<std::size_t>(rows.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index f = 0; f < rows.cols(); ++f) {
      if (rows(a, f) != rows(b, f)) return rows(a, f) < rows(b, f);
    }
    return false;
  });
  return order;
}

}  // namespace

std::string DetectorSpec::name() const {
  switch (kind) {
    case DetectorKind::knn: return "knn";
    case DetectorKind::lof: return "lof";
    case DetectorKind::iforest: return "iforest";
    case DetectorKind::hbos: return "hbos";
    case DetectorKind::external: return path.stem().string();
  }
  return "unknown";
}

DetectorSpec parse_detector(std::string_view text) {
  DetectorSpec spec;
  const auto colon = text.find(':');
  const std::string_view kind = text.substr(0, colon);
  std::string_view rest = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);

  if (kind == "external") {
    if (rest.empty()) throw InputError("external detector needs a file path");
    spec.kind = DetectorKind::external;
    spec.path = std::string(rest);
    return spec;
  }
  if (kind == "knn") spec.kind = DetectorKind::knn;
  else if (kind == "lof") spec.kind = DetectorKind::lof;
  else if (kind == "iforest") spec.kind = DetectorKind::iforest;
  else if (kind == "hbos") spec.kind = DetectorKind::hbos;
  else throw InputError("unknown detector '" + std::string(kind) + "'");

  while (!rest.empty()) {
    const auto next = rest.find(':');
    const std::string_view kv = rest.substr(0, next);
    rest = next == std::string_view::npos ? std::string_view{} : rest.substr(next + 1);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw InputError("bad detector option '" + std::string(kv) + "'");
    const std::string_view key = kv.substr(0, eq);
    const auto value = csv::parse_number(kv.substr(eq + 1));
    if (!value || *value != std::floor(*value))
      throw InputError("detector option '" + std::string(key) + "' needs an integer");
    const auto v = static_cast<long long>(*value);
    if (key == "k") spec.k = static_cast<int>(v);
    else if (key == "trees") spec.trees = static_cast<int>(v);
    else if (key == "subsample") spec.subsample = static_cast<int>(v);
    else if (key == "bins") spec.bins = static_cast<int>(v);
    else if (key == "seed") spec.seed = static_cast<std::uint64_t>(v);
    else throw InputError("unknown detector option '" + std::string(key) + "'");
  }
  if (spec.k && *spec.k < 1) throw InputError(spec.name() + ": k must be >= 1");
  if (spec.trees < 1) throw InputError("iforest: trees must be >= 1");
  if (spec.subsample && *spec.subsample < 2) throw InputError("iforest: subsample must be >= 2");
  if (spec.bins && *spec.bins < 2) throw InputError("hbos: bins must be >= 2");
  return spec;
}

std::vector<double> knn_scores(const MatrixXd& rows, int k) {
  const Index n = rows.rows();
  check_k(k, n, 1, "knn");
  const MatrixXd dist = pairwise_distances(rows);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = sorted_neighbour_distances(dist, i)[static_cast<std::size_t>(k - 1)];
  return out;
}

std::vector<double> lof_scores(const MatrixXd& rows, int k) {
  const Index n = rows.rows();
  check_k(k, n, 2, "lof");
  const MatrixXd dist = pairwise_distances(rows);
  const auto un = static_cast<std::size_t>(n);

  std::vector<double> kdist(un);
  for (Index i = 0; i < n; ++i)
    kdist[static_cast<std::size_t>(i)] = sorted_neighbour_distances(dist, i)[static_cast<std::size_t>(k - 1)];

  std::vector<std::vector<Index>> neighbours(un);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (j != i && dist(i, j) <= kdist[static_cast<std::size_t>(i)])
        neighbours[static_cast<std::size_t>(i)].push_back(j);

  std::vector<double> lrd(un);
  for (std::size_t i = 0; i < un; ++i) {
    double sum = 0.0;
    for (Index o : neighbours[i])
      sum += std::max(kdist[static_cast<std::size_t>(o)], dist(static_cast<Index>(i), o));
    lrd[i] = 1.0 / (sum / static_cast<double>(neighbours[i].size()) + 1e-10);
  }

  std::vector<double> out(un);
  for (std::size_t i = 0; i < un; ++i) {
    double sum = 0.0;
    for (Index o : neighbours[i]) sum += lrd[static_cast<std::size_t>(o)];
    out[i] = sum / static_cast<double>(neighbours[i].size()) / lrd[i];
  }
  return out;
}

std::vector<double> iforest_scores(const MatrixXd& rows, int trees, int subsample,
                                   std::uint64_t seed) {
  const Index n = rows.rows();
  if (trees < 1) throw InputError("iforest: trees must be >= 1");
  if (subsample < 2 || subsample > n)
    throw InputError("iforest: subsample " + std::to_string(subsample) + " outside [2, " +
                     std::to_string(n) + "]");

  const auto order = canonical_order(rows);
  const int height_limit = static_cast<int>(std::ceil(std::log2(static_cast<double>(subsample))));
  std::mt19937_64 rng(seed);
  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  std::vector<Index> pool = order;
  for (int t = 0; t < trees; ++t) {
    // Partial Fisher-Yates over the canonical order.
    pool = order;
    for (int s = 0; s < subsample; ++s) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(s), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(s)], pool[pick(rng)]);
    }
    std::vector<Index> sample(pool.begin(), pool.begin() + subsample);
    const IsolationTree tree(rows, std::move(sample), height_limit, rng);
    for (Index i = 0; i < n; ++i) total[static_cast<std::size_t>(i)] += tree.path_length(rows.row(i));
  }

  const double norm = average_path_length(subsample);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::exp2(-(total[i] / trees) / norm);
  return out;
}

std::vector<double> hbos_scores(const MatrixXd& rows, int bins) {
  if (bins < 2) throw InputError("hbos: bins must be >= 2");
  const Index n = rows.rows();
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  std::vector<int> bin_of(static_cast<std::size_t>(n));
  std::vector<double> counts(static_cast<std::size_t>(bins));
  for (Index f = 0; f < rows.cols(); ++f) {
    const double lo = rows.col(f).minCoeff();
    const double hi = rows.col(f).maxCoeff();
    std::fill(counts.begin(), counts.end(), 0.0);
    for (Index i = 0; i < n; ++i) {
      int b = 0;
      if (hi > lo) {
        b = static_cast<int>(std::floor((rows(i, f) - lo) / (hi - lo) * bins));
        b = std::clamp(b, 0, bins - 1);
      }
      bin_of[static_cast<std::size_t>(i)] = b;
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    const double denom = static_cast<double>(n) + bins;
    for (Index i = 0; i < n; ++i) {
      const double p = (counts[static_cast<std::size_t>(bin_of[static_cast<std::size_t>(i)])] + 1.0) / denom;
      out[static_cast<std::size_t>(i)] -= std::log(p);
    }
  }
  return out;
}

std::vector<double> read_external_scores(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    if (row.size() != 1) throw InputError(path.string() + ": external scores must have one column");
    out.push_back(row.front());
  }
  return out;
}

std::vector<double> run_detector(const RawDataset& dataset, const DetectorSpec& spec) {
  const Index n = dataset.size();
  const auto& rows = dataset.rows();
  try {
    std::vector<double> scores;
    switch (spec.kind) {
      case DetectorKind::knn:
        scores = knn_scores(rows, spec.k.value_or(static_cast<int>(std::min<Index>(10, n - 1))));
        break;
      case DetectorKind::lof:
        scores = lof_scores(rows, spec.k.value_or(static_cast<int>(std::min<Index>(10, n - 1))));
        break;
      case DetectorKind::iforest:
        scores = iforest_scores(rows, spec.trees,
                                spec.subsample.value_or(static_cast<int>(std::min<Index>(256, n))),
                                spec.seed);
        break;
      case DetectorKind::hbos:
        scores = hbos_scores(rows, spec.bins.value_or(static_cast<int>(
                                       std::ceil(std::sqrt(static_cast<double>(n))))));
        break;
      case DetectorKind::external:
        scores = read_external_scores(spec.path);
        if (static_cast<Index>(scores.size()) != n)
          throw InputError("expected " + std::to_string(n) + " scores, found " +
                           std::to_string(scores.size()));
        break;
    }
    for (double s : scores)
      if (!std::isfinite(s)) throw NumericalError("non-finite score");
    return scores;
  } catch (const InputError& e) {
    throw InputError("detector " + spec.name() + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError("detector " + spec.name() + ": " + e.what());
  }
}

}  // namespace gammacontam
