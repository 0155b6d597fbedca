#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gammacontam {

class RawDataset;

enum class DetectorKind { knn, lof, iforest, hbos, external };

/// A detector and its settings. Unset parameters take the defaults below,
/// resolved against the dataset size at run time:
///   knn/lof: k = min(10, N - 1); iforest: 100 trees, min(256, N) subsample;
///   hbos: ceil(sqrt(N)) bins.
struct DetectorSpec {
  DetectorKind kind = DetectorKind::knn;
  std::optional<int> k;
  int trees = 100;
  std::optional<int> subsample;
  std::optional<int> bins;
  std::filesystem::path path;  // external only
  std::uint64_t seed = 0;

  std::string name() const;
};

/// Parses "knn", "lof:k=20", "iforest:trees=200:subsample=128", "hbos:bins=8"
/// or "external:<path>".
DetectorSpec parse_detector(std::string_view text);

/// Euclidean distance to the k-th nearest other point.
std::vector<double> knn_scores(const Eigen::MatrixXd& rows, int k);

/// Local outlier factor over the k-distance neighbourhood (ties included).
/// Mean reachability distances get a 1e-10 floor, so a set of exact
/// duplicates scores 1.
std::vector<double> lof_scores(const Eigen::MatrixXd& rows, int k);

/// Isolation forest score 2^(-E[h(x)] / c(subsample)).
std::vector<double> iforest_scores(const Eigen::MatrixXd& rows, int trees,
                                   int subsample, std::uint64_t seed);

/// Histogram-based outlier score: sum over features of -log of the
/// Laplace-smoothed bin probability (count + 1) / (N + bins).
std::vector<double> hbos_scores(const Eigen::MatrixXd& rows, int bins);

/// Runs one detector; errors name the detector.
std::vector<double> run_detector(const RawDataset& dataset, const DetectorSpec& spec);

/// Reads a single-column CSV of raw scores.
std::vector<double> read_external_scores(const std::filesystem::path& path);

}  // namespace gammacontam
