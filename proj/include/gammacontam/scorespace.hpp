#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gammacontam {

struct DetectorSpec;

/// N feature vectors of dimension d with optional binary ground truth.
class RawDataset {
 public:
  RawDataset(std::string name, Eigen::MatrixXd rows,
             std::optional<std::vector<int>> labels = std::nullopt);

  const std::string& name() const { return name_; }
  const Eigen::MatrixXd& rows() const { return rows_; }
  const std::optional<std::vector<int>>& labels() const { return labels_; }
  Eigen::Index size() const { return rows_.rows(); }
  Eigen::Index dim() const { return rows_.cols(); }

  /// Fraction of rows labelled 1. Requires labels.
  double contamination() const;

 private:
  std::string name_;
  Eigen::MatrixXd rows_;
  std::optional<std::vector<int>> labels_;
};

/// N x M anomaly scores, one column per detector.
struct ScoreMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> detector_names;
  bool transformed = false;

  Eigen::Index size() const { return values.rows(); }
  Eigen::Index detectors() const { return values.cols(); }
  std::vector<double> column(Eigen::Index j) const;
};

/// Maps s to log(s - min(S) + 0.01) and standardizes to zero mean and unit
/// population variance. A column whose log values have std < 1e-12 becomes
/// all zeros. `column_index` is only used in error messages.
std::vector<double> transform_scores(std::span<const double> raw_column,
                                     std::size_t column_index = 0);

/// Applies transform_scores to every column.
ScoreMatrix transform_matrix(const ScoreMatrix& raw);

/// Runs each detector on `dataset` and transforms the resulting columns.
ScoreMatrix build_score_matrix(const RawDataset& dataset,
                               const std::vector<DetectorSpec>& detectors);

/// Reads an N x M score CSV. The result is untransformed.
ScoreMatrix ingest_scores(const std::filesystem::path& path,
                          std::optional<bool> has_header = std::nullopt);

/// Reads a feature CSV. A header is optional; a final column named "label"
/// holds 0/1 ground truth.
RawDataset read_dataset(const std::filesystem::path& path);

}  // namespace gammacontam
