#include "gammacontam/scorespace.hpp"

#include "gammacontam/csv.hpp"
#include "gammacontam/detectors.hpp"
#include "gammacontam/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

namespace gammacontam {

RawDataset::RawDataset(std::string name, Eigen::MatrixXd rows,
                       std::optional<std::vector<int>> labels)
    : name_(std::move(name)), rows_(std::move(rows)), labels_(std::move(labels)) {
  if (rows_.rows() < 2) throw InputError(name_ + ": dataset needs at least 2 rows");
  if (rows_.cols() < 1) throw InputError(name_ + ": dataset needs at least 1 feature");
  if (!rows_.allFinite()) throw InputError(name_ + ": dataset contains NaN/Inf");
  if (labels_) {
    if (static_cast<Eigen::Index>(labels_->size()) != rows_.rows())
      throw InputError(name_ + ": label count does not match row count");
    for (int l : *labels_)
      if (l != 0 && l != 1) throw InputError(name_ + ": labels must be 0 or 1");
  }
}

double RawDataset::contamination() const {
  if (!labels_) throw InputError(name_ + ": dataset has no labels");
  const auto positives = std::count(labels_->begin(), labels_->end(), 1);
  return static_cast<double>(positives) / static_cast<double>(labels_->size());
}

std::vector<double> ScoreMatrix::column(Eigen::Index j) const {
  std::vector<double> out(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) out[static_cast<std::size_t>(i)] = values(i, j);
  return out;
}

std::vector<double> transform_scores(std::span<const double> raw_column,
                                     std::size_t column_index) {
  if (raw_column.size() < 2)
    throw InputError("score column " + std::to_string(column_index) +
                     " needs at least 2 values");
  for (double s : raw_column) {
    if (!std::isfinite(s))
      throw InputError("score column " + std::to_string(column_index) +
                       " contains NaN/Inf");
  }
  const double lo = *std::min_element(raw_column.begin(), raw_column.end());
  const auto n = static_cast<double>(raw_column.size());

  std::vector<double> out(raw_column.size());
  std::transform(raw_column.begin(), raw_column.end(), out.begin(),
                 [lo](double s) { return std::log(s - lo + 0.01); });

  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);

  if (sd < 1e-12) {
    spdlog::warn("score column {} is constant; emitting zeros", column_index);
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (double& v : out) v = (v - mean) / sd;
  return out;
}

ScoreMatrix transform_matrix(const ScoreMatrix& raw) {
  if (raw.detectors() < 1) throw InputError("score matrix has no columns");
  ScoreMatrix out;
  out.values.resize(raw.values.rows(), raw.values.cols());
  out.detector_names = raw.detector_names;
  out.transformed = true;
  for (Eigen::Index j = 0; j < raw.detectors(); ++j) {
    const auto col = transform_scores(raw.column(j), static_cast<std::size_t>(j));
    for (Eigen::Index i = 0; i < raw.size(); ++i)
      out.values(i, j) = col[static_cast<std::size_t>(i)];
  }
  return out;
}

ScoreMatrix build_score_matrix(const RawDataset& dataset,
                               const std::vector<DetectorSpec>& detectors) {
  if (detectors.empty()) throw InputError("at least one detector is required");
  ScoreMatrix raw;
  raw.values.resize(dataset.size(), static_cast<Eigen::Index>(detectors.size()));
  for (std::size_t j = 0; j < detectors.size(); ++j) {
    const auto scores = run_detector(dataset, detectors[j]);
    for (Eigen::Index i = 0; i < dataset.size(); ++i)
      raw.values(i, static_cast<Eigen::Index>(j)) = scores[static_cast<std::size_t>(i)];
    raw.detector_names.push_back(detectors[j].name());
  }
  return transform_matrix(raw);
}

ScoreMatrix ingest_scores(const std::filesystem::path& path,
                          std::optional<bool> has_header) {
  const auto table = csv::read(path, has_header);
  if (table.rows.size() < 2)
    throw InputError(path.string() + ": score file needs at least 2 rows");
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  const auto m = static_cast<Eigen::Index>(table.rows.front().size());
  ScoreMatrix out;
  out.values.resize(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      out.values(i, j) = table.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  if (!out.values.allFinite()) throw InputError(path.string() + ": NaN/Inf score");
  if (!table.header.empty()) {
    out.detector_names = table.header;
  } else {
    for (Eigen::Index j = 0; j < m; ++j) out.detector_names.push_back("s" + std::to_string(j));
  }
  return out;
}

RawDataset read_dataset(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  if (table.rows.empty()) throw InputError(path.string() + ": empty dataset");
  const std::size_t width = table.rows.front().size();
  const bool labelled = !table.header.empty() && table.header.back() == "label";
  const std::size_t d = labelled ? width - 1 : width;
  if (d < 1) throw InputError(path.string() + ": no feature columns");

  Eigen::MatrixXd rows(static_cast<Eigen::Index>(table.rows.size()),
                       static_cast<Eigen::Index>(d));
  std::optional<std::vector<int>> labels;
  if (labelled) labels.emplace();
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j)
      rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = table.rows[i][j];
    if (labelled) {
      const double l = table.rows[i].back();
      if (l != 0.0 && l != 1.0)
        throw InputError(path.string() + ": row " + std::to_string(i + 1) +
                         " has a non-binary label");
      labels->push_back(static_cast<int>(l));
    }
  }
  return RawDataset(path.stem().string(), std::move(rows), std::move(labels));
}

}  // namespace gammacontam
