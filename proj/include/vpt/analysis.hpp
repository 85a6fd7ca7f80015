#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vpt/backbone.hpp"
#include "vpt/datasets.hpp"
#include "vpt/tensor.hpp"

namespace vpt {

struct FeatureDistribution {
  std::vector<double> mean;  // [D]
  std::vector<double> cov;   // [D*D], row-major, unbiased
  std::size_t n_samples = 0;

  std::size_t dim() const { return mean.size(); }
};

// Moments of the rows of features [N,D]; N >= 2.
FeatureDistribution feature_moments(const Tensor& features);
// Penultimate features of a seeded sample of min(N, sample_cap) rows.
FeatureDistribution feature_moments(const Backbone& backbone, const LabeledDataset& data, std::size_t sample_cap,
                                    std::uint64_t seed);

// |mu_a - mu_b|^2 + Tr(A + B - 2 (A B)^(1/2)), with the trace of the square
// root taken from the eigenvalues of sqrt(A) B sqrt(A).
double frechet_distance(const FeatureDistribution& a, const FeatureDistribution& b);

using IndexPair = std::pair<std::size_t, std::size_t>;

// Mean of 1 - cos(features[i], features[j]) over the given pairs.
double pair_diversity(const Tensor& features, const std::vector<IndexPair>& pairs);
// num_pairs seeded pairs of distinct rows.
std::vector<IndexPair> sample_pairs(std::size_t n, std::size_t num_pairs, std::uint64_t seed);
double perceptual_diversity(const Backbone& backbone, const LabeledDataset& data, std::size_t num_pairs,
                            std::uint64_t seed);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
// Pearson correlation of ranks; ties share their average rank.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationReport {
  double pearson = 0.0;
  double spearman = 0.0;
  std::vector<double> x;
  std::vector<double> y;

  // "x,y" rows under the given column names.
  std::string table(const std::string& x_name, const std::string& y_name) const;
};

CorrelationReport correlation_report(const std::vector<double>& x, const std::vector<double>& y);

struct AnalysisRow {
  std::string dataset;
  double fid_to_pretrain = 0.0;
  double diversity = 0.0;
  double zero_shot_acc = 0.0;
  double vp_acc = 0.0;
  double gain = 0.0;
};

std::string analysis_csv(const std::vector<AnalysisRow>& rows);

// Standalone SVG scatter plot with axis labels, ticks and point labels.
std::string scatter_svg(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<std::string>& point_labels, const std::string& title,
                        const std::string& x_label, const std::string& y_label);

}  // namespace vpt
