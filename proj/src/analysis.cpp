#include "vpt/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "vpt/errors.hpp"
#include "vpt/seeding.hpp"

namespace vpt {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

Eigen::VectorXd clipped_eigenvalues(const Matrix& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * scale) {
      throw NumericError(std::string(what) + ": eigenvalue " + std::to_string(ev[i]) + " is negative");
    }
    ev[i] = std::max(ev[i], 0.0);
  }
  return ev;
}

Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m);
  if (solver.info() != Eigen::Success) throw NumericError("covariance square root: eigendecomposition failed");
  Eigen::VectorXd ev = solver.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-6 * scale) {
      throw NumericError("covariance has negative eigenvalue " + std::to_string(ev[i]));
    }
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return solver.eigenvectors() * ev.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

FeatureDistribution feature_moments(const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("feature_moments expects [N,D], got " + shape_str(features.dims()));
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (n < 2) throw DataError("covariance needs at least 2 samples, got " + std::to_string(n));
  const auto f = features.data();
  FeatureDistribution out;
  out.n_samples = n;
  out.mean.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.mean[j] += f[i * d + j];
  }
  for (auto& m : out.mean) m /= static_cast<double>(n);
  Matrix centered(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) centered(i, j) = f[i * d + j] - out.mean[j];
  }
  Matrix cov = centered.transpose() * centered / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose()).eval();
  out.cov.assign(cov.data(), cov.data() + d * d);
  return out;
}

FeatureDistribution feature_moments(const Backbone& backbone, const LabeledDataset& data, std::size_t sample_cap,
                                    std::uint64_t seed) {
  if (data.size() == 0) throw DataError("feature moments of an empty dataset");
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  if (sample_cap < rows.size()) {
    std::mt19937_64 rng(mix_seed(seed, 0xf1d));
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(sample_cap);
    std::sort(rows.begin(), rows.end());
  }
  std::vector<float> feats;
  std::size_t d = 0;
  for (std::size_t s = 0; s < rows.size(); s += 64) {
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(s),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), s + 64)));
    const Tensor f = backbone.features(data.batch(chunk));
    d = f.dim(1);
    feats.insert(feats.end(), f.data().begin(), f.data().end());
  }
  return feature_moments(Tensor({rows.size(), d}, std::move(feats)));
}

double frechet_distance(const FeatureDistribution& a, const FeatureDistribution& b) {
  const std::size_t d = a.dim();
  if (b.dim() != d) {
    throw ShapeError("frechet_distance: dimension mismatch " + std::to_string(d) + " vs " + std::to_string(b.dim()));
  }
  if (a.cov.size() != d * d || b.cov.size() != d * d) throw ShapeError("frechet_distance: covariance size mismatch");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < d; ++i) mean_term += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const Matrix ca = Eigen::Map<const Matrix>(a.cov.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const Matrix cb = Eigen::Map<const Matrix>(b.cov.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const Matrix ra = psd_sqrt(0.5 * (ca + ca.transpose()));
  Matrix prod = ra * cb * ra;
  prod = 0.5 * (prod + prod.transpose()).eval();
  const Eigen::VectorXd ev = clipped_eigenvalues(prod, "frechet_distance");
  const double trace_sqrt = ev.cwiseSqrt().sum();
  const double fd = mean_term + ca.trace() + cb.trace() - 2.0 * trace_sqrt;
  if (!std::isfinite(fd)) throw NumericError("frechet_distance is not finite");
  return std::max(fd, 0.0);
}

double pair_diversity(const Tensor& features, const std::vector<IndexPair>& pairs) {
  if (features.rank() != 2) throw ShapeError("pair_diversity expects [N,D], got " + shape_str(features.dims()));
  if (pairs.empty()) throw DataError("pair_diversity needs at least one pair");
  const std::size_t n = features.dim(0), d = features.dim(1);
  const auto f = features.data();
  double total = 0.0;
  for (const auto& [i, j] : pairs) {
    if (i >= n || j >= n) throw DataError("pair index outside the " + std::to_string(n) + " rows");
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t t = 0; t < d; ++t) {
      const double x = f[i * d + t], y = f[j * d + t];
      ab += x * y;
      aa += x * x;
      bb += y * y;
    }
    if (aa == 0.0 || bb == 0.0) throw NumericError("pair_diversity: zero-norm feature row");
    const double cos = std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
    total += 1.0 - cos;
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<IndexPair> sample_pairs(std::size_t n, std::size_t num_pairs, std::uint64_t seed) {
  if (n < 2) throw DataError("diversity needs at least 2 images, got " + std::to_string(n));
  if (num_pairs == 0) throw ConfigError("diversity needs at least one pair");
  std::mt19937_64 rng(mix_seed(seed, 0x1b1b5));
  std::uniform_int_distribution<std::size_t> first(0, n - 1), other(0, n - 2);
  std::vector<IndexPair> out;
  out.reserve(num_pairs);
  for (std::size_t k = 0; k < num_pairs; ++k) {
    const std::size_t i = first(rng);
    std::size_t j = other(rng);
    if (j >= i) ++j;
    out.emplace_back(i, j);
  }
  return out;
}

double perceptual_diversity(const Backbone& backbone, const LabeledDataset& data, std::size_t num_pairs,
                            std::uint64_t seed) {
  const auto pairs = sample_pairs(data.size(), num_pairs, seed);
  std::vector<std::size_t> rows;
  for (const auto& [i, j] : pairs) {
    rows.push_back(i);
    rows.push_back(j);
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  std::vector<float> feats;
  std::size_t d = 0;
  for (std::size_t s = 0; s < rows.size(); s += 64) {
    const std::vector<std::size_t> chunk(rows.begin() + static_cast<std::ptrdiff_t>(s),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), s + 64)));
    const Tensor f = backbone.features(data.batch(chunk));
    d = f.dim(1);
    feats.insert(feats.end(), f.data().begin(), f.data().end());
  }
  std::vector<IndexPair> local;
  local.reserve(pairs.size());
  auto index_of = [&](std::size_t r) {
    return static_cast<std::size_t>(std::lower_bound(rows.begin(), rows.end(), r) - rows.begin());
  };
  for (const auto& [i, j] : pairs) local.emplace_back(index_of(i), index_of(j));
  return pair_diversity(Tensor({rows.size(), d}, std::move(feats)), local);
}

namespace {

void check_series(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw DataError("correlation needs equal lengths, got " + std::to_string(x.size()) + " and " +
                    std::to_string(y.size()));
  }
  if (x.size() < 3) throw DataError("correlation needs at least 3 points, got " + std::to_string(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw NumericError("correlation input is not finite");
  }
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  check_series(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericError("correlation: first series has zero variance");
  if (syy == 0.0) throw NumericError("correlation: second series has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  check_series(x, y);
  return pearson(ranks(x), ranks(y));
}

std::string CorrelationReport::table(const std::string& x_name, const std::string& y_name) const {
  std::string out = x_name + "," + y_name + "\n";
  for (std::size_t i = 0; i < x.size(); ++i) out += num(x[i]) + "," + num(y[i]) + "\n";
  return out;
}

CorrelationReport correlation_report(const std::vector<double>& x, const std::vector<double>& y) {
  CorrelationReport r;
  r.pearson = pearson(x, y);
  r.spearman = spearman(x, y);
  r.x = x;
  r.y = y;
  return r;
}

std::string analysis_csv(const std::vector<AnalysisRow>& rows) {
  std::string out = "dataset,fid_to_pretrain,diversity,zero_shot_acc,vp_acc,gain\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + num(r.fid_to_pretrain) + "," + num(r.diversity) + "," + num(r.zero_shot_acc) + "," +
           num(r.vp_acc) + "," + num(r.gain) + "\n";
  }
  return out;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::pair<double, double> padded_range(const std::vector<double>& v) {
  double lo = *std::min_element(v.begin(), v.end());
  double hi = *std::max_element(v.begin(), v.end());
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace

std::string scatter_svg(const std::vector<double>& x, const std::vector<double>& y,
                        const std::vector<std::string>& point_labels, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
  if (x.size() != y.size() || x.empty()) throw DataError("scatter plot needs equal, non-empty series");
  const double w = 480, h = 360, left = 64, right = 20, top = 36, bottom = 52;
  const auto [x0, x1] = padded_range(x);
  const auto [y0, y1] = padded_range(y);
  auto px = [&](double v) { return left + (v - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double v) { return h - bottom - (v - y0) / (y1 - y0) * (h - top - bottom); };
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w, 0) + "\" height=\"" + num(h, 0) +
                  "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(w / 2, 1) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" + xml_escape(title) +
       "</text>\n";
  s += "<line x1=\"" + num(left, 1) + "\" y1=\"" + num(h - bottom, 1) + "\" x2=\"" + num(w - right, 1) + "\" y2=\"" +
       num(h - bottom, 1) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(left, 1) + "\" y1=\"" + num(top, 1) + "\" x2=\"" + num(left, 1) + "\" y2=\"" +
       num(h - bottom, 1) + "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double vx = x0 + (x1 - x0) * t / 4.0, vy = y0 + (y1 - y0) * t / 4.0;
    s += "<text x=\"" + num(px(vx), 1) + "\" y=\"" + num(h - bottom + 16, 1) + "\" text-anchor=\"middle\">" +
         num(vx, 3) + "</text>\n";
    s += "<text x=\"" + num(left - 6, 1) + "\" y=\"" + num(py(vy) + 4, 1) + "\" text-anchor=\"end\">" + num(vy, 3) +
         "</text>\n";
  }
  s += "<text x=\"" + num((left + w - right) / 2, 1) + "\" y=\"" + num(h - 12, 1) + "\" text-anchor=\"middle\">" +
       xml_escape(x_label) + "</text>\n";
  s += "<text x=\"16\" y=\"" + num((top + h - bottom) / 2, 1) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
       num((top + h - bottom) / 2, 1) + ")\">" + xml_escape(y_label) + "</text>\n";
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += "<circle cx=\"" + num(px(x[i]), 1) + "\" cy=\"" + num(py(y[i]), 1) + "\" r=\"4\" fill=\"steelblue\"/>\n";
    if (i < point_labels.size()) {
      s += "<text x=\"" + num(px(x[i]) + 6, 1) + "\" y=\"" + num(py(y[i]) - 6, 1) + "\">" +
           xml_escape(point_labels[i]) + "</text>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

}  // namespace vpt
