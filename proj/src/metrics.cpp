// SPDX-License-Identifier: Apache-2.0
#include "transgan/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "transgan/rng.hpp"

TRANSGAN_BEGIN_NAMESPACE

namespace {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kEigenFloor = 1e-10;
constexpr double kSymmetryTolerance = 1e-9;

Matrix covariance_matrix(const FeatureMoments& m) {
  const auto d = static_cast<Eigen::Index>(m.dim());
  if (m.covariance.size() != m.dim() * m.dim())
    throw MetricError("frechet_distance: covariance is not d x d");
  Matrix s = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      m.covariance.data(), d, d);
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * scale)
    throw MetricError("frechet_distance: covariance is not symmetric");
  return s;
}

Vector clamped_eigenvalues(const Eigen::SelfAdjointEigenSolver<Matrix>& solver) {
  Vector w = solver.eigenvalues();
  const double floor = kEigenFloor * std::max(0.0, w.maxCoeff());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (w[i] < floor) w[i] = 0;
  return w;
}

Matrix psd_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(s);
  const Vector w = clamped_eigenvalues(solver).cwiseSqrt();
  return solver.eigenvectors() * w.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureMoments& a, const FeatureMoments& b) {
  if (a.dim() != b.dim())
    throw MetricError("frechet_distance: dimensions " + std::to_string(a.dim()) + " and " +
                      std::to_string(b.dim()) + " differ");
  if (a.dim() == 0) throw MetricError("frechet_distance: empty moments");
  const Matrix sa = covariance_matrix(a), sb = covariance_matrix(b);
  // The eigen route leaves rounding residue of order 1e-12 for equal inputs.
  if (a.mean == b.mean && a.covariance == b.covariance) return 0.0;
  const auto d = static_cast<Eigen::Index>(a.dim());
  const Vector diff = Eigen::Map<const Vector>(a.mean.data(), d) - Eigen::Map<const Vector>(b.mean.data(), d);

  const Matrix root_a = psd_sqrt(sa);
  Matrix inner = root_a * sb * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(inner, Eigen::EigenvaluesOnly);
  const double cross = clamped_eigenvalues(solver).cwiseSqrt().sum();

  const double value = diff.squaredNorm() + sa.trace() + sb.trace() - 2.0 * cross;
  return std::max(0.0, value);
}

std::vector<double> projection_matrix(std::size_t pixels, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(pixels));
  std::vector<double> p(pixels * d);
  for (auto& v : p) v = rng.normal() * scale;
  return p;
}

FeatureMoments extract_moments(const Tensor& images, std::uint64_t projector_seed, std::size_t d) {
  if (!images.defined() || images.rank() < 2) throw MetricError("extract_moments: expected a batch");
  const auto n = images.dim(0);
  if (n < 2) throw MetricError("extract_moments: at least 2 samples required, got " + std::to_string(n));
  if (d == 0) throw MetricError("extract_moments: feature dimension must be positive");
  const auto pixels = images.numel() / n;
  const auto proj = projection_matrix(pixels, d, projector_seed);

  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(pixels));
  auto src = images.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < pixels; ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(src[i * pixels + j]);
  const Matrix p = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      proj.data(), static_cast<Eigen::Index>(pixels), static_cast<Eigen::Index>(d));
  const Matrix f = x * p;  // [n, d]

  const Vector mu = f.colwise().mean();
  const Matrix centered = f.rowwise() - mu.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());

  FeatureMoments m;
  m.count = n;
  m.mean.assign(mu.data(), mu.data() + mu.size());
  m.covariance.resize(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      m.covariance[i * d + j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return m;
}

double image_frechet(const Tensor& a, const Tensor& b, std::uint64_t projector_seed, std::size_t d) {
  if (a.numel() / std::max<std::size_t>(1, a.dim(0)) != b.numel() / std::max<std::size_t>(1, b.dim(0)))
    throw MetricError("image_frechet: image sizes differ");
  return frechet_distance(extract_moments(a, projector_seed, d), extract_moments(b, projector_seed, d));
}

// ------------------------------------------------------------------- flops

const char* to_string(MacCategory c) {
  switch (c) {
    case MacCategory::AttentionProjections: return "attention_projections";
    case MacCategory::AttentionScores: return "attention_scores";
    case MacCategory::Mlp: return "mlp";
    case MacCategory::EmbeddingHead: return "embedding_head";
  }
  return "unknown";
}

std::uint64_t FlopsReport::total() const {
  std::uint64_t t = 0;
  for (const auto& e : entries) t += e.macs;
  return t;
}

std::uint64_t FlopsReport::subtotal(MacCategory c) const {
  std::uint64_t t = 0;
  for (const auto& e : entries)
    if (e.category == c) t += e.macs;
  return t;
}

std::uint64_t FlopsReport::subtotal(const std::string& prefix) const {
  std::uint64_t t = 0;
  for (const auto& e : entries)
    if (e.label.starts_with(prefix)) t += e.macs;
  return t;
}

std::string FlopsReport::table() const {
  std::size_t width = 5;
  for (const auto& e : entries) width = std::max(width, e.label.size());
  std::ostringstream s;
  s << std::left << std::setw(static_cast<int>(width)) << "layer" << "  " << std::setw(22) << "category"
    << std::right << std::setw(16) << "MACs" << "\n";
  for (const auto& e : entries)
    s << std::left << std::setw(static_cast<int>(width)) << e.label << "  " << std::setw(22)
      << to_string(e.category) << std::right << std::setw(16) << e.macs << "\n";
  s << std::left << std::setw(static_cast<int>(width)) << "total" << "  " << std::setw(22) << ""
    << std::right << std::setw(16) << total() << "\n";
  s << std::fixed << std::setprecision(3) << "total_gmacs " << static_cast<double>(total()) / 1e9 << "\n";
  return s.str();
}

std::string FlopsReport::key_values() const {
  std::ostringstream s;
  for (const auto& e : entries) s << e.label << "=" << e.macs << "\n";
  for (auto c : {MacCategory::AttentionProjections, MacCategory::AttentionScores, MacCategory::Mlp,
                 MacCategory::EmbeddingHead})
    s << "category." << to_string(c) << "=" << subtotal(c) << "\n";
  s << "total=" << total() << "\n";
  return s.str();
}

void add_block_macs(FlopsReport& report, const std::string& prefix, std::uint64_t tokens,
                    std::uint64_t dim, std::uint64_t mlp_ratio) {
  report.entries.push_back({prefix + ".attn_proj", MacCategory::AttentionProjections, 4 * tokens * dim * dim});
  report.entries.push_back({prefix + ".attn_scores", MacCategory::AttentionScores, 2 * tokens * tokens * dim});
  report.entries.push_back({prefix + ".mlp", MacCategory::Mlp, 2 * tokens * dim * (mlp_ratio * dim)});
}

FlopsReport count_macs(const GeneratorConfig& config) {
  config.validate();
  FlopsReport r;
  const std::uint64_t n0 = config.stage_tokens(0), c0 = config.stage_dim(0);
  r.entries.push_back({"G.input_mlp", MacCategory::EmbeddingHead, config.latent_dim * n0 * c0});
  for (std::size_t s = 0; s < config.stages(); ++s)
    for (std::size_t b = 0; b < config.stage_depths[s]; ++b)
      add_block_macs(r, "G.stage" + std::to_string(s) + ".block" + std::to_string(b),
                     config.stage_tokens(s), config.stage_dim(s), config.mlp_ratio);
  const auto last = config.stages() - 1;
  r.entries.push_back({"G.to_rgb", MacCategory::EmbeddingHead,
                       std::uint64_t{config.stage_tokens(last)} * config.stage_dim(last) * 3});
  return r;
}

FlopsReport count_macs(const DiscriminatorConfig& config) {
  config.validate();
  FlopsReport r;
  const std::uint64_t patches = config.patch_grid * config.patch_grid;
  const std::uint64_t p = config.patch_size(), c = config.embed_dim;
  r.entries.push_back({"D.patch_embed", MacCategory::EmbeddingHead, patches * 3 * p * p * c});
  for (std::size_t b = 0; b < config.depth; ++b)
    add_block_macs(r, "D.block" + std::to_string(b), config.sequence_length(), c, config.mlp_ratio);
  r.entries.push_back({"D.head", MacCategory::EmbeddingHead, c});
  return r;
}

TRANSGAN_END_NAMESPACE
