// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "transgan/discriminator.hpp"
#include "transgan/generator.hpp"

TRANSGAN_BEGIN_NAMESPACE

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Mean and covariance of d-dimensional features. Covariance is row-major.
struct FeatureMoments {
  std::vector<double> mean;
  std::vector<double> covariance;
  std::size_t count = 0;

  std::size_t dim() const { return mean.size(); }
  double cov(std::size_t i, std::size_t j) const { return covariance[i * dim() + j]; }
};

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2). Matrix
/// square roots come from symmetric eigendecompositions; eigenvalues below
/// 1e-10 of the largest are treated as zero.
double frechet_distance(const FeatureMoments& a, const FeatureMoments& b);

inline constexpr std::size_t kFeatureDim = 64;
inline constexpr std::uint64_t kProjectorSeed = 0x7472616E7367616EULL;

/// Gaussian projection [pixels, d] with N(0, 1/pixels) entries, row-major.
std::vector<double> projection_matrix(std::size_t pixels, std::size_t d, std::uint64_t seed);

/// Flattens each image, projects it to d features and returns the mean and
/// unbiased covariance over the batch.
FeatureMoments extract_moments(const Tensor& images, std::uint64_t projector_seed = kProjectorSeed,
                               std::size_t d = kFeatureDim);

/// Proxy Frechet distance between two image batches.
double image_frechet(const Tensor& a, const Tensor& b, std::uint64_t projector_seed = kProjectorSeed,
                     std::size_t d = kFeatureDim);

enum class MacCategory { AttentionProjections, AttentionScores, Mlp, EmbeddingHead };
const char* to_string(MacCategory c);

struct MacEntry {
  std::string label;
  MacCategory category;
  std::uint64_t macs;
};

struct FlopsReport {
  std::vector<MacEntry> entries;

  std::uint64_t total() const;
  std::uint64_t subtotal(MacCategory c) const;
  /// Sum over entries whose label starts with `prefix`.
  std::uint64_t subtotal(const std::string& prefix) const;

  std::string table() const;
  /// key=value lines: one per entry, one per category, then total.
  std::string key_values() const;
};

/// Per encoder block at (N, C) with MLP ratio r: 4NC^2 for the q/k/v/output
/// projections, 2N^2C for scores and weighted sum, 2NC*rC for the MLP.
void add_block_macs(FlopsReport& report, const std::string& prefix, std::uint64_t tokens,
                    std::uint64_t dim, std::uint64_t mlp_ratio);

/// Input MLP, every stage's blocks and the RGB head.
FlopsReport count_macs(const GeneratorConfig& config);
/// Patch embedding, blocks over the patches plus [cls], and the score head.
FlopsReport count_macs(const DiscriminatorConfig& config);

TRANSGAN_END_NAMESPACE
