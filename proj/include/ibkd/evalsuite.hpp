#pragma once

#include <cstddef>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ibkd/linalg.hpp"

namespace ibkd::eval {

enum class Score { Dot, Cosine };

Score score_from_string(const std::string& name);
std::string to_string(Score s);

struct Hit {
  std::size_t doc = 0;
  double score = 0.0;
  bool operator==(const Hit&) const = default;
};

/// Hits for one query, scores non-increasing, ties by ascending doc index.
struct RankedResult {
  std::size_t query = 0;
  std::vector<Hit> hits;
};

/// query index → indices of relevant corpus docs.
using Relevance = std::map<std::size_t, std::set<std::size_t>>;

/// Rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

double mrr_at_k(std::span<const RankedResult> results, const Relevance& relevant, std::size_t k);
double recall_at_k(std::span<const RankedResult> results, const Relevance& relevant, std::size_t k);

/// Mean squared distance between row-aligned pairs (a_i, b_i).
double alignment(const Matrix& a, const Matrix& b);

/// log mean over unordered distinct pairs of exp(−2‖x−y‖²).
double uniformity(const Matrix& embeddings);

/// Sample covariance (n − 1 denominator), d×d.
Matrix covariance_matrix(const Matrix& embeddings);

struct OffdiagMass {
  double value = 0.0;
  /// Dimensions with zero variance; their correlations are reported as 0.
  std::vector<std::size_t> zero_variance;
};

/// Correlation matrix from a covariance; zero-variance rows/cols are 0.
Matrix correlation_from_covariance(const Matrix& cov);
/// Mean |corr_ij| over i ≠ j.
OffdiagMass offdiag_mass(const Matrix& cov);

/// Exhaustive top-k search. Parallel over queries; output is independent of
/// the thread count.
std::vector<RankedResult> exact_retrieve(const Matrix& queries, const Matrix& corpus, std::size_t k, Score score);

struct MetricReport {
  std::string eval_set;
  std::size_t dim = 0;
  std::map<std::string, double> metrics;
  std::vector<std::string> warnings;

  /// Throws a data error if any metric is non-finite.
  void validate() const;
  std::string to_json() const;
};

/// query_id \t doc_id \t rank (1-based) \t score
void write_rankings_tsv(std::ostream& os, std::span<const RankedResult> results,
                        std::span<const std::string> query_ids, std::span<const std::string> doc_ids);

}  // namespace ibkd::eval
