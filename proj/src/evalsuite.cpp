#include "ibkd/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include <json.hpp>

#include "ibkd/error.hpp"

namespace ibkd::eval {

Score score_from_string(const std::string& name) {
  if (name == "dot") return Score::Dot;
  if (name == "cosine") return Score::Cosine;
  fail(ErrorKind::Config, "unknown score '" + name + "' (expected dot or cosine)");
}

std::string to_string(Score s) { return s == Score::Dot ? "dot" : "cosine"; }

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

const std::set<std::size_t>& relevant_for(const Relevance& relevant, std::size_t query) {
  auto it = relevant.find(query);
  if (it == relevant.end()) fail(ErrorKind::Data, "no relevance entry for query " + std::to_string(query));
  return it->second;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::Pairing, "spearman: sequences differ in length");
  if (a.size() < 2) fail(ErrorKind::Degenerate, "spearman: need at least 2 observations");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) fail(ErrorKind::Degenerate, "spearman: zero rank variance, correlation undefined");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double mrr_at_k(std::span<const RankedResult> results, const Relevance& relevant, std::size_t k) {
  if (results.empty()) fail(ErrorKind::Data, "mrr_at_k: no results");
  double total = 0.0;
  for (const auto& r : results) {
    const auto& rel = relevant_for(relevant, r.query);
    const std::size_t limit = std::min(k, r.hits.size());
    for (std::size_t i = 0; i < limit; ++i) {
      if (rel.count(r.hits[i].doc)) {
        total += 1.0 / static_cast<double>(i + 1);
        break;
      }
    }
  }
  return total / static_cast<double>(results.size());
}

double recall_at_k(std::span<const RankedResult> results, const Relevance& relevant, std::size_t k) {
  if (results.empty()) fail(ErrorKind::Data, "recall_at_k: no results");
  double total = 0.0;
  for (const auto& r : results) {
    const auto& rel = relevant_for(relevant, r.query);
    if (rel.empty()) fail(ErrorKind::Data, "recall_at_k: empty relevance set for query " + std::to_string(r.query));
    const std::size_t limit = std::min(k, r.hits.size());
    std::size_t found = 0;
    for (std::size_t i = 0; i < limit; ++i) found += rel.count(r.hits[i].doc);
    total += static_cast<double>(found) / static_cast<double>(rel.size());
  }
  return total / static_cast<double>(results.size());
}

double alignment(const Matrix& a, const Matrix& b) {
  linalg::require_same_shape(a, b, "alignment");
  if (a.rows() == 0) fail(ErrorKind::Data, "alignment: empty pair set");
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) total += linalg::squared_distance(a.row(i), b.row(i));
  return total / static_cast<double>(a.rows());
}

double uniformity(const Matrix& e) {
  const std::size_t n = e.rows();
  if (n < 2) fail(ErrorKind::Data, "uniformity: need at least 2 embeddings");
  std::vector<double> row_sum(n, 0.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = i + 1; j < n; ++j) s += std::exp(-2.0 * linalg::squared_distance(e.row(i), e.row(j)));
    row_sum[i] = s;
  }
  const double total = std::accumulate(row_sum.begin(), row_sum.end(), 0.0);
  const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
  return std::log(total / pairs);
}

Matrix covariance_matrix(const Matrix& e) {
  const std::size_t n = e.rows(), d = e.cols();
  if (n < 2) fail(ErrorKind::Data, "covariance_matrix: need at least 2 embeddings");
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += e(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, d);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (e(i, a) - mean[a]) * (e(i, b) - mean[b]);
      s /= static_cast<double>(n - 1);
      cov(a, b) = s;
      cov(b, a) = s;
    }
  }
  return cov;
}

Matrix correlation_from_covariance(const Matrix& cov) {
  if (cov.rows() != cov.cols()) fail(ErrorKind::Shape, "correlation: non-square covariance " + cov.shape_str());
  const std::size_t d = cov.rows();
  Matrix corr(d, d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      const double va = cov(a, a), vb = cov(b, b);
      if (va <= 0.0 || vb <= 0.0) continue;
      corr(a, b) = std::clamp(cov(a, b) / std::sqrt(va * vb), -1.0, 1.0);
    }
  }
  return corr;
}

OffdiagMass offdiag_mass(const Matrix& cov) {
  const Matrix corr = correlation_from_covariance(cov);
  const std::size_t d = corr.rows();
  OffdiagMass out;
  for (std::size_t a = 0; a < d; ++a)
    if (cov(a, a) <= 0.0) out.zero_variance.push_back(a);
  if (d < 2) return out;
  double total = 0.0;
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      if (a != b) total += std::abs(corr(a, b));
  out.value = total / static_cast<double>(d * (d - 1));
  return out;
}

std::vector<RankedResult> exact_retrieve(const Matrix& queries, const Matrix& corpus, std::size_t k, Score score) {
  if (k < 1) fail(ErrorKind::Config, "exact_retrieve: k must be at least 1");
  if (queries.cols() != corpus.cols()) {
    fail(ErrorKind::Shape, "exact_retrieve: query dim " + std::to_string(queries.cols()) + " != corpus dim " +
                               std::to_string(corpus.cols()));
  }
  const std::size_t nq = queries.rows(), nd = corpus.rows();
  const std::size_t keep = std::min(k, nd);
  std::vector<double> doc_norm(nd, 1.0);
  if (score == Score::Cosine) {
    for (std::size_t j = 0; j < nd; ++j) doc_norm[j] = std::sqrt(linalg::dot(corpus.row(j), corpus.row(j)));
  }
  std::vector<RankedResult> out(nq);
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t q = 0; q < nq; ++q) {
    double qnorm = 1.0;
    if (score == Score::Cosine) qnorm = std::sqrt(linalg::dot(queries.row(q), queries.row(q)));
    std::vector<Hit> hits(nd);
    for (std::size_t j = 0; j < nd; ++j) {
      double s = linalg::dot(queries.row(q), corpus.row(j));
      if (score == Score::Cosine) {
        const double denom = qnorm * doc_norm[j];
        s = denom > 0.0 ? s / denom : 0.0;
      }
      hits[j] = {j, s};
    }
    auto better = [](const Hit& a, const Hit& b) { return a.score > b.score || (a.score == b.score && a.doc < b.doc); };
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), better);
    hits.resize(keep);
    out[q] = RankedResult{q, std::move(hits)};
  }
  return out;
}

void MetricReport::validate() const {
  for (const auto& [name, v] : metrics) {
    if (!std::isfinite(v)) fail(ErrorKind::Data, "metric '" + name + "' is not finite");
  }
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["eval_set"] = eval_set;
  j["dim"] = dim;
  nlohmann::ordered_json m = nlohmann::ordered_json::object();
  for (const auto& [name, v] : metrics) m[name] = v;
  j["metrics"] = m;
  j["warnings"] = warnings;
  return j.dump(2);
}

void write_rankings_tsv(std::ostream& os, std::span<const RankedResult> results, std::span<const std::string> query_ids,
                        std::span<const std::string> doc_ids) {
  os << "query_id\tdoc_id\trank\tscore\n";
  os << std::setprecision(17);
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.hits.size(); ++i) {
      os << query_ids[r.query] << '\t' << doc_ids[r.hits[i].doc] << '\t' << (i + 1) << '\t' << r.hits[i].score << '\n';
    }
  }
}

}  // namespace ibkd::eval
