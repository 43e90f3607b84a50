#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ibkd/encoder.hpp"
#include "ibkd/evalsuite.hpp"
#include "ibkd/linalg.hpp"

namespace ibkd::dataio {

struct EmbeddingRecord {
  std::string id;
  std::vector<double> vector;
  bool operator==(const EmbeddingRecord&) const = default;
};

/// Binary layout: "IBKV", u32 version, u64 count, u32 dim, then per record
/// u16 id length, UTF-8 id bytes, dim × f64. All integers little-endian.
std::vector<unsigned char> encode_embeddings(const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> decode_embeddings(const std::vector<unsigned char>& bytes);
void write_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings(const std::string& path);

/// One {"id": …, "vector": […]} object per line.
void write_embeddings_jsonl(const std::string& path, const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings_jsonl(const std::string& path);

/// Throws a format error on mixed dimensionality or duplicate ids.
void validate_records(const std::vector<EmbeddingRecord>& records);

std::vector<EmbeddingRecord> to_records(const std::vector<std::string>& ids, const Matrix& rows);
std::pair<std::vector<std::string>, Matrix> from_records(const std::vector<EmbeddingRecord>& records);

/// One fine-tuning unit: anchor, positive, K negatives (input features).
struct SupervisedInstance {
  std::vector<double> anchor;
  std::vector<double> positive;
  Matrix negatives;  // K × d_in
};

/// A set of instances stored batch-friendly: row i of anchors/positives and
/// rows i·K … i·K+K−1 of negatives form instance i.
struct SupervisedSet {
  std::size_t K = 0;
  Matrix anchors;
  Matrix positives;
  Matrix negatives;
  std::vector<std::string> anchor_ids;
  std::vector<std::string> positive_ids;
  std::vector<std::string> negative_ids;

  std::size_t size() const { return anchors.rows(); }
  SupervisedInstance instance(std::size_t i) const;
  /// Instances selected by index, in order.
  SupervisedSet subset(std::span<const std::size_t> index) const;
  /// Keeps the first K negatives of every instance.
  SupervisedSet with_negatives(std::size_t K) const;
};

struct SyntheticSpec {
  std::size_t latent_dim = 8;
  std::size_t input_dim = 64;
  std::size_t teacher_dim = 32;
  std::size_t corpus_size = 2000;
  std::size_t query_count = 200;
  double noise_sigma = 0.1;
  std::uint64_t seed = 7;
  /// Hard negatives mined per supervised instance.
  std::size_t hard_negatives = 8;
  /// Held-out item pairs for similarity (STS-style) evaluation.
  std::size_t sts_pairs = 1000;

  void validate() const;
  static SyntheticSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

/// Everything a run needs. Ids: corpus "d<i>", held-out queries "q<j>",
/// training anchors "a<i>" (anchor a<i> shares its latent with d<i>).
struct Dataset {
  std::vector<std::string> corpus_ids;
  Matrix corpus;
  std::vector<std::string> query_ids;
  Matrix queries;
  std::vector<std::string> anchor_ids;
  Matrix anchors;
  encoder::LookupTable teacher;
  SupervisedSet supervised;
  /// (query id, relevant doc id)
  std::vector<std::pair<std::string, std::string>> relevance;
  /// (id a, id b, teacher cosine) over held-out queries
  struct StsPair {
    std::string a, b;
    double gold = 0.0;
  };
  std::vector<StsPair> sts;

  std::size_t input_dim() const { return corpus.cols(); }
  /// Relevance keyed by row indices of `queries` / `corpus`.
  eval::Relevance relevance_index() const;
  /// Input rows for arbitrary ids across corpus, queries and anchors.
  Matrix inputs_for(std::span<const std::string> ids) const;
};

/// Latent z ~ N(0, I_k); input x = B·z + σ·ε; teacher t = A·z / ‖A·z‖.
/// Deterministic in spec.seed.
Dataset gen_synthetic(const SyntheticSpec& spec);

/// Teacher MRR@10 of the held-out queries against the corpus (dot score).
double teacher_mrr_at_10(const Dataset& ds);

/// Names of the files written by write_dataset, in write order.
const std::vector<std::string>& dataset_files();
void write_dataset(const std::string& dir, const Dataset& ds);
Dataset read_dataset(const std::string& dir);

}  // namespace ibkd::dataio
