#include "ibkd/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "ibkd/error.hpp"

namespace ibkd {
namespace detail {

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open '" + path + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Data, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Data, "write to '" + path + "' failed");
}

}  // namespace detail

namespace dataio {

namespace {

constexpr char kMagic[4] = {'I', 'B', 'K', 'V'};
constexpr std::uint32_t kVersion = 1;

using json = nlohmann::json;

std::string read_text(const std::string& path) {
  const auto bytes = detail::read_file_bytes(path);
  return {bytes.begin(), bytes.end()};
}

void write_text(const std::string& path, const std::string& text) {
  detail::write_file_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, '\t')) out.push_back(field);
  return out;
}

}  // namespace

void validate_records(const std::vector<EmbeddingRecord>& records) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].vector.size() != records.front().vector.size()) {
      fail(ErrorKind::Format, "record " + std::to_string(i) + " ('" + records[i].id + "') has dimension " +
                                  std::to_string(records[i].vector.size()) + ", expected " +
                                  std::to_string(records.front().vector.size()));
    }
    if (!seen.insert(records[i].id).second) fail(ErrorKind::Format, "duplicate id '" + records[i].id + "'");
    if (records[i].id.size() > 0xFFFF) fail(ErrorKind::Format, "id longer than 65535 bytes");
  }
}

std::vector<unsigned char> encode_embeddings(const std::vector<EmbeddingRecord>& records) {
  validate_records(records);
  detail::ByteWriter w;
  w.raw(kMagic, 4);
  w.u32(kVersion);
  w.u64(records.size());
  w.u32(records.empty() ? 0 : static_cast<std::uint32_t>(records.front().vector.size()));
  for (const auto& r : records) {
    w.u16(static_cast<std::uint16_t>(r.id.size()));
    w.raw(r.id.data(), r.id.size());
    for (double v : r.vector) w.f64(v);
  }
  return w.take();
}

std::vector<EmbeddingRecord> decode_embeddings(const std::vector<unsigned char>& bytes) {
  detail::ByteReader r(bytes, "embedding file");
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::Format, "embedding file: bad magic at byte offset 0");
  if (const auto v = r.u32(); v != kVersion) {
    fail(ErrorKind::Format, "embedding file: unsupported version " + std::to_string(v) + " at byte offset 4");
  }
  const std::uint64_t count = r.u64();
  const std::uint32_t dim = r.u32();
  std::vector<EmbeddingRecord> out;
  std::set<std::string> seen;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t start = r.offset();
    EmbeddingRecord rec;
    rec.id.resize(r.u16());
    r.raw(rec.id.data(), rec.id.size());
    rec.vector.resize(dim);
    for (auto& v : rec.vector) v = r.f64();
    if (!seen.insert(rec.id).second) {
      fail(ErrorKind::Format, "embedding file: duplicate id '" + rec.id + "' at byte offset " + std::to_string(start));
    }
    out.push_back(std::move(rec));
  }
  if (!r.at_end()) r.error("trailing bytes after last record");
  return out;
}

void write_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records) {
  detail::write_file_bytes(path, encode_embeddings(records));
}

std::vector<EmbeddingRecord> read_embeddings(const std::string& path) {
  return decode_embeddings(detail::read_file_bytes(path));
}

void write_embeddings_jsonl(const std::string& path, const std::vector<EmbeddingRecord>& records) {
  validate_records(records);
  std::string text;
  for (const auto& r : records) {
    json j;
    j["id"] = r.id;
    j["vector"] = r.vector;
    text += j.dump() + "\n";
  }
  write_text(path, text);
}

std::vector<EmbeddingRecord> read_embeddings_jsonl(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<EmbeddingRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + " line " + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::Format, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) fail(ErrorKind::Format, where + ": missing \"id\"");
    if (!j.contains("vector") || !j["vector"].is_array()) fail(ErrorKind::Format, where + ": missing \"vector\"");
    EmbeddingRecord rec;
    rec.id = j["id"].get<std::string>();
    for (const auto& v : j["vector"]) {
      if (!v.is_number()) fail(ErrorKind::Format, where + ": non-numeric vector entry");
      rec.vector.push_back(v.get<double>());
    }
    if (!out.empty() && rec.vector.size() != out.front().vector.size()) {
      fail(ErrorKind::Format, where + ": dimension " + std::to_string(rec.vector.size()) + " differs from first record");
    }
    if (!seen.insert(rec.id).second) fail(ErrorKind::Format, where + ": duplicate id '" + rec.id + "'");
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EmbeddingRecord> to_records(const std::vector<std::string>& ids, const Matrix& rows) {
  if (ids.size() != rows.rows()) fail(ErrorKind::Shape, "to_records: id count does not match row count");
  std::vector<EmbeddingRecord> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) out[i] = {ids[i], {rows.row(i).begin(), rows.row(i).end()}};
  return out;
}

std::pair<std::vector<std::string>, Matrix> from_records(const std::vector<EmbeddingRecord>& records) {
  validate_records(records);
  const std::size_t dim = records.empty() ? 0 : records.front().vector.size();
  std::vector<std::string> ids;
  Matrix m(records.size(), dim);
  for (std::size_t i = 0; i < records.size(); ++i) {
    ids.push_back(records[i].id);
    std::copy(records[i].vector.begin(), records[i].vector.end(), m.row(i).begin());
  }
  return {std::move(ids), std::move(m)};
}

SupervisedInstance SupervisedSet::instance(std::size_t i) const {
  SupervisedInstance inst;
  inst.anchor.assign(anchors.row(i).begin(), anchors.row(i).end());
  inst.positive.assign(positives.row(i).begin(), positives.row(i).end());
  inst.negatives = Matrix(K, anchors.cols());
  for (std::size_t k = 0; k < K; ++k)
    std::copy(negatives.row(i * K + k).begin(), negatives.row(i * K + k).end(), inst.negatives.row(k).begin());
  return inst;
}

SupervisedSet SupervisedSet::subset(std::span<const std::size_t> index) const {
  SupervisedSet out;
  out.K = K;
  out.anchors = linalg::gather_rows(anchors, index);
  out.positives = linalg::gather_rows(positives, index);
  std::vector<std::size_t> neg_index;
  for (std::size_t i : index)
    for (std::size_t k = 0; k < K; ++k) neg_index.push_back(i * K + k);
  out.negatives = linalg::gather_rows(negatives, neg_index);
  for (std::size_t i : index) {
    if (!anchor_ids.empty()) out.anchor_ids.push_back(anchor_ids[i]);
    if (!positive_ids.empty()) out.positive_ids.push_back(positive_ids[i]);
  }
  if (!negative_ids.empty())
    for (std::size_t j : neg_index) out.negative_ids.push_back(negative_ids[j]);
  return out;
}

SupervisedSet SupervisedSet::with_negatives(std::size_t k_new) const {
  if (k_new > K) {
    fail(ErrorKind::Config, "requested " + std::to_string(k_new) + " negatives but the data carries " +
                                std::to_string(K));
  }
  SupervisedSet out = *this;
  out.K = k_new;
  std::vector<std::size_t> neg_index;
  for (std::size_t i = 0; i < size(); ++i)
    for (std::size_t k = 0; k < k_new; ++k) neg_index.push_back(i * K + k);
  out.negatives = Matrix(neg_index.size(), anchors.cols());
  for (std::size_t r = 0; r < neg_index.size(); ++r)
    std::copy(negatives.row(neg_index[r]).begin(), negatives.row(neg_index[r]).end(), out.negatives.row(r).begin());
  out.negative_ids.clear();
  if (!negative_ids.empty())
    for (std::size_t j : neg_index) out.negative_ids.push_back(negative_ids[j]);
  return out;
}

void SyntheticSpec::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorKind::Config, "synthetic spec: " + m); };
  if (latent_dim < 1 || input_dim < 1 || teacher_dim < 1 || corpus_size < 1 || query_count < 1) {
    bad("all dimensions and counts must be at least 1");
  }
  if (latent_dim > std::min(input_dim, teacher_dim)) bad("latent_dim must not exceed input_dim or teacher_dim");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) bad("noise_sigma must be finite and >= 0");
  if (query_count > corpus_size) bad("query_count must not exceed corpus_size");
  if (hard_negatives >= corpus_size) bad("hard_negatives must be smaller than corpus_size");
  if (sts_pairs > query_count * (query_count - 1) / 2) bad("sts_pairs exceeds the number of distinct query pairs");
}

SyntheticSpec SyntheticSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::Config, std::string("synthetic spec: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::Config, "synthetic spec: expected a JSON object");
  SyntheticSpec s;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "latent_dim") s.latent_dim = v.get<std::size_t>();
      else if (key == "input_dim") s.input_dim = v.get<std::size_t>();
      else if (key == "teacher_dim") s.teacher_dim = v.get<std::size_t>();
      else if (key == "corpus_size") s.corpus_size = v.get<std::size_t>();
      else if (key == "query_count") s.query_count = v.get<std::size_t>();
      else if (key == "noise_sigma") s.noise_sigma = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else if (key == "hard_negatives") s.hard_negatives = v.get<std::size_t>();
      else if (key == "sts_pairs") s.sts_pairs = v.get<std::size_t>();
      else fail(ErrorKind::Config, "synthetic spec: unknown field '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::Config, std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::string SyntheticSpec::to_json_text() const {
  nlohmann::ordered_json j;
  j["latent_dim"] = latent_dim;
  j["input_dim"] = input_dim;
  j["teacher_dim"] = teacher_dim;
  j["corpus_size"] = corpus_size;
  j["query_count"] = query_count;
  j["noise_sigma"] = noise_sigma;
  j["seed"] = seed;
  j["hard_negatives"] = hard_negatives;
  j["sts_pairs"] = sts_pairs;
  return j.dump(2);
}

eval::Relevance Dataset::relevance_index() const {
  std::unordered_map<std::string, std::size_t> qi, di;
  for (std::size_t i = 0; i < query_ids.size(); ++i) qi[query_ids[i]] = i;
  for (std::size_t i = 0; i < corpus_ids.size(); ++i) di[corpus_ids[i]] = i;
  eval::Relevance rel;
  for (const auto& [q, d] : relevance) {
    auto qit = qi.find(q);
    auto dit = di.find(d);
    if (qit == qi.end() || dit == di.end()) fail(ErrorKind::Data, "relevance references unknown id " + q + "/" + d);
    rel[qit->second].insert(dit->second);
  }
  return rel;
}

Matrix Dataset::inputs_for(std::span<const std::string> ids) const {
  std::unordered_map<std::string, std::pair<const Matrix*, std::size_t>> where;
  auto add = [&](const std::vector<std::string>& names, const Matrix& m) {
    for (std::size_t i = 0; i < names.size(); ++i) where[names[i]] = {&m, i};
  };
  add(corpus_ids, corpus);
  add(query_ids, queries);
  add(anchor_ids, anchors);
  Matrix out(ids.size(), corpus.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = where.find(ids[i]);
    if (it == where.end()) fail(ErrorKind::Data, "no input features for id '" + ids[i] + "'");
    auto src = it->second.first->row(it->second.second);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t k = spec.latent_dim, din = spec.input_dim, dt = spec.teacher_dim;
  const std::size_t n = spec.corpus_size, nq = spec.query_count;
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](std::size_t r, std::size_t c, double sd) {
    Matrix m(r, c);
    for (double& v : m.data()) v = sd * normal(rng);
    return m;
  };

  // B scaled so every input coordinate has unit signal variance.
  const Matrix B = gaussian(din, k, 1.0 / std::sqrt(static_cast<double>(k)));
  const Matrix A = gaussian(dt, k, 1.0);
  const Matrix Z = gaussian(n, k, 1.0);

  auto observe = [&](std::span<const std::size_t> latent_rows) {
    Matrix x = linalg::matmul_nt(linalg::gather_rows(Z, latent_rows), B);
    for (double& v : x.data()) v += spec.noise_sigma * normal(rng);
    return x;
  };

  Dataset ds;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t i = 0; i < n; ++i) ds.corpus_ids.push_back("d" + std::to_string(i));
  ds.corpus = observe(all);

  std::vector<std::size_t> order = all;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> targets(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(nq));
  for (std::size_t j = 0; j < nq; ++j) {
    ds.query_ids.push_back("q" + std::to_string(j));
    ds.relevance.emplace_back(ds.query_ids.back(), ds.corpus_ids[targets[j]]);
  }
  ds.queries = observe(targets);

  // Training anchors for every doc that no held-out query targets.
  std::vector<bool> is_target(n, false);
  for (std::size_t t : targets) is_target[t] = true;
  std::vector<std::size_t> anchor_docs;
  for (std::size_t i = 0; i < n; ++i)
    if (!is_target[i]) anchor_docs.push_back(i);
  for (std::size_t i : anchor_docs) ds.anchor_ids.push_back("a" + std::to_string(i));
  ds.anchors = observe(anchor_docs);

  Matrix t_doc = linalg::matmul_nt(Z, A);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = t_doc.row(i);
    const double norm = std::sqrt(linalg::dot(r, r));
    for (double& v : r) v /= norm;
  }
  std::vector<std::string> teacher_ids = ds.corpus_ids;
  std::vector<Matrix> blocks{t_doc, linalg::gather_rows(t_doc, targets), linalg::gather_rows(t_doc, anchor_docs)};
  teacher_ids.insert(teacher_ids.end(), ds.query_ids.begin(), ds.query_ids.end());
  teacher_ids.insert(teacher_ids.end(), ds.anchor_ids.begin(), ds.anchor_ids.end());
  ds.teacher = encoder::LookupTable(std::move(teacher_ids), linalg::vstack(blocks));

  // Hard negatives: the K docs the teacher finds most similar, excluding the
  // anchor's own latent.
  const std::size_t K = spec.hard_negatives;
  auto& sup = ds.supervised;
  sup.K = K;
  sup.anchors = ds.anchors;
  sup.positives = linalg::gather_rows(ds.corpus, anchor_docs);
  sup.anchor_ids = ds.anchor_ids;
  sup.negatives = Matrix(anchor_docs.size() * K, din);
  const auto ranked = eval::exact_retrieve(linalg::gather_rows(t_doc, anchor_docs), t_doc, K + 1, eval::Score::Dot);
  for (std::size_t a = 0; a < anchor_docs.size(); ++a) {
    sup.positive_ids.push_back(ds.corpus_ids[anchor_docs[a]]);
    std::size_t taken = 0;
    for (const auto& hit : ranked[a].hits) {
      if (hit.doc == anchor_docs[a] || taken == K) continue;
      sup.negative_ids.push_back(ds.corpus_ids[hit.doc]);
      std::copy(ds.corpus.row(hit.doc).begin(), ds.corpus.row(hit.doc).end(),
                sup.negatives.row(a * K + taken).begin());
      ++taken;
    }
  }

  std::set<std::pair<std::size_t, std::size_t>> chosen;
  std::uniform_int_distribution<std::size_t> pick(0, nq - 1);
  while (ds.sts.size() < spec.sts_pairs) {
    std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (!chosen.insert({a, b}).second) continue;
    const double gold = linalg::dot(ds.teacher.at(ds.query_ids[a]), ds.teacher.at(ds.query_ids[b]));
    ds.sts.push_back({ds.query_ids[a], ds.query_ids[b], gold});
  }
  return ds;
}

double teacher_mrr_at_10(const Dataset& ds) {
  const encoder::TeacherModel teacher(ds.teacher);
  const Matrix tq = teacher.embed(ds.query_ids, ds.queries);
  const Matrix td = teacher.embed(ds.corpus_ids, ds.corpus);
  const auto results = eval::exact_retrieve(tq, td, 10, eval::Score::Dot);
  return eval::mrr_at_k(results, ds.relevance_index(), 10);
}

const std::vector<std::string>& dataset_files() {
  static const std::vector<std::string> files = {"corpus.ibkv",      "queries.ibkv",  "anchors.ibkv", "teacher.ibkv",
                                                 "supervised.jsonl", "relevance.tsv", "sts_pairs.tsv"};
  return files;
}

void write_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Data, "cannot create output directory '" + dir + "': " + ec.message());
  const fs::path d(dir);
  write_embeddings((d / "corpus.ibkv").string(), to_records(ds.corpus_ids, ds.corpus));
  write_embeddings((d / "queries.ibkv").string(), to_records(ds.query_ids, ds.queries));
  write_embeddings((d / "anchors.ibkv").string(), to_records(ds.anchor_ids, ds.anchors));
  write_embeddings((d / "teacher.ibkv").string(), to_records(ds.teacher.ids, ds.teacher.table));

  std::string sup;
  const auto& s = ds.supervised;
  for (std::size_t i = 0; i < s.size(); ++i) {
    nlohmann::ordered_json j;
    j["anchor"] = s.anchor_ids[i];
    j["positive"] = s.positive_ids[i];
    std::vector<std::string> negs(s.negative_ids.begin() + static_cast<std::ptrdiff_t>(i * s.K),
                                  s.negative_ids.begin() + static_cast<std::ptrdiff_t>((i + 1) * s.K));
    j["negatives"] = negs;
    sup += j.dump() + "\n";
  }
  write_text((d / "supervised.jsonl").string(), sup);

  std::string rel = "query_id\tdoc_id\n";
  for (const auto& [q, doc] : ds.relevance) rel += q + "\t" + doc + "\n";
  write_text((d / "relevance.tsv").string(), rel);

  std::string sts = "id_a\tid_b\tgold\n";
  for (const auto& p : ds.sts) sts += p.a + "\t" + p.b + "\t" + fmt_double(p.gold) + "\n";
  write_text((d / "sts_pairs.tsv").string(), sts);
}

Dataset read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path d(dir);
  if (!fs::is_directory(d)) fail(ErrorKind::Data, "data directory '" + dir + "' does not exist");
  Dataset ds;
  std::tie(ds.corpus_ids, ds.corpus) = from_records(read_embeddings((d / "corpus.ibkv").string()));
  std::tie(ds.query_ids, ds.queries) = from_records(read_embeddings((d / "queries.ibkv").string()));
  std::tie(ds.anchor_ids, ds.anchors) = from_records(read_embeddings((d / "anchors.ibkv").string()));
  auto [tids, tmat] = from_records(read_embeddings((d / "teacher.ibkv").string()));
  ds.teacher = encoder::LookupTable(std::move(tids), std::move(tmat));
  if (ds.queries.rows() && ds.queries.cols() != ds.corpus.cols()) fail(ErrorKind::Data, "query/corpus dims differ");
  if (ds.anchors.rows() && ds.anchors.cols() != ds.corpus.cols()) fail(ErrorKind::Data, "anchor/corpus dims differ");

  {
    std::istringstream in(read_text((d / "supervised.jsonl").string()));
    std::string line;
    std::size_t lineno = 0;
    std::optional<std::size_t> K;
    auto& s = ds.supervised;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::string where = "supervised.jsonl line " + std::to_string(lineno);
      json j;
      try {
        j = json::parse(line);
        s.anchor_ids.push_back(j.at("anchor").get<std::string>());
        s.positive_ids.push_back(j.at("positive").get<std::string>());
        auto negs = j.at("negatives").get<std::vector<std::string>>();
        if (!K) K = negs.size();
        if (negs.size() != *K) fail(ErrorKind::Format, where + ": inconsistent negative count");
        s.negative_ids.insert(s.negative_ids.end(), negs.begin(), negs.end());
      } catch (const json::exception& e) {
        fail(ErrorKind::Format, where + ": " + e.what());
      }
    }
    s.K = K.value_or(0);
    s.anchors = ds.inputs_for(s.anchor_ids);
    s.positives = ds.inputs_for(s.positive_ids);
    s.negatives = ds.inputs_for(s.negative_ids);
  }

  auto read_tsv = [&](const std::string& name, std::size_t fields, auto&& on_row) {
    std::istringstream in(read_text((d / name).string()));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (lineno == 1 || line.empty()) continue;
      const auto f = split_tabs(line);
      if (f.size() != fields) fail(ErrorKind::Format, name + " line " + std::to_string(lineno) + ": expected " +
                                                          std::to_string(fields) + " fields");
      on_row(f, lineno);
    }
  };
  read_tsv("relevance.tsv", 2, [&](const auto& f, std::size_t) { ds.relevance.emplace_back(f[0], f[1]); });
  read_tsv("sts_pairs.tsv", 3, [&](const auto& f, std::size_t lineno) {
    try {
      ds.sts.push_back({f[0], f[1], std::stod(f[2])});
    } catch (const std::exception&) {
      fail(ErrorKind::Format, "sts_pairs.tsv line " + std::to_string(lineno) + ": bad gold score");
    }
  });
  return ds;
}

}  // namespace dataio
}  // namespace ibkd
