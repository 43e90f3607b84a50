#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "ibkd/dataio.hpp"

using namespace ibkd;
using dataio::EmbeddingRecord;
using testutil::error_kind;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ibkd_unit_" + name);
  fs::remove_all(p);
  return p;
}

std::string error_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

std::vector<unsigned char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

dataio::SyntheticSpec small_spec() {
  dataio::SyntheticSpec s;
  s.corpus_size = 120;
  s.query_count = 20;
  s.sts_pairs = 50;
  s.hard_negatives = 4;
  return s;
}

}  // namespace

TEST_CASE("empty record set is a header-only file") {
  const auto bytes = dataio::encode_embeddings({});
  CHECK(bytes.size() == 20);
  CHECK(dataio::decode_embeddings(bytes).empty());
}

TEST_CASE("binary layout of a single record") {
  const std::vector<EmbeddingRecord> recs{{"q1", {1.0, -2.5}}};
  const std::vector<unsigned char> expected{
      'I', 'B', 'K', 'V', 1, 0, 0, 0,                    // magic, version
      1, 0, 0, 0, 0, 0, 0, 0,                            // count
      2, 0, 0, 0,                                        // dim
      2, 0, 'q', '1',                                    // id
      0, 0, 0, 0, 0, 0, 0xF0, 0x3F,                      // 1.0
      0, 0, 0, 0, 0, 0, 0x04, 0xC0};                     // -2.5
  CHECK(dataio::encode_embeddings(recs) == expected);
  CHECK(dataio::decode_embeddings(expected) == recs);
}

TEST_CASE("binary round trip through a file is bit exact") {
  const Matrix m = testutil::normal(50, 7, 3);
  std::vector<std::string> ids;
  for (int i = 0; i < 50; ++i) ids.push_back("id-" + std::to_string(i) + "-\xc3\xa9");
  const auto recs = dataio::to_records(ids, m);
  const auto path = scratch("rt.ibkv");
  dataio::write_embeddings(path.string(), recs);
  const auto back = dataio::read_embeddings(path.string());
  CHECK(back == recs);
  CHECK(dataio::from_records(back).second == m);
  fs::remove(path);
}

TEST_CASE("binary format errors name the byte offset") {
  const auto good = dataio::encode_embeddings({{"a", {1.0}}, {"b", {2.0}}});
  auto magic = good;
  magic[1] = 'X';
  CHECK(error_message([&] { dataio::decode_embeddings(magic); }).find("offset 0") != std::string::npos);
  auto version = good;
  version[4] = 9;
  CHECK(error_message([&] { dataio::decode_embeddings(version); }).find("offset 4") != std::string::npos);
  auto cut = good;
  cut.resize(cut.size() - 4);
  const auto msg = error_message([&] { dataio::decode_embeddings(cut); });
  CHECK(msg.find("offset") != std::string::npos);
  CHECK(error_kind([&] { dataio::decode_embeddings(cut); }) == ErrorKind::Format);
  const auto dup = dataio::encode_embeddings({{"a", {1.0}}, {"c", {2.0}}});
  auto patched = dup;
  patched[patched.size() - 9] = 'a';
  CHECK(error_message([&] { dataio::decode_embeddings(patched); }).find("duplicate id 'a' at byte offset 31") !=
        std::string::npos);
  CHECK(error_kind([] { dataio::encode_embeddings({{"a", {1.0}}, {"a", {2.0}}}); }) == ErrorKind::Format);
  CHECK(error_kind([] { dataio::encode_embeddings({{"a", {1.0}}, {"b", {2.0, 3.0}}}); }) == ErrorKind::Format);
}

TEST_CASE("jsonl round trip and errors") {
  const std::vector<EmbeddingRecord> recs{{"x", {0.1, 1e-300}}, {"y", {-3.0, 2.0}}};
  const auto path = scratch("rt.jsonl");
  dataio::write_embeddings_jsonl(path.string(), recs);
  CHECK(dataio::read_embeddings_jsonl(path.string()) == recs);
  {
    std::ofstream out(path);
    out << "{\"id\": \"a\", \"vector\": [1]}\n{\"id\": \"b\"}\n";
  }
  const auto msg = error_message([&] { dataio::read_embeddings_jsonl(path.string()); });
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("vector") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("synthetic generator") {
  const auto spec = small_spec();
  const auto a = dataio::gen_synthetic(spec);

  SUBCASE("same seed gives byte-identical files") {
    const auto d1 = scratch("gen1"), d2 = scratch("gen2");
    dataio::write_dataset(d1.string(), a);
    dataio::write_dataset(d2.string(), dataio::gen_synthetic(spec));
    for (const auto& f : dataio::dataset_files()) CHECK(file_bytes(d1 / f) == file_bytes(d2 / f));
    const auto back = dataio::read_dataset(d1.string());
    CHECK(back.corpus == a.corpus);
    CHECK(back.queries == a.queries);
    CHECK(back.supervised.negatives == a.supervised.negatives);
    CHECK(back.teacher.table == a.teacher.table);
    CHECK(back.relevance == a.relevance);
    CHECK(back.sts.size() == a.sts.size());
    CHECK(back.sts.front().gold == a.sts.front().gold);
    fs::remove_all(d1);
    fs::remove_all(d2);
  }
  SUBCASE("shapes and labels") {
    CHECK(a.corpus.rows() == 120);
    CHECK(a.corpus.cols() == 64);
    CHECK(a.queries.rows() == 20);
    CHECK(a.anchors.rows() == 100);
    CHECK(a.teacher.table.cols() == 32);
    CHECK(a.supervised.K == 4);
    CHECK(a.supervised.negatives.rows() == 400);
    CHECK(a.sts.size() == 50);
    for (std::size_t i = 0; i < a.supervised.size(); ++i) {
      const std::string latent = a.supervised.positive_ids[i].substr(1);
      CHECK(a.supervised.anchor_ids[i].substr(1) == latent);
      std::set<std::string> negs;
      for (std::size_t k = 0; k < 4; ++k) {
        const auto& n = a.supervised.negative_ids[i * 4 + k];
        CHECK(n != a.supervised.positive_ids[i]);
        negs.insert(n);
      }
      CHECK(negs.size() == 4);
    }
    for (std::size_t r = 0; r < a.teacher.table.rows(); ++r) {
      const auto row = a.teacher.table.row(r);
      CHECK(linalg::dot(row, row) == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
  SUBCASE("noiseless positive pairs are identical") {
    auto s = spec;
    s.noise_sigma = 0.0;
    const auto ds = dataio::gen_synthetic(s);
    CHECK(ds.supervised.anchors == ds.supervised.positives);
  }
}

TEST_CASE("teacher solves the default task") {
  const auto ds = dataio::gen_synthetic(dataio::SyntheticSpec{});
  CHECK(dataio::teacher_mrr_at_10(ds) >= 0.95);
}

TEST_CASE("synthetic spec validation and json") {
  auto s = small_spec();
  s.latent_dim = 40;
  CHECK(error_kind([&] { s.validate(); }) == ErrorKind::Config);
  s = small_spec();
  s.noise_sigma = -1.0;
  CHECK(error_kind([&] { s.validate(); }) == ErrorKind::Config);
  const auto parsed = dataio::SyntheticSpec::from_json_text(small_spec().to_json_text());
  CHECK(parsed.corpus_size == 120);
  CHECK(parsed.sts_pairs == 50);
  CHECK(error_kind([] { dataio::SyntheticSpec::from_json_text("{\"corpus\": 3}"); }) == ErrorKind::Config);
  CHECK(error_message([] { dataio::SyntheticSpec::from_json_text("{\n\"seed\": }"); }).find("line 2") !=
        std::string::npos);
}

TEST_CASE("supervised set helpers") {
  const auto ds = dataio::gen_synthetic(small_spec());
  const auto sub = ds.supervised.subset(std::vector<std::size_t>{3, 1});
  CHECK(sub.size() == 2);
  CHECK(sub.anchor_ids[0] == ds.supervised.anchor_ids[3]);
  const auto inst = ds.supervised.instance(3);
  CHECK(inst.negatives.rows() == 4);
  CHECK(sub.instance(0).negatives == inst.negatives);
  const auto two = ds.supervised.with_negatives(2);
  CHECK(two.K == 2);
  CHECK(two.negative_ids[2] == ds.supervised.negative_ids[4]);
  CHECK(error_kind([&] { ds.supervised.with_negatives(5); }) == ErrorKind::Config);
}
