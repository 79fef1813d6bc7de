#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tplf/datasets.hpp"

using namespace tplf;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& content) {
  fs::path dir = fs::temp_directory_path() / "tplf_data_test";
  fs::create_directories(dir);
  fs::path p = dir / name;
  std::ofstream out(p);
  out << content;
  return p;
}

}  // namespace

TEST_CASE("conll fixture: two sentences, one PER span each") {
  auto p = write_tmp("two.conll",
                     "-DOCSTART- -X- O O\n"
                     "\n"
                     "John B-PER\n"
                     "Smith I-PER\n"
                     "laughs O\n"
                     "\n"
                     "Mary B-PER\n"
                     "waves O\n");
  NerDataset ds = load_conll(p.string());
  CHECK(ds.scheme == TagScheme::kBio);
  REQUIRE(ds.sentences.size() == 2);
  CHECK(ds.sentences[0].words == std::vector<std::string>{"John", "Smith", "laughs"});
  CHECK(ds.sentences[0].tags[1] == "I-PER");
  CHECK(ds.label_names.size() == 3);
}

TEST_CASE("docstart-only file reports an empty dataset") {
  auto p = write_tmp("docstart.conll", "-DOCSTART- O\n\n-DOCSTART- O\n");
  CHECK_THROWS_WITH_AS((void)load_conll(p.string()), doctest::Contains("empty dataset"), DataError);
}

TEST_CASE("sentence-initial I-LOC is accepted") {
  auto p = write_tmp("iloc.conll", "Paris I-LOC\ncalls O\n");
  NerDataset ds = load_conll(p.string());
  CHECK(ds.sentences[0].tags[0] == "I-LOC");
}

TEST_CASE("unknown tag schemes carry the line number") {
  auto p = write_tmp("bad.conll", "ok O\nbroken WHAT\n");
  try {
    (void)load_conll(p.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  auto mixed = write_tmp("mixed.conll", "a O\nb C3\n");
  CHECK_THROWS_AS((void)load_conll(mixed.string()), DataError);
}

TEST_CASE("cluster-tag files load with the cluster scheme") {
  auto p = write_tmp("cluster.conll", "word C0\nother C17\n\nmore C3\n");
  NerDataset ds = load_conll(p.string());
  CHECK(ds.scheme == TagScheme::kCluster);
  CHECK(ds.sentences.size() == 2);
}

TEST_CASE("conll save/load round trip preserves content hash") {
  auto p = write_tmp("rt.conll", "John B-PER\nsmiles O\n\nBerlin B-LOC\n");
  NerDataset ds = load_conll(p.string());
  auto p2 = write_tmp("rt2.conll", "");
  save_conll(ds, p2.string());
  CHECK(load_conll(p2.string()).content_hash() == ds.content_hash());
}

TEST_CASE("pairs: JSONL and TSV of the same content hash identically") {
  auto jsonl = write_tmp("pairs.jsonl",
                         "{\"anchor\":\"a b\",\"positive\":\"c d\"}\n"
                         "{\"anchor\":\"e\",\"positive\":\"f g\"}\n"
                         "{\"anchor\":\"h\",\"positive\":\"i\"}\n");
  auto tsv = write_tmp("pairs.tsv", "a b\tc d\ne\tf g\nh\ti\n");
  PairDataset a = load_pairs(jsonl.string());
  PairDataset b = load_pairs(tsv.string());
  CHECK(a.pairs.size() == 3);
  CHECK(a.content_hash() == b.content_hash());
}

TEST_CASE("pairs: empty positive and missing fields carry line numbers") {
  auto p = write_tmp("badpairs.jsonl",
                     "{\"anchor\":\"a\",\"positive\":\"b\"}\n"
                     "{\"anchor\":\"a\",\"positive\":\"\"}\n");
  try {
    (void)load_pairs(p.string());
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }

  auto missing = write_tmp("missing.jsonl", "{\"anchor\":\"a\"}\n");
  CHECK_THROWS_AS((void)load_pairs(missing.string()), DataError);
  auto empty = write_tmp("empty.jsonl", "\n\n");
  CHECK_THROWS_AS((void)load_pairs(empty.string()), DataError);
}

TEST_CASE("labeled texts load from JSONL and TSV") {
  auto jsonl = write_tmp("lab.jsonl",
                         "{\"text\":\"nice day\",\"label\":\"pos\"}\n"
                         "{\"text\":\"bad day\",\"label\":\"neg\"}\n");
  LabeledTextDataset ds = load_labeled_texts(jsonl.string());
  CHECK(ds.items.size() == 2);
  CHECK(ds.label_names == std::vector<std::string>{"pos", "neg"});
  CHECK(ds.label_id("neg") == 1);
  CHECK_THROWS_AS((void)ds.label_id("unseen"), DataError);

  auto tsv = write_tmp("lab.tsv", "nice day\tpos\nbad day\tneg\n");
  CHECK(load_labeled_texts(tsv.string()).content_hash() == ds.content_hash());
}

TEST_CASE("missing files raise IoError") {
  CHECK_THROWS_AS((void)load_conll("/nonexistent/x.conll"), IoError);
  CHECK_THROWS_AS((void)load_pairs("/nonexistent/x.jsonl"), IoError);
}
