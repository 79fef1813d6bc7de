#include "tplf/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tplf {

namespace {

bool is_bio_tag(const std::string& t) {
  if (t == "O") return true;
  return t.size() > 2 && (t[0] == 'B' || t[0] == 'I') && t[1] == '-';
}

bool is_cluster_tag(const std::string& t) {
  if (t.size() < 2 || t[0] != 'C') return false;
  return std::all_of(t.begin() + 1, t.end(), [](unsigned char c) { return std::isdigit(c); });
}

uint64_t hash_fields(std::initializer_list<const std::string*> fields, uint64_t h) {
  for (const std::string* f : fields) {
    h = fnv1a(f->data(), f->size(), h);
    h = fnv1a("\x1f", 1, h);
  }
  return fnv1a("\x1e", 1, h);
}

}  // namespace

int NerDataset::label_id(const std::string& tag) const {
  auto it = std::find(label_names.begin(), label_names.end(), tag);
  if (it == label_names.end()) throw DataError("unknown tag: " + tag);
  return static_cast<int>(it - label_names.begin());
}

uint64_t NerDataset::content_hash() const {
  uint64_t h = kFnvOffset;
  for (const auto& s : sentences)
    for (size_t i = 0; i < s.words.size(); ++i) h = hash_fields({&s.words[i], &s.tags[i]}, h);
  return h;
}

uint64_t PairDataset::content_hash() const {
  uint64_t h = kFnvOffset;
  for (const auto& p : pairs) h = hash_fields({&p.anchor, &p.positive}, h);
  return h;
}

int LabeledTextDataset::label_id(const std::string& label) const {
  auto it = std::find(label_names.begin(), label_names.end(), label);
  if (it == label_names.end()) throw DataError("unknown label: " + label);
  return static_cast<int>(it - label_names.begin());
}

uint64_t LabeledTextDataset::content_hash() const {
  uint64_t h = kFnvOffset;
  for (const auto& p : items) h = hash_fields({&p.text, &p.label}, h);
  return h;
}

std::vector<std::string> split_whitespace(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

NerDataset load_conll(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  NerDataset ds;
  NerSentence cur;
  std::string line;
  int line_no = 0;
  bool scheme_known = false;
  auto flush = [&]() {
    if (!cur.words.empty()) {
      ds.sentences.push_back(std::move(cur));
      cur = {};
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    if (trimmed.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (trimmed.rfind("-DOCSTART-", 0) == 0) continue;
    auto cols = split_whitespace(trimmed);
    if (cols.size() < 2)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected token and tag columns");
    const std::string& token = cols.front();
    const std::string& tag = cols.back();
    bool bio = is_bio_tag(tag), cluster = is_cluster_tag(tag);
    if (!bio && !cluster)
      throw DataError(path + ":" + std::to_string(line_no) + ": unknown tag scheme for '" + tag + "'");
    if (!scheme_known) {
      ds.scheme = bio ? TagScheme::kBio : TagScheme::kCluster;
      scheme_known = true;
    } else if ((ds.scheme == TagScheme::kBio) != bio) {
      throw DataError(path + ":" + std::to_string(line_no) + ": mixed tag schemes");
    }
    cur.words.push_back(token);
    cur.tags.push_back(tag);
  }
  flush();
  if (ds.sentences.empty()) throw DataError(path + ": empty dataset");
  for (const auto& s : ds.sentences)
    for (const auto& t : s.tags)
      if (std::find(ds.label_names.begin(), ds.label_names.end(), t) == ds.label_names.end())
        ds.label_names.push_back(t);
  return ds;
}

void save_conll(const NerDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& s : ds.sentences) {
    for (size_t i = 0; i < s.words.size(); ++i) out << s.words[i] << " " << s.tags[i] << "\n";
    out << "\n";
  }
}

PairDataset load_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  PairDataset ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    TextPair p;
    if (line.front() == '{') {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("anchor") || !j.contains("positive"))
        throw DataError(path + ":" + std::to_string(line_no) + ": expected anchor/positive fields");
      p.anchor = j["anchor"].get<std::string>();
      p.positive = j["positive"].get<std::string>();
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError(path + ":" + std::to_string(line_no) + ": expected 2-column TSV");
      p.anchor = line.substr(0, tab);
      p.positive = line.substr(tab + 1);
    }
    if (p.anchor.empty() || p.positive.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty anchor or positive");
    ds.pairs.push_back(std::move(p));
  }
  if (ds.pairs.empty()) throw DataError(path + ": empty dataset");
  return ds;
}

void save_pairs_jsonl(const PairDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& p : ds.pairs) {
    nlohmann::json j{{"anchor", p.anchor}, {"positive", p.positive}};
    out << j.dump() << "\n";
  }
}

void save_pairs_tsv(const PairDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& p : ds.pairs) out << p.anchor << "\t" << p.positive << "\n";
}

LabeledTextDataset load_labeled_texts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  LabeledTextDataset ds;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    LabeledText item;
    if (line.front() == '{') {
      nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("text") || !j.contains("label"))
        throw DataError(path + ":" + std::to_string(line_no) + ": expected text/label fields");
      item.text = j["text"].get<std::string>();
      item.label = j["label"].get<std::string>();
    } else {
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw DataError(path + ":" + std::to_string(line_no) + ": expected 2-column TSV");
      item.text = line.substr(0, tab);
      item.label = line.substr(tab + 1);
    }
    if (item.text.empty() || item.label.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": empty text or label");
    ds.items.push_back(std::move(item));
  }
  if (ds.items.empty()) throw DataError(path + ": empty dataset");
  for (const auto& item : ds.items)
    if (std::find(ds.label_names.begin(), ds.label_names.end(), item.label) == ds.label_names.end())
      ds.label_names.push_back(item.label);
  return ds;
}

void save_labeled_texts_jsonl(const LabeledTextDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& item : ds.items) {
    nlohmann::json j{{"text", item.text}, {"label", item.label}};
    out << j.dump() << "\n";
  }
}

}  // namespace tplf
