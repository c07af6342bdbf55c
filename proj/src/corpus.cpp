#include "tvq/corpus.hpp"

#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "tvq/binio.hpp"
#include "tvq/errors.hpp"
#include "tvq/hash.hpp"

namespace tvq {

using nlohmann::json;

std::uint64_t Vocabulary::content_hash() const {
  Fnv1a h;
  for (const auto& t : tokens) {
    h.update(t);
    h.update("\n", 1);
  }
  return h.digest();
}

std::int64_t WordHistogram::total() const {
  std::int64_t t = 0;
  for (int c : counts) t += c;
  return t;
}

Vocabulary load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::unordered_set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": empty token line");
    }
    if (!seen.insert(line).second) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": duplicate token '" + line + "'");
    }
    vocab.tokens.push_back(line);
  }
  if (vocab.tokens.empty()) throw FormatError(path + ": vocabulary is empty");
  return vocab;
}

void save_vocab(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& t : vocab.tokens) out << t << "\n";
  if (!out) throw FormatError("write failed: " + path);
}

Corpus load_corpus(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open corpus file: " + path);
  Corpus corpus;
  std::unordered_map<std::string, int> label_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("tokens") || !j["tokens"].is_array()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected {\"id\", \"tokens\", ...}");
    }
    Document doc;
    doc.id = j["id"].get<std::string>();
    for (const auto& t : j["tokens"]) {
      if (!t.is_number_unsigned()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": token ids must be unsigned integers");
      }
      auto id = t.get<std::uint64_t>();
      if (id >= static_cast<std::uint64_t>(vocab.size())) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": token id " + std::to_string(id) +
                          " out of range for vocabulary of size " + std::to_string(vocab.size()));
      }
      doc.tokens.push_back(static_cast<int>(id));
    }
    if (j.contains("label") && !j["label"].is_null()) {
      std::string name = j["label"].get<std::string>();
      auto it = label_ids.find(name);
      if (it == label_ids.end()) {
        it = label_ids.emplace(name, static_cast<int>(corpus.label_names.size())).first;
        corpus.label_names.push_back(name);
      }
      doc.label = it->second;
    }
    corpus.documents.push_back(std::move(doc));
  }
  if (corpus.documents.empty()) throw FormatError(path + ": corpus has no documents");
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  for (const auto& doc : corpus.documents) {
    json j;
    j["id"] = doc.id;
    j["tokens"] = doc.tokens;
    if (doc.label) j["label"] = corpus.label_names[static_cast<std::size_t>(*doc.label)];
    out << j.dump() << "\n";
  }
  if (!out) throw FormatError("write failed: " + path);
}

void save_encoded_corpus(const EncodedCorpus& enc, const std::string& path,
                         const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  json header;
  header["n_codes"] = enc.n_codes;
  header["n_words"] = enc.n_words;
  header["expansion"] = enc.expansion;
  header["vocab_hash"] = hash_to_hex(enc.vocab_hash);
  header["codebook_hash"] = hash_to_hex(enc.codebook_hash);
  header["label_names"] = enc.label_names;
  if (!config_echo.empty()) header["config"] = config_echo;
  out << header.dump() << "\n";
  for (const auto& doc : enc.docs) {
    json j;
    j["id"] = doc.id;
    j["c"] = doc.code_counts;
    j["v"] = doc.word_counts;
    if (doc.label) j["label"] = enc.label_names[static_cast<std::size_t>(*doc.label)];
    if (doc.skipped) j["skipped"] = true;
    out << j.dump() << "\n";
  }
  if (!out) throw FormatError("write failed: " + path);
}

EncodedCorpus load_encoded_corpus(const std::string& path, std::string* config_echo) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open encoded corpus file: " + path);
  std::string line;
  int line_no = 0;
  auto parse_line = [&](const std::string& text) -> json {
    try {
      return json::parse(text);
    } catch (const json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
  };

  EncodedCorpus enc;
  if (!std::getline(in, line)) throw FormatError(path + ": missing header line");
  ++line_no;
  json header = parse_line(line);
  if (!header.is_object() || !header.contains("n_codes") || !header.contains("n_words") ||
      !header.contains("expansion") || !header.contains("vocab_hash") || !header.contains("codebook_hash")) {
    throw FormatError(path + ":1: header must carry n_codes, n_words, expansion and hashes");
  }
  enc.n_codes = header["n_codes"].get<int>();
  enc.n_words = header["n_words"].get<int>();
  enc.expansion = header["expansion"].get<int>();
  enc.vocab_hash = std::stoull(header["vocab_hash"].get<std::string>(), nullptr, 16);
  enc.codebook_hash = std::stoull(header["codebook_hash"].get<std::string>(), nullptr, 16);
  if (header.contains("label_names")) {
    enc.label_names = header["label_names"].get<std::vector<std::string>>();
  }
  if (config_echo) *config_echo = header.contains("config") ? header["config"].get<std::string>() : "";
  if (enc.n_codes < 1 || enc.n_words < 1 || enc.expansion < 1) {
    throw FormatError(path + ":1: header dimensions must be positive");
  }

  std::unordered_map<std::string, int> label_ids;
  for (std::size_t i = 0; i < enc.label_names.size(); ++i) {
    label_ids[enc.label_names[i]] = static_cast<int>(i);
  }
  auto read_counts = [&](const json& arr, int expected, const char* what) {
    std::vector<int> counts;
    if (!arr.is_array() || static_cast<int>(arr.size()) != expected) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": '" + what + "' must be an array of length " +
                        std::to_string(expected));
    }
    counts.reserve(arr.size());
    for (const auto& v : arr) {
      if (!v.is_number_unsigned()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": counts must be non-negative integers");
      }
      counts.push_back(v.get<int>());
    }
    return counts;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = parse_line(line);
    if (!j.is_object() || !j.contains("id") || !j.contains("c") || !j.contains("v")) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected {\"id\", \"c\", \"v\", ...}");
    }
    EncodedDocument doc;
    doc.id = j["id"].get<std::string>();
    doc.code_counts = read_counts(j["c"], enc.n_codes, "c");
    doc.word_counts = read_counts(j["v"], enc.n_words, "v");
    if (j.contains("label") && !j["label"].is_null()) {
      std::string name = j["label"].get<std::string>();
      auto it = label_ids.find(name);
      if (it == label_ids.end()) {
        throw FormatError(path + ":" + std::to_string(line_no) + ": label '" + name + "' missing from header");
      }
      doc.label = it->second;
    }
    if (j.contains("skipped")) doc.skipped = j["skipped"].get<bool>();
    enc.docs.push_back(std::move(doc));
  }
  if (enc.docs.empty()) throw FormatError(path + ": no documents after header");
  return enc;
}

namespace {
constexpr char kEmbeddingMagic[4] = {'T', 'V', 'Q', 'E'};
constexpr std::uint32_t kEmbeddingVersion = 1;
}  // namespace

EmbeddingTable load_embeddings(const std::string& path, const Vocabulary& vocab) {
  BinReader r(path);
  r.expect_magic(kEmbeddingMagic, "TVQE embedding");
  std::uint32_t version = r.u32();
  if (version != kEmbeddingVersion) {
    throw FormatError(path + ": unsupported embedding format version " + std::to_string(version));
  }
  std::uint32_t count = r.u32();
  std::uint32_t dim = r.u32();
  if (count != static_cast<std::uint32_t>(vocab.size())) {
    throw CompatibilityError(path + ": row count " + std::to_string(count) +
                             " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  if (dim == 0) throw FormatError(path + ": zero embedding dimension");
  EmbeddingTable table;
  table.dim = static_cast<int>(dim);
  table.rows = Tensor({static_cast<int>(count), static_cast<int>(dim)});
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t d = 0; d < dim; ++d) {
      table.rows.at(static_cast<int>(i), static_cast<int>(d)) = static_cast<double>(r.f32());
    }
  }
  if (!table.rows.all_finite()) throw FormatError(path + ": non-finite embedding entries");
  return table;
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  BinWriter w(path);
  w.magic(kEmbeddingMagic);
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(table.count()));
  w.u32(static_cast<std::uint32_t>(table.dim));
  for (int i = 0; i < table.count(); ++i) {
    for (int d = 0; d < table.dim; ++d) w.f32(static_cast<float>(table.rows.at(i, d)));
  }
  w.close();
}

WordHistogram word_histogram(const Document& doc, const Vocabulary& vocab) {
  WordHistogram h;
  h.counts.assign(static_cast<std::size_t>(vocab.size()), 0);
  for (int t : doc.tokens) {
    if (t < 0 || t >= vocab.size()) throw DimensionError("word_histogram: token id out of range");
    h.counts[static_cast<std::size_t>(t)] += 1;
  }
  return h;
}

}  // namespace tvq
