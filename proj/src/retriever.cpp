// Copyright 2026 The convqr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "convqr/retriever.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "convqr/error.hpp"
#include "convqr/rng.hpp"

namespace convqr {

namespace {

constexpr std::string_view kIndexMagic = "convqr-index";
constexpr int kIndexVersion = 1;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Minimal whitespace-token reader for the index format.
class Reader {
 public:
  explicit Reader(std::string_view content) : lines_(split_lines(content)) {}

  std::vector<std::string_view> next_line() {
    while (pos_ < lines_.size()) {
      auto line = lines_[pos_++];
      if (text::trim(line).empty()) continue;
      std::vector<std::string_view> fields;
      std::size_t i = 0;
      while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ') ++j;
        if (j > i) fields.push_back(line.substr(i, j - i));
        i = j;
      }
      return fields;
    }
    fail("unexpected end of file");
  }

  std::vector<std::string_view> expect(std::string_view key, std::size_t n_values) {
    auto f = next_line();
    if (f.empty() || f[0] != key || f.size() != n_values + 1)
      fail("expected '" + std::string(key) + "' record");
    return f;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("index file line " + std::to_string(pos_) + ": " + what);
  }

  std::size_t to_size(std::string_view s) const {
    std::size_t v = 0;
    for (char c : s) {
      if (c < '0' || c > '9') fail("expected an integer, got '" + std::string(s) + "'");
      v = v * 10 + static_cast<std::size_t>(c - '0');
    }
    if (s.empty()) fail("expected an integer");
    return v;
  }

  double to_double(std::string_view s) const {
    std::string tmp(s);
    char* end = nullptr;
    double v = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size()) fail("expected a number, got '" + tmp + "'");
    return v;
  }

 private:
  std::vector<std::string_view> lines_;
  std::size_t pos_ = 0;
};

void check_header(Reader& r, std::string_view kind) {
  auto f = r.next_line();
  if (f.size() != 3 || f[0] != kIndexMagic) r.fail("not a convqr index file");
  if (r.to_size(f[1]) != kIndexVersion) r.fail("unsupported index version " + std::string(f[1]));
  if (f[2] != kind) r.fail("index holds '" + std::string(f[2]) + "', expected '" + std::string(kind) + "'");
}

std::vector<text::TokenSeq> analyze_corpus(const Corpus& corpus) {
  std::vector<text::TokenSeq> docs;
  docs.reserve(corpus.size());
  for (const auto& p : corpus.passages()) docs.push_back(analyze(p.text, kMaxPassageTokens));
  return docs;
}

}  // namespace

text::TokenSeq analyze(std::string_view text, std::size_t limit) {
  auto tokens = text::content_tokens(text);
  if (limit != 0 && tokens.size() > limit) tokens.resize(limit);
  return tokens;
}

std::vector<Hit> select_top_k(std::vector<Hit> hits, std::size_t k) {
  if (k < hits.size()) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                      ranks_before);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), ranks_before);
  }
  return hits;
}

// ---------------------------------------------------------------------------
// Retriever

std::vector<Hit> Retriever::retrieve(std::string_view query, std::size_t k) const {
  if (k == 0) throw ValidationError("retrieve: k must be at least 1");
  const auto scores = score_all(query);
  std::vector<Hit> hits(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) hits[i] = {static_cast<DocIndex>(i), scores[i]};
  return select_top_k(std::move(hits), k);
}

std::vector<Hit> Retriever::retrieve(std::string_view query, std::span<const DocIndex> candidates,
                                     std::size_t k) const {
  if (k == 0) throw ValidationError("retrieve: k must be at least 1");
  if (candidates.empty()) throw ValidationError("retrieve: empty candidate set");
  std::vector<DocIndex> docs(candidates.begin(), candidates.end());
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  if (docs.back() >= size()) throw ValidationError("retrieve: candidate outside the index");
  const auto scores = score_some(query, docs);
  std::vector<Hit> hits(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) hits[i] = {docs[i], scores[i]};
  return select_top_k(std::move(hits), k);
}

std::optional<DocIndex> Retriever::find(std::string_view passage_id) const {
  auto it = by_id_.find(std::string(passage_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

void Retriever::index_ids() {
  by_id_.clear();
  for (std::size_t i = 0; i < size(); ++i)
    by_id_.emplace(passage_id(static_cast<DocIndex>(i)), static_cast<DocIndex>(i));
}

// ---------------------------------------------------------------------------
// IdfTable

double IdfTable::formula(std::size_t num_docs, std::size_t df) {
  const double n = static_cast<double>(num_docs);
  const double d = static_cast<double>(df);
  return std::log((n - d + 0.5) / (d + 0.5) + 1.0);
}

IdfTable IdfTable::build(std::span<const text::TokenSeq> docs, bool skip_stopwords) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : docs) {
    std::vector<std::string_view> uniq(doc.begin(), doc.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (auto t : uniq) {
      if (skip_stopwords && text::is_stopword(t)) continue;
      ++df[std::string(t)];
    }
  }
  IdfTable table;
  table.num_docs_ = docs.size();
  table.sorted_df_.assign(df.begin(), df.end());
  table.finish();
  return table;
}

IdfTable IdfTable::from_df(std::size_t num_docs,
                           std::vector<std::pair<std::string, std::size_t>> dfs) {
  IdfTable table;
  table.num_docs_ = num_docs;
  std::sort(dfs.begin(), dfs.end());
  table.sorted_df_ = std::move(dfs);
  table.finish();
  return table;
}

void IdfTable::finish() {
  idf_.clear();
  max_idf_ = 0.0;
  idf_.reserve(sorted_df_.size());
  for (const auto& [term, df] : sorted_df_) {
    const double v = formula(num_docs_, df);
    idf_.emplace(term, v);
    max_idf_ = std::max(max_idf_, v);
  }
}

std::optional<double> IdfTable::idf(std::string_view term) const {
  auto it = idf_.find(std::string(term));
  if (it == idf_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// BM25

void Bm25Config::validate() const {
  if (!(k1 > 0.0)) throw ValidationError("bm25: k1 must be positive");
  if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("bm25: b must lie in [0, 1]");
}

Bm25Index Bm25Index::build(const Corpus& corpus, Bm25Config config) {
  config.validate();
  if (corpus.empty()) throw ValidationError("bm25: cannot index an empty corpus");
  const auto docs = analyze_corpus(corpus);

  std::map<std::string, std::vector<Posting>> postings;
  Bm25Index index;
  index.config_ = config;
  index.doc_len_.reserve(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d) {
    index.ids_.push_back(corpus[static_cast<DocIndex>(d)].id);
    index.doc_len_.push_back(static_cast<std::uint32_t>(docs[d].size()));
    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& t : docs[d]) ++tf[t];
    for (const auto& [t, n] : tf) postings[std::string(t)].push_back({static_cast<DocIndex>(d), n});
  }
  for (auto& [term, list] : postings) {
    index.terms_.push_back(term);
    index.postings_.push_back(std::move(list));
  }
  index.finish();
  return index;
}

void Bm25Index::finish() {
  term_ids_.clear();
  term_ids_.reserve(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) term_ids_.emplace(terms_[t], static_cast<TermId>(t));
  const std::size_t n = ids_.size();
  double total = 0.0;
  for (auto len : doc_len_) total += len;
  avg_len_ = n ? total / static_cast<double>(n) : 0.0;
  idf_.resize(terms_.size());
  std::vector<std::pair<std::string, std::size_t>> dfs;
  dfs.reserve(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    idf_[t] = IdfTable::formula(n, postings_[t].size());
    dfs.emplace_back(terms_[t], postings_[t].size());
  }
  idf_table_ = IdfTable::from_df(n, std::move(dfs));
  index_ids();
}

std::optional<Bm25Index::TermId> Bm25Index::term_id(std::string_view term) const {
  auto it = term_ids_.find(std::string(term));
  if (it == term_ids_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Bm25Index::tf(TermId t, DocIndex doc) const {
  const auto& list = postings_[t];
  auto it = std::lower_bound(list.begin(), list.end(), doc,
                             [](const Posting& p, DocIndex d) { return p.doc < d; });
  return (it != list.end() && it->doc == doc) ? it->tf : 0;
}

double Bm25Index::score(std::span<const std::string> query, DocIndex doc) const {
  const double norm = config_.k1 * (1.0 - config_.b +
                                    config_.b * static_cast<double>(doc_len_[doc]) / avg_len_);
  double s = 0.0;
  for (const auto& q : query) {
    auto t = term_id(q);
    if (!t) continue;
    const double f = tf(*t, doc);
    if (f == 0.0) continue;
    s += idf_[*t] * f * (config_.k1 + 1.0) / (f + norm);
  }
  return s;
}

double Bm25Index::score(std::span<const std::string> query, std::string_view passage_id) const {
  auto doc = find(passage_id);
  if (!doc) throw ValidationError("bm25: unknown passage id '" + std::string(passage_id) + "'");
  return score(query, *doc);
}

std::vector<double> Bm25Index::score_all(std::string_view query) const {
  const auto tokens = analyze(query, kMaxQueryTokens);
  std::vector<double> scores(ids_.size(), 0.0);
  // Term-at-a-time accumulation; each (term, doc) contribution is identical
  // to score() so both paths agree bit for bit.
  for (const auto& q : tokens) {
    auto t = term_id(q);
    if (!t) continue;
    for (const auto& p : postings_[*t]) {
      const double norm = config_.k1 * (1.0 - config_.b +
                                        config_.b * static_cast<double>(doc_len_[p.doc]) / avg_len_);
      const double f = p.tf;
      scores[p.doc] += idf_[*t] * f * (config_.k1 + 1.0) / (f + norm);
    }
  }
  return scores;
}

std::vector<double> Bm25Index::score_some(std::string_view query,
                                          std::span<const DocIndex> docs) const {
  const auto tokens = analyze(query, kMaxQueryTokens);
  std::vector<double> scores;
  scores.reserve(docs.size());
  for (auto d : docs) scores.push_back(score(tokens, d));
  return scores;
}

std::string Bm25Index::serialize() const {
  std::ostringstream out;
  out << kIndexMagic << ' ' << kIndexVersion << " bm25\n";
  out << "k1 " << fmt_double(config_.k1) << '\n';
  out << "b " << fmt_double(config_.b) << '\n';
  out << "docs " << ids_.size() << '\n';
  for (std::size_t d = 0; d < ids_.size(); ++d) out << ids_[d] << ' ' << doc_len_[d] << '\n';
  out << "terms " << terms_.size() << '\n';
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    out << terms_[t] << ' ' << postings_[t].size();
    for (const auto& p : postings_[t]) out << ' ' << p.doc << ':' << p.tf;
    out << '\n';
  }
  return out.str();
}

Bm25Index Bm25Index::deserialize(std::string_view content) {
  Reader r(content);
  check_header(r, "bm25");
  Bm25Index index;
  index.config_.k1 = r.to_double(r.expect("k1", 1)[1]);
  index.config_.b = r.to_double(r.expect("b", 1)[1]);
  index.config_.validate();
  const std::size_t n = r.to_size(r.expect("docs", 1)[1]);
  if (n == 0) r.fail("index has no documents");
  for (std::size_t d = 0; d < n; ++d) {
    auto f = r.next_line();
    if (f.size() != 2) r.fail("expected '<passage id> <length>'");
    index.ids_.emplace_back(f[0]);
    index.doc_len_.push_back(static_cast<std::uint32_t>(r.to_size(f[1])));
  }
  if (!std::is_sorted(index.ids_.begin(), index.ids_.end())) r.fail("passage ids not sorted");
  const std::size_t n_terms = r.to_size(r.expect("terms", 1)[1]);
  for (std::size_t t = 0; t < n_terms; ++t) {
    auto f = r.next_line();
    if (f.size() < 2) r.fail("bad term record");
    const std::size_t df = r.to_size(f[1]);
    if (f.size() != df + 2) r.fail("posting count mismatch for term '" + std::string(f[0]) + "'");
    std::vector<Posting> list;
    for (std::size_t i = 0; i < df; ++i) {
      auto colon = f[i + 2].find(':');
      if (colon == std::string_view::npos) r.fail("bad posting");
      const std::size_t doc = r.to_size(f[i + 2].substr(0, colon));
      if (doc >= n) r.fail("posting references unknown document");
      list.push_back({static_cast<DocIndex>(doc),
                      static_cast<std::uint32_t>(r.to_size(f[i + 2].substr(colon + 1)))});
    }
    index.terms_.emplace_back(f[0]);
    index.postings_.push_back(std::move(list));
  }
  index.finish();
  return index;
}

// ---------------------------------------------------------------------------
// Dense

std::size_t hash_bucket(std::string_view token, std::size_t dim) {
  return static_cast<std::size_t>(fnv1a64(token) % dim);
}

double hash_sign(std::string_view token) {
  return ((mix64(fnv1a64(token)) >> 63) != 0) ? -1.0 : 1.0;
}

std::vector<double> hashed_embed(std::string_view text, std::size_t dim, const IdfTable& idf) {
  if (dim < 16) throw ValidationError("hashed_embed: dim must be at least 16");
  std::vector<double> v(dim, 0.0);
  for (const auto& t : analyze(text, kMaxPassageTokens)) {
    if (text::is_stopword(t)) continue;
    auto w = idf.idf(t);
    if (!w) continue;
    v[hash_bucket(t, dim)] += hash_sign(t) * *w;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : v) x *= inv;
  }
  return v;
}

DenseIndex DenseIndex::build(const Corpus& corpus, std::size_t dim) {
  if (dim < 16) throw ValidationError("dense: dim must be at least 16");
  if (corpus.empty()) throw ValidationError("dense: cannot index an empty corpus");
  const auto docs = analyze_corpus(corpus);
  DenseIndex index;
  index.dim_ = dim;
  index.idf_ = IdfTable::build(docs, /*skip_stopwords=*/true);
  index.vectors_.reserve(corpus.size() * dim);
  for (const auto& p : corpus.passages()) {
    index.ids_.push_back(p.id);
    auto v = hashed_embed(p.text, dim, index.idf_);
    index.vectors_.insert(index.vectors_.end(), v.begin(), v.end());
  }
  index.index_ids();
  return index;
}

std::vector<double> DenseIndex::embed(std::string_view text) const {
  auto query = analyze(text, kMaxQueryTokens);
  return hashed_embed(text::join(query), dim_, idf_);
}

double DenseIndex::dot(std::span<const double> q, DocIndex doc) const {
  const auto v = vector(doc);
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) s += q[i] * v[i];
  return s;
}

std::vector<double> DenseIndex::score_all(std::string_view query) const {
  const auto q = embed(query);
  std::vector<double> scores(ids_.size());
  for (std::size_t d = 0; d < ids_.size(); ++d) scores[d] = dot(q, static_cast<DocIndex>(d));
  return scores;
}

std::vector<double> DenseIndex::score_some(std::string_view query,
                                           std::span<const DocIndex> docs) const {
  const auto q = embed(query);
  std::vector<double> scores;
  scores.reserve(docs.size());
  for (auto d : docs) scores.push_back(dot(q, d));
  return scores;
}

std::string DenseIndex::serialize() const {
  std::ostringstream out;
  out << kIndexMagic << ' ' << kIndexVersion << " dense\n";
  out << "dim " << dim_ << '\n';
  out << "ndocs " << idf_.num_docs() << '\n';
  out << "vocab " << idf_.sorted_df().size() << '\n';
  for (const auto& [term, df] : idf_.sorted_df()) out << term << ' ' << df << '\n';
  out << "docs " << ids_.size() << '\n';
  for (std::size_t d = 0; d < ids_.size(); ++d) {
    const auto v = vector(static_cast<DocIndex>(d));
    std::size_t nnz = 0;
    for (double x : v) nnz += x != 0.0;
    out << ids_[d] << ' ' << nnz;
    for (std::size_t i = 0; i < dim_; ++i)
      if (v[i] != 0.0) out << ' ' << i << ':' << fmt_double(v[i]);
    out << '\n';
  }
  return out.str();
}

DenseIndex DenseIndex::deserialize(std::string_view content) {
  Reader r(content);
  check_header(r, "dense");
  DenseIndex index;
  index.dim_ = r.to_size(r.expect("dim", 1)[1]);
  if (index.dim_ < 16) r.fail("dim must be at least 16");
  const std::size_t ndocs = r.to_size(r.expect("ndocs", 1)[1]);
  const std::size_t vocab = r.to_size(r.expect("vocab", 1)[1]);
  std::vector<std::pair<std::string, std::size_t>> dfs;
  dfs.reserve(vocab);
  for (std::size_t t = 0; t < vocab; ++t) {
    auto f = r.next_line();
    if (f.size() != 2) r.fail("expected '<term> <df>'");
    dfs.emplace_back(std::string(f[0]), r.to_size(f[1]));
  }
  index.idf_ = IdfTable::from_df(ndocs, std::move(dfs));
  const std::size_t n = r.to_size(r.expect("docs", 1)[1]);
  if (n == 0) r.fail("index has no documents");
  index.vectors_.assign(n * index.dim_, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    auto f = r.next_line();
    if (f.size() < 2) r.fail("bad vector record");
    const std::size_t nnz = r.to_size(f[1]);
    if (f.size() != nnz + 2) r.fail("vector entry count mismatch");
    index.ids_.emplace_back(f[0]);
    for (std::size_t i = 0; i < nnz; ++i) {
      auto colon = f[i + 2].find(':');
      if (colon == std::string_view::npos) r.fail("bad vector entry");
      const std::size_t k = r.to_size(f[i + 2].substr(0, colon));
      if (k >= index.dim_) r.fail("vector entry out of range");
      index.vectors_[d * index.dim_ + k] = r.to_double(f[i + 2].substr(colon + 1));
    }
  }
  if (!std::is_sorted(index.ids_.begin(), index.ids_.end())) r.fail("passage ids not sorted");
  index.index_ids();
  return index;
}

// ---------------------------------------------------------------------------

RetrieverKind parse_retriever_kind(std::string_view name) {
  if (name == "bm25") return RetrieverKind::bm25;
  if (name == "dense") return RetrieverKind::dense;
  throw ValidationError("unknown retriever '" + std::string(name) + "' (expected bm25|dense)");
}

std::unique_ptr<Retriever> build_retriever(const Corpus& corpus, RetrieverKind kind,
                                           std::size_t dense_dim) {
  if (kind == RetrieverKind::bm25) return std::make_unique<Bm25Index>(Bm25Index::build(corpus));
  return std::make_unique<DenseIndex>(DenseIndex::build(corpus, dense_dim));
}

void save_index(const Retriever& retriever, const std::string& path) {
  if (auto* bm25 = dynamic_cast<const Bm25Index*>(&retriever)) {
    write_file_atomic(path, bm25->serialize());
  } else if (auto* dense = dynamic_cast<const DenseIndex*>(&retriever)) {
    write_file_atomic(path, dense->serialize());
  } else {
    throw RuntimeError("save_index: unsupported retriever kind");
  }
}

std::unique_ptr<Retriever> load_index(const std::string& path) {
  const std::string content = read_file(path);
  auto first = content.substr(0, content.find('\n'));
  if (first.ends_with(" bm25")) return std::make_unique<Bm25Index>(Bm25Index::deserialize(content));
  if (first.ends_with(" dense")) return std::make_unique<DenseIndex>(DenseIndex::deserialize(content));
  throw ValidationError("'" + path + "' is not a convqr index file");
}

}  // namespace convqr
