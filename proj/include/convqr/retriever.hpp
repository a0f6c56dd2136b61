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

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "convqr/corpus.hpp"
#include "convqr/text.hpp"

namespace convqr {

inline constexpr std::size_t kMaxQueryTokens = 128;
inline constexpr std::size_t kMaxPassageTokens = 2000;

// Retrieval analyzer: content tokens, truncated to `limit` (0 = no limit).
text::TokenSeq analyze(std::string_view text, std::size_t limit);

struct Hit {
  DocIndex doc = 0;
  double score = 0.0;

  bool operator==(const Hit&) const = default;
};

// Ranking order shared by every retriever: score descending, then passage
// id ascending (DocIndex order).
inline bool ranks_before(const Hit& a, const Hit& b) {
  return a.score > b.score || (a.score == b.score && a.doc < b.doc);
}

// Sorts and keeps the best k hits.
std::vector<Hit> select_top_k(std::vector<Hit> hits, std::size_t k);

// Black-box retriever contract: a query string and a candidate set in, a
// ranked list of at most k passages out.
class Retriever {
 public:
  virtual ~Retriever() = default;

  virtual std::string_view kind() const = 0;
  virtual std::size_t size() const = 0;
  virtual const std::string& passage_id(DocIndex doc) const = 0;

  // Score of every passage, indexed by DocIndex.
  virtual std::vector<double> score_all(std::string_view query) const = 0;
  // Scores for the given passages, in the given order.
  virtual std::vector<double> score_some(std::string_view query,
                                         std::span<const DocIndex> docs) const = 0;

  // Full-index retrieval. k must be >= 1.
  std::vector<Hit> retrieve(std::string_view query, std::size_t k) const;
  // Retrieval restricted to `candidates` (duplicates collapsed). Throws on an
  // empty candidate set.
  std::vector<Hit> retrieve(std::string_view query, std::span<const DocIndex> candidates,
                            std::size_t k) const;

  std::optional<DocIndex> find(std::string_view passage_id) const;

 protected:
  void index_ids();

 private:
  std::unordered_map<std::string, DocIndex> by_id_;
};

// Document frequencies and idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1).
class IdfTable {
 public:
  IdfTable() = default;
  // docs: analyzed passages. With skip_stopwords, stopwords get no entry.
  static IdfTable build(std::span<const text::TokenSeq> docs, bool skip_stopwords);

  std::size_t num_docs() const { return num_docs_; }
  std::optional<double> idf(std::string_view term) const;
  double max_idf() const { return max_idf_; }
  std::size_t vocabulary_size() const { return idf_.size(); }

  static double formula(std::size_t num_docs, std::size_t df);

  // Restores a table from persisted (term, df) pairs.
  static IdfTable from_df(std::size_t num_docs,
                          std::vector<std::pair<std::string, std::size_t>> dfs);
  const std::vector<std::pair<std::string, std::size_t>>& sorted_df() const { return sorted_df_; }

 private:
  void finish();

  std::size_t num_docs_ = 0;
  std::vector<std::pair<std::string, std::size_t>> sorted_df_;
  std::unordered_map<std::string, double> idf_;
  double max_idf_ = 0.0;
};

struct Bm25Config {
  double k1 = 0.82;
  double b = 0.68;

  void validate() const;
};

// Okapi BM25 over an inverted index. Immutable after build.
class Bm25Index final : public Retriever {
 public:
  using TermId = std::uint32_t;
  struct Posting {
    DocIndex doc;
    std::uint32_t tf;
    bool operator==(const Posting&) const = default;
  };

  // Throws ValidationError on an empty corpus.
  static Bm25Index build(const Corpus& corpus, Bm25Config config = {});

  std::string_view kind() const override { return "bm25"; }
  std::size_t size() const override { return ids_.size(); }
  const std::string& passage_id(DocIndex doc) const override { return ids_[doc]; }

  std::vector<double> score_all(std::string_view query) const override;
  std::vector<double> score_some(std::string_view query,
                                 std::span<const DocIndex> docs) const override;

  // Okapi sum over query tokens (repeated tokens count repeatedly).
  double score(std::span<const std::string> query, DocIndex doc) const;
  // Same, addressed by passage id; throws ValidationError for unknown ids.
  double score(std::span<const std::string> query, std::string_view passage_id) const;

  const Bm25Config& config() const { return config_; }
  std::size_t num_terms() const { return terms_.size(); }
  std::optional<TermId> term_id(std::string_view term) const;
  const std::string& term(TermId t) const { return terms_[t]; }
  std::span<const Posting> postings(TermId t) const { return postings_[t]; }
  double idf(TermId t) const { return idf_[t]; }
  std::uint32_t doc_length(DocIndex doc) const { return doc_len_[doc]; }
  double avg_length() const { return avg_len_; }
  const IdfTable& idf_table() const { return idf_table_; }

  std::string serialize() const;
  static Bm25Index deserialize(std::string_view content);

 private:
  Bm25Index() = default;
  void finish();
  std::uint32_t tf(TermId t, DocIndex doc) const;

  Bm25Config config_;
  std::vector<std::string> ids_;
  std::vector<std::string> terms_;  // sorted
  std::unordered_map<std::string, TermId> term_ids_;
  std::vector<std::vector<Posting>> postings_;  // sorted by doc
  std::vector<std::uint32_t> doc_len_;
  std::vector<double> idf_;
  double avg_len_ = 0.0;
  IdfTable idf_table_;
};

inline constexpr std::size_t kDefaultDenseDim = 256;

// Bucket and sign of a token under the feature hash.
std::size_t hash_bucket(std::string_view token, std::size_t dim);
double hash_sign(std::string_view token);

// Signed, idf-weighted hashed bag of words, L2-normalized. Stopwords,
// punctuation and terms unknown to `idf` are skipped; if nothing remains the
// result is the zero vector. Throws ValidationError when dim < 16.
std::vector<double> hashed_embed(std::string_view text, std::size_t dim, const IdfTable& idf);

// Deterministic dense stand-in: cosine similarity of hashed embeddings.
class DenseIndex final : public Retriever {
 public:
  static DenseIndex build(const Corpus& corpus, std::size_t dim = kDefaultDenseDim);

  std::string_view kind() const override { return "dense"; }
  std::size_t size() const override { return ids_.size(); }
  const std::string& passage_id(DocIndex doc) const override { return ids_[doc]; }

  std::vector<double> score_all(std::string_view query) const override;
  std::vector<double> score_some(std::string_view query,
                                 std::span<const DocIndex> docs) const override;

  std::size_t dim() const { return dim_; }
  std::span<const double> vector(DocIndex doc) const {
    return std::span<const double>(vectors_).subspan(std::size_t{doc} * dim_, dim_);
  }
  std::vector<double> embed(std::string_view text) const;
  const IdfTable& idf_table() const { return idf_; }

  std::string serialize() const;
  static DenseIndex deserialize(std::string_view content);

 private:
  DenseIndex() = default;
  double dot(std::span<const double> q, DocIndex doc) const;

  std::size_t dim_ = kDefaultDenseDim;
  std::vector<std::string> ids_;
  std::vector<double> vectors_;
  IdfTable idf_;
};

enum class RetrieverKind { bm25, dense };

RetrieverKind parse_retriever_kind(std::string_view name);
std::unique_ptr<Retriever> build_retriever(const Corpus& corpus, RetrieverKind kind,
                                           std::size_t dense_dim = kDefaultDenseDim);

// Index files are line-based text starting with "convqr-index 1 <kind>".
void save_index(const Retriever& retriever, const std::string& path);
std::unique_ptr<Retriever> load_index(const std::string& path);

}  // namespace convqr
