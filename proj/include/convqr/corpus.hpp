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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace convqr {

// Dense index of a passage inside a Corpus. Corpora are kept sorted by
// passage id, so ascending DocIndex is ascending passage id.
using DocIndex = std::uint32_t;

enum class Role { user, agent };

std::string_view role_name(Role role);

struct Utterance {
  Role role = Role::user;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

// A conversation. `rewrites` and `gold` are keyed by the 0-based position of
// the user turn inside `turns`.
struct Dialogue {
  std::string id;
  std::vector<Utterance> turns;
  std::map<std::size_t, std::string> rewrites;
  std::map<std::size_t, std::vector<std::string>> gold;
  std::string subset;

  bool operator==(const Dialogue&) const = default;
};

// One rewriting instance: context u_1..u_{n-1}, question u_n, answer u_{n+1}.
struct ExampleRecord {
  std::string dialogue_id;
  std::size_t turn_index = 0;       // position of the question in Dialogue::turns
  std::size_t question_number = 1;  // 1-based count of user questions so far
  std::vector<Utterance> context;
  std::string question;
  std::string answer;  // empty when the dialogue ends on the question
  std::optional<std::string> human_rewrite;
  std::vector<std::string> gold;  // empty = no gold label
  std::string subset;

  // "<dialogue id>_<question number>"
  std::string id() const;
};

std::string make_example_id(std::string_view dialogue_id, std::size_t question_number);

// Throws ValidationError naming the dialogue when roles do not alternate
// starting with the user, or a turn is blank.
void validate_dialogue(const Dialogue& d);

Dialogue parse_dialogue(std::string_view json_line, std::size_t line_number);
std::string serialize_dialogue(const Dialogue& d);

std::vector<Dialogue> load_dialogues(const std::string& path);
void write_dialogues(const std::string& path, std::span<const Dialogue> dialogues);

// One record per user turn. With replace_first_with_rewrite set, the first
// question is replaced by its human rewrite when one exists; otherwise
// *missing_rewrites (if given) is incremented.
std::vector<ExampleRecord> explode_examples(const Dialogue& d, bool replace_first_with_rewrite,
                                            std::size_t* missing_rewrites = nullptr);
std::vector<ExampleRecord> explode_all(std::span<const Dialogue> dialogues,
                                       bool replace_first_with_rewrite,
                                       std::size_t* missing_rewrites = nullptr);

inline constexpr std::size_t kMaxContextTokens = 384;
inline constexpr std::string_view kSeparator = " [SEP] ";

// u_n [SEP] u_{n-1} [SEP] ... [SEP] u_1, cut after max_tokens tokens so the
// most distant context goes first. Separators are not counted. u_n is always
// kept whole, even when it is longer than max_tokens.
std::string build_context_string(const ExampleRecord& example,
                                 std::size_t max_tokens = kMaxContextTokens);

struct Passage {
  std::string id;
  std::string doc_id;
  std::string text;

  bool operator==(const Passage&) const = default;
};

// Immutable passage store sorted by id.
class Corpus {
 public:
  Corpus() = default;
  // Sorts by id; throws ValidationError on duplicate or empty ids/doc ids.
  explicit Corpus(std::vector<Passage> passages);

  std::size_t size() const { return passages_.size(); }
  bool empty() const { return passages_.empty(); }
  const Passage& operator[](DocIndex i) const { return passages_[i]; }
  std::span<const Passage> passages() const { return passages_; }

  std::optional<DocIndex> find(std::string_view id) const;
  // Throws ValidationError for unknown ids.
  DocIndex at(std::string_view id) const;

 private:
  std::vector<Passage> passages_;
  std::unordered_map<std::string, DocIndex> by_id_;
};

Corpus load_passages(const std::string& path);
void write_passages(const std::string& path, const Corpus& corpus);

// Writes `content` to `path` through a temporary file and a rename, so a
// failed command never leaves a half-written artifact behind.
void write_file_atomic(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

// Splits file content into lines (without terminators), keeping empty lines
// so that line numbers stay meaningful.
std::vector<std::string_view> split_lines(std::string_view content);

}  // namespace convqr
