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

#include "convqr/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "convqr/error.hpp"
#include "convqr/text.hpp"

namespace convqr {

using ojson = nlohmann::ordered_json;

namespace {

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  });
}

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw ValidationError("line " + std::to_string(line) + ": " + what);
}

std::size_t parse_turn_key(const std::string& key, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), value);
  if (ec != std::errc() || ptr != key.data() + key.size() || key.empty())
    line_error(line, "turn index key '" + key + "' is not a non-negative integer");
  return value;
}

const ojson& require(const ojson& obj, const char* field, std::size_t line) {
  auto it = obj.find(field);
  if (it == obj.end()) line_error(line, std::string("missing field '") + field + "'");
  return *it;
}

std::string require_string(const ojson& obj, const char* field, std::size_t line) {
  const auto& v = require(obj, field, line);
  if (!v.is_string()) line_error(line, std::string("field '") + field + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

std::string_view role_name(Role role) { return role == Role::user ? "user" : "agent"; }

std::string make_example_id(std::string_view dialogue_id, std::size_t question_number) {
  std::string id(dialogue_id);
  id += '_';
  id += std::to_string(question_number);
  return id;
}

std::string ExampleRecord::id() const { return make_example_id(dialogue_id, question_number); }

void validate_dialogue(const Dialogue& d) {
  if (d.id.empty() || has_space(d.id))
    throw ValidationError("dialogue id '" + d.id + "' must be non-empty without whitespace");
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const Role expected = (i % 2 == 0) ? Role::user : Role::agent;
    if (d.turns[i].role != expected)
      throw ValidationError("dialogue " + d.id + ": turn " + std::to_string(i) + " should be " +
                            std::string(role_name(expected)) + " (roles must alternate, user first)");
    if (text::trim(d.turns[i].text).empty())
      throw ValidationError("dialogue " + d.id + ": turn " + std::to_string(i) + " is blank");
  }
  auto check_key = [&](std::size_t key, const char* what) {
    if (key >= d.turns.size() || key % 2 != 0)
      throw ValidationError("dialogue " + d.id + ": " + what + " key " + std::to_string(key) +
                            " does not name a user turn");
  };
  for (const auto& [k, v] : d.rewrites) check_key(k, "rewrite");
  for (const auto& [k, ids] : d.gold) {
    check_key(k, "gold");
    for (const auto& id : ids)
      if (id.empty() || has_space(id))
        throw ValidationError("dialogue " + d.id + ": invalid gold passage id '" + id + "'");
  }
}

Dialogue parse_dialogue(std::string_view json_line, std::size_t line) {
  ojson j;
  try {
    j = ojson::parse(json_line);
  } catch (const nlohmann::json::parse_error& e) {
    line_error(line, std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) line_error(line, "record must be a JSON object");

  Dialogue d;
  d.id = require_string(j, "id", line);
  const auto& turns = require(j, "turns", line);
  if (!turns.is_array()) line_error(line, "field 'turns' must be an array");
  for (const auto& t : turns) {
    if (!t.is_object()) line_error(line, "turn must be an object");
    Utterance u;
    const std::string role = require_string(t, "role", line);
    if (role == "user") {
      u.role = Role::user;
    } else if (role == "agent") {
      u.role = Role::agent;
    } else {
      line_error(line, "unknown role '" + role + "'");
    }
    u.text = require_string(t, "text", line);
    d.turns.push_back(std::move(u));
  }
  if (auto it = j.find("rewrites"); it != j.end()) {
    if (!it->is_object()) line_error(line, "field 'rewrites' must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_string()) line_error(line, "rewrite values must be strings");
      d.rewrites[parse_turn_key(key, line)] = value.get<std::string>();
    }
  }
  if (auto it = j.find("gold"); it != j.end()) {
    if (!it->is_object()) line_error(line, "field 'gold' must be an object");
    for (const auto& [key, value] : it->items()) {
      if (!value.is_array()) line_error(line, "gold values must be arrays of passage ids");
      auto& ids = d.gold[parse_turn_key(key, line)];
      for (const auto& id : value) {
        if (!id.is_string()) line_error(line, "gold passage ids must be strings");
        ids.push_back(id.get<std::string>());
      }
    }
  }
  if (auto it = j.find("subset"); it != j.end()) {
    if (!it->is_string()) line_error(line, "field 'subset' must be a string");
    d.subset = it->get<std::string>();
  }
  try {
    validate_dialogue(d);
  } catch (const ValidationError& e) {
    line_error(line, e.what());
  }
  return d;
}

std::string serialize_dialogue(const Dialogue& d) {
  ojson j;
  j["id"] = d.id;
  j["turns"] = ojson::array();
  for (const auto& u : d.turns) {
    ojson t;
    t["role"] = std::string(role_name(u.role));
    t["text"] = u.text;
    j["turns"].push_back(std::move(t));
  }
  j["rewrites"] = ojson::object();
  for (const auto& [k, v] : d.rewrites) j["rewrites"][std::to_string(k)] = v;
  j["gold"] = ojson::object();
  for (const auto& [k, ids] : d.gold) j["gold"][std::to_string(k)] = ids;
  j["subset"] = d.subset;
  return j.dump();
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  while (!content.empty()) {
    auto nl = content.find('\n');
    std::string_view line = content.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    content.remove_prefix(nl + 1);
  }
  return lines;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw RuntimeError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw RuntimeError("cannot move '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

std::vector<Dialogue> load_dialogues(const std::string& path) {
  const std::string content = read_file(path);
  std::vector<Dialogue> out;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    out.push_back(parse_dialogue(line, line_no));
  }
  return out;
}

void write_dialogues(const std::string& path, std::span<const Dialogue> dialogues) {
  std::string content;
  for (const auto& d : dialogues) {
    content += serialize_dialogue(d);
    content += '\n';
  }
  write_file_atomic(path, content);
}

std::vector<ExampleRecord> explode_examples(const Dialogue& d, bool replace_first_with_rewrite,
                                            std::size_t* missing_rewrites) {
  std::vector<ExampleRecord> out;
  std::size_t question_number = 0;
  for (std::size_t i = 0; i < d.turns.size(); i += 2) {
    ++question_number;
    ExampleRecord e;
    e.dialogue_id = d.id;
    e.turn_index = i;
    e.question_number = question_number;
    e.context.assign(d.turns.begin(), d.turns.begin() + static_cast<std::ptrdiff_t>(i));
    e.question = d.turns[i].text;
    if (i + 1 < d.turns.size()) e.answer = d.turns[i + 1].text;
    if (auto it = d.rewrites.find(i); it != d.rewrites.end()) e.human_rewrite = it->second;
    if (auto it = d.gold.find(i); it != d.gold.end()) e.gold = it->second;
    e.subset = d.subset;
    if (i == 0 && replace_first_with_rewrite) {
      if (e.human_rewrite) {
        e.question = *e.human_rewrite;
      } else if (missing_rewrites) {
        ++*missing_rewrites;
      }
    }
    out.push_back(std::move(e));
  }
  // Later examples see the (possibly replaced) first question in context.
  if (replace_first_with_rewrite && !out.empty()) {
    for (std::size_t k = 1; k < out.size(); ++k) out[k].context[0].text = out[0].question;
  }
  return out;
}

std::vector<ExampleRecord> explode_all(std::span<const Dialogue> dialogues,
                                       bool replace_first_with_rewrite,
                                       std::size_t* missing_rewrites) {
  std::vector<ExampleRecord> out;
  for (const auto& d : dialogues) {
    auto ex = explode_examples(d, replace_first_with_rewrite, missing_rewrites);
    std::move(ex.begin(), ex.end(), std::back_inserter(out));
  }
  return out;
}

std::string build_context_string(const ExampleRecord& example, std::size_t max_tokens) {
  std::string out = example.question;
  std::size_t used = text::tokenize_with_offsets(example.question).size();
  for (auto it = example.context.rbegin(); it != example.context.rend(); ++it) {
    if (used >= max_tokens) break;
    const auto tokens = text::tokenize_with_offsets(it->text);
    if (tokens.empty()) continue;
    const std::size_t room = max_tokens - used;
    out += kSeparator;
    if (tokens.size() <= room) {
      out += text::trim(it->text);
      used += tokens.size();
    } else {
      const auto& last = tokens[room - 1];
      out += it->text.substr(tokens.front().begin, last.end - tokens.front().begin);
      used = max_tokens;
    }
  }
  return out;
}

Corpus::Corpus(std::vector<Passage> passages) : passages_(std::move(passages)) {
  std::sort(passages_.begin(), passages_.end(),
            [](const Passage& a, const Passage& b) { return a.id < b.id; });
  by_id_.reserve(passages_.size());
  for (std::size_t i = 0; i < passages_.size(); ++i) {
    const auto& p = passages_[i];
    if (p.id.empty() || has_space(p.id))
      throw ValidationError("passage id '" + p.id + "' must be non-empty without whitespace");
    if (p.doc_id.empty()) throw ValidationError("passage " + p.id + " has an empty doc_id");
    if (!by_id_.emplace(p.id, static_cast<DocIndex>(i)).second)
      throw ValidationError("duplicate passage id '" + p.id + "'");
  }
}

std::optional<DocIndex> Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

DocIndex Corpus::at(std::string_view id) const {
  auto found = find(id);
  if (!found) throw ValidationError("unknown passage id '" + std::string(id) + "'");
  return *found;
}

Corpus load_passages(const std::string& path) {
  const std::string content = read_file(path);
  std::vector<Passage> passages;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      line_error(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) line_error(line_no, "record must be a JSON object");
    Passage p;
    p.id = require_string(j, "id", line_no);
    p.doc_id = require_string(j, "doc_id", line_no);
    p.text = require_string(j, "text", line_no);
    passages.push_back(std::move(p));
  }
  return Corpus(std::move(passages));
}

void write_passages(const std::string& path, const Corpus& corpus) {
  std::string content;
  for (const auto& p : corpus.passages()) {
    ojson j;
    j["id"] = p.id;
    j["doc_id"] = p.doc_id;
    j["text"] = p.text;
    content += j.dump();
    content += '\n';
  }
  write_file_atomic(path, content);
}

}  // namespace convqr
