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


#include "convqr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "convqr/corpus.hpp"
#include "convqr/error.hpp"
#include "convqr/text.hpp"

namespace convqr {

namespace {

std::vector<std::string_view> fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t b = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > b) out.push_back(line.substr(b, i - b));
  }
  return out;
}

std::size_t parse_count(std::string_view s, const std::string& where) {
  std::size_t v = 0;
  if (s.empty()) throw ValidationError(where + "expected a non-negative integer");
  for (char c : s) {
    if (c < '0' || c > '9') throw ValidationError(where + "bad integer '" + std::string(s) + "'");
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string serialize_run(const RunFile& run) {
  std::string out;
  for (const auto& q : run.queries) {
    std::string text = q.query;
    std::replace_if(
        text.begin(), text.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
    out += "#query\t" + q.example_id + '\t' + text + '\n';
    for (const auto& e : q.ranked) {
      out += q.example_id + " Q0 " + e.passage_id + ' ' + std::to_string(e.rank) + ' ' +
             format_double(e.score) + ' ' + run.tag + '\n';
    }
  }
  return out;
}

RunFile parse_run(std::string_view content) {
  RunFile run;
  std::map<std::string, std::size_t, std::less<>> index;
  auto query_for = [&](std::string_view id) -> RunQuery& {
    auto it = index.find(id);
    if (it != index.end()) return run.queries[it->second];
    index.emplace(std::string(id), run.queries.size());
    run.queries.push_back({std::string(id), {}, {}});
    return run.queries.back();
  };
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    const std::string where = "run line " + std::to_string(line_no) + ": ";
    if (line.rfind("#query\t", 0) == 0) {
      const auto rest = line.substr(7);
      const auto tab = rest.find('\t');
      if (tab == std::string_view::npos) throw ValidationError(where + "malformed query header");
      query_for(rest.substr(0, tab)).query = std::string(rest.substr(tab + 1));
      continue;
    }
    if (text::trim(line).empty()) continue;
    const auto f = fields(line);
    if (f.size() != 6) throw ValidationError(where + "expected 6 fields");
    auto& q = query_for(f[0]);
    RunEntry e;
    e.passage_id = std::string(f[2]);
    e.rank = parse_count(f[3], where);
    try {
      e.score = std::stod(std::string(f[4]));
    } catch (const std::exception&) {
      throw ValidationError(where + "bad score '" + std::string(f[4]) + "'");
    }
    const std::size_t expected = q.ranked.size() + 1;
    if (e.rank != expected)
      throw ValidationError(where + "rank " + std::to_string(e.rank) + " out of order for " +
                            q.example_id);
    if (!q.ranked.empty() && e.score > q.ranked.back().score)
      throw ValidationError(where + "scores must be non-increasing within a query");
    if (run.tag.empty()) run.tag = std::string(f[5]);
    q.ranked.push_back(std::move(e));
  }
  return run;
}

void write_run(const std::string& path, const RunFile& run) {
  write_file_atomic(path, serialize_run(run));
}

RunFile load_run(const std::string& path) { return parse_run(read_file(path)); }

std::string serialize_qrels(const Qrels& qrels) {
  std::string out;
  for (const auto& [id, gold] : qrels) {
    if (gold.empty()) {
      out += id + " 0 NONE 0\n";
      continue;
    }
    for (const auto& p : gold) out += id + " 0 " + p + " 1\n";
  }
  return out;
}

Qrels parse_qrels(std::string_view content) {
  Qrels qrels;
  std::size_t line_no = 0;
  for (auto line : split_lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "qrels line " + std::to_string(line_no) + ": ";
    const auto f = fields(line);
    if (f.size() != 4) throw ValidationError(where + "expected 4 fields");
    auto& gold = qrels[std::string(f[0])];
    if (parse_count(f[3], where) > 0) gold.insert(std::string(f[2]));
  }
  return qrels;
}

void write_qrels(const std::string& path, const Qrels& qrels) {
  write_file_atomic(path, serialize_qrels(qrels));
}

Qrels load_qrels(const std::string& path) { return parse_qrels(read_file(path)); }

double mrr(std::span<const std::string> ranked, const std::set<std::string>& gold,
           std::size_t cutoff) {
  const std::size_t n = std::min(cutoff, ranked.size());
  for (std::size_t i = 0; i < n; ++i)
    if (gold.count(ranked[i])) return 1.0 / static_cast<double>(i + 1);
  return 0.0;
}

double recall_at_k(std::span<const std::string> ranked, const std::set<std::string>& gold,
                   std::size_t k) {
  if (gold.empty()) throw ValidationError("recall: empty gold set");
  const std::size_t n = std::min(k, ranked.size());
  std::set<std::string_view> found;
  for (std::size_t i = 0; i < n; ++i)
    if (gold.count(ranked[i])) found.insert(ranked[i]);
  return static_cast<double>(found.size()) / static_cast<double>(gold.size());
}

std::string_view eval_mode_name(EvalMode mode) {
  return mode == EvalMode::original ? "original" : "updated";
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "original") return EvalMode::original;
  if (name == "updated") return EvalMode::updated;
  throw ValidationError("unknown eval mode '" + std::string(name) + "' (expected original|updated)");
}

namespace {

// Running sums for one group of examples.
struct Accumulator {
  double mrr = 0.0;
  std::vector<double> recall;
  std::size_t n_total = 0;
  std::size_t n_valid = 0;

  MetricSet finish(EvalMode mode, std::span<const std::size_t> ks) const {
    MetricSet m;
    m.n_total = n_total;
    m.n_valid = n_valid;
    const std::size_t denom = mode == EvalMode::original ? n_total : n_valid;
    const double inv = denom == 0 ? 0.0 : 1.0 / static_cast<double>(denom);
    m.mrr = mrr * inv;
    for (std::size_t i = 0; i < ks.size(); ++i) m.recall.emplace_back(ks[i], recall[i] * inv);
    return m;
  }
};

}  // namespace

EvalReport evaluate(const RunFile& run, const Qrels& qrels, EvalMode mode,
                    std::span<const std::size_t> ks,
                    const std::map<std::string, std::string>& subsets) {
  static constexpr std::size_t kDefaultKs[] = {10, 100};
  if (ks.empty()) ks = kDefaultKs;
  for (auto k : ks)
    if (k == 0) throw ValidationError("eval: k must be positive");

  std::vector<std::string> missing;
  for (const auto& q : run.queries)
    if (!qrels.count(q.example_id)) missing.push_back(q.example_id);
  if (!missing.empty()) {
    std::string msg = "eval: " + std::to_string(missing.size()) + " run example(s) missing from qrels:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += ' ' + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }

  Accumulator overall;
  overall.recall.assign(ks.size(), 0.0);
  std::map<std::string, Accumulator> groups;
  for (const auto& q : run.queries) {
    const auto& gold = qrels.at(q.example_id);
    Accumulator* subset = nullptr;
    if (auto it = subsets.find(q.example_id); it != subsets.end() && !it->second.empty()) {
      subset = &groups[it->second];
      if (subset->recall.empty()) subset->recall.assign(ks.size(), 0.0);
    }
    for (Accumulator* a : {&overall, subset}) {
      if (a) ++a->n_total;
    }
    if (gold.empty()) continue;
    std::vector<std::string> ids;
    ids.reserve(q.ranked.size());
    for (const auto& e : q.ranked) ids.push_back(e.passage_id);
    const double rr = mrr(ids, gold);
    std::vector<double> rec(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) rec[i] = recall_at_k(ids, gold, ks[i]);
    for (Accumulator* a : {&overall, subset}) {
      if (!a) continue;
      ++a->n_valid;
      a->mrr += rr;
      for (std::size_t i = 0; i < ks.size(); ++i) a->recall[i] += rec[i];
    }
  }

  EvalReport report;
  report.mode = mode;
  report.tag = run.tag;
  report.overall = overall.finish(mode, ks);
  for (const auto& [name, acc] : groups) report.subsets.emplace(name, acc.finish(mode, ks));
  return report;
}

namespace {

nlohmann::ordered_json metric_json(const EvalReport& r, const std::string& subset,
                                   const MetricSet& m) {
  nlohmann::ordered_json j;
  j["mode"] = std::string(eval_mode_name(r.mode));
  j["tag"] = r.tag;
  j["subset"] = subset;
  j["n_total"] = m.n_total;
  j["n_valid"] = m.n_valid;
  j["mrr"] = m.mrr;
  for (const auto& [k, v] : m.recall) j["recall@" + std::to_string(k)] = v;
  return j;
}

}  // namespace

std::string serialize_report(const EvalReport& report) {
  std::string out = metric_json(report, "all", report.overall).dump() + '\n';
  for (const auto& [name, m] : report.subsets) out += metric_json(report, name, m).dump() + '\n';
  return out;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-16s %8s %8s %8s", "subset", "n_total", "n_valid", "MRR");
  os << "mode: " << eval_mode_name(report.mode) << "  tag: " << report.tag << '\n' << buf;
  for (const auto& [k, v] : report.overall.recall) {
    std::snprintf(buf, sizeof buf, " %8s", ("R@" + std::to_string(k)).c_str());
    os << buf;
  }
  os << '\n';
  auto row = [&](const std::string& name, const MetricSet& m) {
    std::snprintf(buf, sizeof buf, "%-16s %8zu %8zu %8.4f", name.c_str(), m.n_total, m.n_valid,
                  m.mrr);
    os << buf;
    for (const auto& [k, v] : m.recall) {
      std::snprintf(buf, sizeof buf, " %8.4f", v);
      os << buf;
    }
    os << '\n';
  };
  row("all", report.overall);
  for (const auto& [name, m] : report.subsets) row(name, m);
  return os.str();
}

}  // namespace convqr
