// Copyright 2026 The stutterkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// The clip manifest, the podcast-level fold protocol, and split checks
// against the published per-fold class counts.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stutterkit/csv.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/labels.hpp"
#include "stutterkit/numerics.hpp"

namespace stutterkit {

/// "ecapa" or "w2v2.L1" ... "w2v2.L13".
inline bool is_valid_source_tag(std::string_view tag) {
  if (tag == "ecapa") return true;
  if (tag.rfind("w2v2.L", 0) != 0) return false;
  const auto digits = tag.substr(6);
  if (digits.empty() || digits.size() > 2) return false;
  int layer = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return false;
    layer = layer * 10 + (c - '0');
  }
  return layer >= 1 && layer <= 13 && !(digits.size() == 2 && digits[0] == '0');
}

/// Speaker embeddings arrive already pooled.
inline bool is_speaker_source(std::string_view tag) { return tag == "ecapa"; }

struct ClipRecord {
  std::string clip_id;
  std::string podcast_id;
  Label label = Label::F;
  std::map<std::string, std::filesystem::path> embedding_paths;  // source tag -> file

  friend bool operator==(const ClipRecord&, const ClipRecord&) = default;
};

using Manifest = std::vector<ClipRecord>;

/// Loads `clip_id,podcast_id,label,source_tag,path` rows (one per clip x
/// source). Records come back sorted by clip_id; relative paths resolve
/// against the manifest's directory.
inline Manifest load_manifest(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const std::string src = path.string();
  const auto c_clip = table.column("clip_id", src);
  const auto c_pod = table.column("podcast_id", src);
  const auto c_label = table.column("label", src);
  const auto c_tag = table.column("source_tag", src);
  const auto c_path = table.column("path", src);
  const auto base = path.parent_path();

  std::map<std::string, ClipRecord> by_id;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = src + ":" + std::to_string(table.line_numbers[i]);
    const auto label = parse_label(row[c_label]);
    if (!label) fail(ErrorCode::UnknownLabel, where + ": label '" + row[c_label] + "'");
    const std::string& tag = row[c_tag];
    if (!is_valid_source_tag(tag)) fail(ErrorCode::UnknownSourceTag, where + ": '" + tag + "'");

    auto [it, inserted] = by_id.try_emplace(row[c_clip]);
    ClipRecord& rec = it->second;
    if (inserted) {
      rec.clip_id = row[c_clip];
      rec.podcast_id = row[c_pod];
      rec.label = *label;
    } else if (rec.podcast_id != row[c_pod] || rec.label != *label) {
      fail(ErrorCode::InconsistentClip,
           where + ": clip '" + rec.clip_id + "' disagrees with an earlier row on podcast or label");
    }
    std::filesystem::path p = row[c_path];
    if (p.is_relative()) p = base / p;
    if (!rec.embedding_paths.emplace(tag, p.lexically_normal()).second)
      fail(ErrorCode::DuplicateClipId, where + ": clip '" + rec.clip_id + "' repeats source " + tag);
  }

  Manifest out;
  out.reserve(by_id.size());
  for (auto& [id, rec] : by_id) out.push_back(std::move(rec));
  return out;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "clip_id,podcast_id,label,source_tag,path\n";
  const auto base = path.parent_path();
  for (const auto& rec : manifest) {
    for (const auto& [tag, p] : rec.embedding_paths) {
      auto rel = p.is_absolute() && !base.empty() ? p.lexically_relative(base) : p;
      if (rel.empty()) rel = p;
      out << csv::escape(rec.clip_id) << ',' << csv::escape(rec.podcast_id) << ','
          << label_name(rec.label) << ',' << tag << ',' << csv::escape(rel.generic_string())
          << '\n';
    }
  }
}

enum class Subset { Train = 0, Val = 1, Test = 2 };
inline constexpr std::array<Subset, 3> kAllSubsets = {Subset::Train, Subset::Val, Subset::Test};

inline std::string_view subset_name(Subset s) {
  switch (s) {
    case Subset::Train: return "train";
    case Subset::Val: return "val";
    case Subset::Test: return "test";
  }
  return "?";
}

inline std::optional<Subset> parse_subset(std::string_view s) {
  if (s == "train") return Subset::Train;
  if (s == "val" || s == "valid" || s == "validation") return Subset::Val;
  if (s == "test") return Subset::Test;
  return std::nullopt;
}

struct FoldDefinition {
  int fold_id = 0;
  std::array<std::set<std::string>, 3> podcasts;  // indexed by Subset

  const std::set<std::string>& of(Subset s) const { return podcasts[static_cast<int>(s)]; }
  std::set<std::string>& of(Subset s) { return podcasts[static_cast<int>(s)]; }

  std::optional<Subset> subset_of(const std::string& podcast) const {
    for (auto s : kAllSubsets)
      if (of(s).count(podcast)) return s;
    return std::nullopt;
  }
};

/// Reads `fold_id,subset,podcast_id`; folds come back ordered by id.
inline std::vector<FoldDefinition> load_folds(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const std::string src = path.string();
  const auto c_fold = table.column("fold_id", src);
  const auto c_subset = table.column("subset", src);
  const auto c_pod = table.column("podcast_id", src);
  std::map<int, FoldDefinition> folds;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = src + ":" + std::to_string(table.line_numbers[i]);
    const double id = csv::to_double(row[c_fold], where);
    if (id != std::floor(id) || id < 1 || id > 10)
      fail(ErrorCode::Malformed, where + ": fold_id must be an integer in 1..10");
    const auto subset = parse_subset(row[c_subset]);
    if (!subset) fail(ErrorCode::Malformed, where + ": unknown subset '" + row[c_subset] + "'");
    auto& fold = folds[static_cast<int>(id)];
    fold.fold_id = static_cast<int>(id);
    fold.of(*subset).insert(row[c_pod]);
  }
  std::vector<FoldDefinition> out;
  for (auto& [id, f] : folds) out.push_back(std::move(f));
  return out;
}

inline void write_folds(const std::filesystem::path& path, const std::vector<FoldDefinition>& folds) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << "fold_id,subset,podcast_id\n";
  for (const auto& f : folds)
    for (auto s : kAllSubsets)
      for (const auto& p : f.of(s)) out << f.fold_id << ',' << subset_name(s) << ',' << csv::escape(p) << '\n';
}

struct ClassCounts {
  std::array<long, kNumClasses> per_class{};

  long total() const {
    long t = 0;
    for (long c : per_class) t += c;
    return t;
  }
  long& operator[](Label l) { return per_class[index_of(l)]; }
  long operator[](Label l) const { return per_class[index_of(l)]; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

/// Expected counts keyed by (fold, subset).
struct SplitCounts {
  std::map<std::pair<int, Subset>, ClassCounts> counts;

  const ClassCounts* find(int fold, Subset s) const {
    auto it = counts.find({fold, s});
    return it == counts.end() ? nullptr : &it->second;
  }
};

/// Reads `fold,subset,R,P,B,I,F,total`. A total that disagrees with the
/// class sum is rejected.
inline SplitCounts load_split_counts(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const std::string src = path.string();
  const auto c_fold = table.column("fold", src);
  const auto c_subset = table.column("subset", src);
  std::array<std::size_t, kNumClasses> c_class{};
  for (auto l : kAllLabels) c_class[index_of(l)] = table.column(label_name(l), src);
  const auto c_total = table.column("total", src);
  SplitCounts out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::string where = src + ":" + std::to_string(table.line_numbers[i]);
    const auto subset = parse_subset(row[c_subset]);
    if (!subset) fail(ErrorCode::Malformed, where + ": unknown subset '" + row[c_subset] + "'");
    ClassCounts cc;
    for (auto l : kAllLabels) cc[l] = std::lround(csv::to_double(row[c_class[index_of(l)]], where));
    const long total = std::lround(csv::to_double(row[c_total], where));
    if (total != cc.total())
      fail(ErrorCode::Malformed, where + ": total " + std::to_string(total) +
                                     " != class sum " + std::to_string(cc.total()));
    out.counts[{static_cast<int>(std::lround(csv::to_double(row[c_fold], where))), *subset}] = cc;
  }
  return out;
}

inline ClassCounts count_subset(const Manifest& manifest, const FoldDefinition& fold, Subset s) {
  ClassCounts cc;
  for (const auto& rec : manifest)
    if (fold.of(s).count(rec.podcast_id)) ++cc[rec.label];
  return cc;
}

struct SubsetCheck {
  Subset subset = Subset::Train;
  ClassCounts actual;
  std::optional<ClassCounts> expected;

  bool total_matches() const { return expected && expected->total() == actual.total(); }
  bool classes_match() const { return expected && *expected == actual; }
};

struct VerificationReport {
  int fold_id = 0;
  std::array<SubsetCheck, 3> subsets;
  // Podcasts found in more than one subset, per pair (train/val, train/test, val/test).
  std::vector<std::string> overlap_train_val, overlap_train_test, overlap_val_test;
  std::vector<std::string> unassigned_podcasts;  // in the manifest, in no subset
  std::vector<std::string> unknown_podcasts;     // in the fold, not in the manifest

  bool disjoint() const {
    return overlap_train_val.empty() && overlap_train_test.empty() && overlap_val_test.empty();
  }
  bool covers_manifest() const { return unassigned_podcasts.empty(); }
  bool totals_match() const {
    return std::all_of(subsets.begin(), subsets.end(),
                       [](const SubsetCheck& c) { return c.total_matches(); });
  }
  bool counts_match() const {
    return std::all_of(subsets.begin(), subsets.end(),
                       [](const SubsetCheck& c) { return c.classes_match(); });
  }

  /// One line per subset plus a disjointness line, e.g.
  /// `fold 1 train R=2681 ... total=18922 expected=18922 PASS`.
  std::string render() const {
    std::ostringstream os;
    for (const auto& c : subsets) {
      os << "fold " << fold_id << ' ' << subset_name(c.subset);
      for (auto l : kAllLabels) os << ' ' << label_name(l) << '=' << c.actual[l];
      os << " total=" << c.actual.total();
      if (c.expected) {
        os << " expected=" << c.expected->total() << (c.total_matches() ? " PASS" : " FAIL");
        if (!c.classes_match()) {
          os << " class-deviation:";
          for (auto l : kAllLabels)
            os << ' ' << label_name(l) << (c.actual[l] - (*c.expected)[l] >= 0 ? "+" : "")
               << c.actual[l] - (*c.expected)[l];
        }
      } else {
        os << " expected=n/a";
      }
      os << '\n';
    }
    os << "fold " << fold_id << " podcast-disjoint " << (disjoint() ? "PASS" : "FAIL");
    auto list = [&os](const char* name, const std::vector<std::string>& v) {
      if (v.empty()) return;
      os << ' ' << name << ':';
      for (const auto& p : v) os << ' ' << p;
    };
    list("train&val", overlap_train_val);
    list("train&test", overlap_train_test);
    list("val&test", overlap_val_test);
    os << '\n';
    if (!unassigned_podcasts.empty())
      os << "fold " << fold_id << " unassigned-podcasts " << unassigned_podcasts.size() << '\n';
    if (!unknown_podcasts.empty())
      os << "fold " << fold_id << " podcasts-not-in-manifest " << unknown_podcasts.size() << '\n';
    return os.str();
  }
};

inline VerificationReport verify_split(const Manifest& manifest, const FoldDefinition& fold,
                                       const SplitCounts* expected = nullptr) {
  VerificationReport rep;
  rep.fold_id = fold.fold_id;
  for (auto s : kAllSubsets) {
    auto& c = rep.subsets[static_cast<int>(s)];
    c.subset = s;
    c.actual = count_subset(manifest, fold, s);
    if (expected)
      if (const auto* e = expected->find(fold.fold_id, s)) c.expected = *e;
  }
  auto intersect = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    std::vector<std::string> out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
  };
  rep.overlap_train_val = intersect(fold.of(Subset::Train), fold.of(Subset::Val));
  rep.overlap_train_test = intersect(fold.of(Subset::Train), fold.of(Subset::Test));
  rep.overlap_val_test = intersect(fold.of(Subset::Val), fold.of(Subset::Test));

  std::set<std::string> manifest_podcasts;
  for (const auto& rec : manifest) manifest_podcasts.insert(rec.podcast_id);
  for (const auto& p : manifest_podcasts)
    if (!fold.subset_of(p)) rep.unassigned_podcasts.push_back(p);
  for (auto s : kAllSubsets)
    for (const auto& p : fold.of(s))
      if (!manifest_podcasts.count(p)) rep.unknown_podcasts.push_back(p);
  return rep;
}

/// Builds a podcast-disjoint protocol whose per-class counts approach
/// `expected` for every fold present there. Each fold starts from a seeded
/// random assignment and is refined by single-podcast moves that reduce the
/// summed absolute class-count deviation. Exact agreement is not guaranteed.
inline std::vector<FoldDefinition> make_folds(const Manifest& manifest, const SplitCounts& expected,
                                              std::uint64_t seed, int refine_iterations = 200000) {
  std::map<std::string, ClassCounts> per_podcast;
  for (const auto& rec : manifest) ++per_podcast[rec.podcast_id][rec.label];
  std::vector<std::string> names;
  std::vector<ClassCounts> counts;
  for (const auto& [name, cc] : per_podcast) {
    names.push_back(name);
    counts.push_back(cc);
  }
  const std::size_t n = names.size();

  std::set<int> fold_ids;
  for (const auto& [key, cc] : expected.counts) fold_ids.insert(key.first);

  std::vector<FoldDefinition> folds;
  for (int fid : fold_ids) {
    std::array<ClassCounts, 3> target{};
    for (auto s : kAllSubsets)
      if (const auto* e = expected.find(fid, s)) target[static_cast<int>(s)] = *e;

    SeededRng rng(seed + static_cast<std::uint64_t>(fid));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    // Greedy fill: each podcast goes to the subset with the largest remaining
    // share of its target total.
    std::vector<int> assign(n, 0);
    std::array<ClassCounts, 3> actual{};
    for (std::size_t idx : order) {
      int best = 0;
      double best_gap = -1e300;
      for (int s = 0; s < 3; ++s) {
        const double t = static_cast<double>(target[s].total());
        const double gap = t <= 0 ? -1e299 : (t - static_cast<double>(actual[s].total())) / t;
        if (gap > best_gap) {
          best_gap = gap;
          best = s;
        }
      }
      assign[idx] = best;
      for (auto l : kAllLabels) actual[best][l] += counts[idx][l];
    }

    auto deviation = [&](const std::array<ClassCounts, 3>& a) {
      long d = 0;
      for (int s = 0; s < 3; ++s) {
        for (auto l : kAllLabels) d += std::abs(a[s][l] - target[s][l]);
        d += 2 * std::abs(a[s].total() - target[s].total());
      }
      return d;
    };
    long current = deviation(actual);
    for (int it = 0; it < refine_iterations && current > 0 && n > 1; ++it) {
      const auto idx = static_cast<std::size_t>(rng.uniform_index(n));
      const int from = assign[idx];
      const int to = (from + 1 + static_cast<int>(rng.uniform_index(2))) % 3;
      if (rng.uniform() < 0.5) {
        // Swap with a podcast currently in `to`.
        const auto other = static_cast<std::size_t>(rng.uniform_index(n));
        if (assign[other] != to) continue;
        auto trial = actual;
        for (auto l : kAllLabels) {
          trial[from][l] += counts[other][l] - counts[idx][l];
          trial[to][l] += counts[idx][l] - counts[other][l];
        }
        const long d = deviation(trial);
        if (d <= current) {
          actual = trial;
          current = d;
          assign[idx] = to;
          assign[other] = from;
        }
      } else {
        auto trial = actual;
        for (auto l : kAllLabels) {
          trial[from][l] -= counts[idx][l];
          trial[to][l] += counts[idx][l];
        }
        const long d = deviation(trial);
        if (d <= current) {
          actual = trial;
          current = d;
          assign[idx] = to;
        }
      }
    }

    FoldDefinition f;
    f.fold_id = fid;
    for (std::size_t i = 0; i < n; ++i) f.of(static_cast<Subset>(assign[i])).insert(names[i]);
    folds.push_back(std::move(f));
  }
  return folds;
}

}  // namespace stutterkit
