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


// Experiment configuration and the per-fold chain
//   pool -> [LDA] -> classifier -> [score fusion]
// plus the 10-fold driver that writes reports.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "stutterkit/csv.hpp"
#include "stutterkit/dataset.hpp"
#include "stutterkit/error.hpp"
#include "stutterkit/features.hpp"
#include "stutterkit/fusion.hpp"
#include "stutterkit/knn.hpp"
#include "stutterkit/lda.hpp"
#include "stutterkit/metrics.hpp"
#include "stutterkit/mlp.hpp"
#include "stutterkit/naive_bayes.hpp"
#include "stutterkit/npy.hpp"

namespace stutterkit {

enum class ClassifierKind { Knn, Gnb, Mlp };
enum class FusionKind { None, Score, Embed };
enum class EmbedOrder { LdaThenConcat, ConcatThenLda };

inline std::string_view to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::Knn: return "knn";
    case ClassifierKind::Gnb: return "gnb";
    case ClassifierKind::Mlp: return "mlp";
  }
  return "?";
}

/// One row of a results table: which embeddings, how they are reduced and
/// combined, and which back-end classifies them.
struct PipelineSpec {
  std::string name;
  std::vector<std::string> sources{"w2v2.L11"};
  FusionKind fusion = FusionKind::None;
  EmbedOrder embed_order = EmbedOrder::LdaThenConcat;
  std::vector<std::string> score_sources{"ecapa"};  // second system for score fusion
  double alpha = 0.9;
  std::vector<double> alpha_grid = default_alpha_grid();
  bool use_lda = true;
  std::size_t lda_components = 4;
  double lda_epsilon = 1e-6;
  ClassifierKind classifier = ClassifierKind::Mlp;
  std::size_t knn_k = 5;
  double knn_p = 2.0;
  mlp::TrainingConfig mlp;
  std::set<std::string> l2_normalize;
  std::uint64_t seed = 0;

  std::string descriptor() const {
    if (!name.empty()) return name;
    std::string s;
    for (const auto& src : sources) s += (s.empty() ? "" : "+") + src;
    if (fusion == FusionKind::Score) {
      s += " x ";
      for (std::size_t i = 0; i < score_sources.size(); ++i) s += (i ? "+" : "") + score_sources[i];
    }
    s += " ";
    s += to_string(classifier);
    if (use_lda) s += "+lda";
    return s;
  }

  std::vector<std::string> all_sources() const {
    std::vector<std::string> out = sources;
    if (fusion == FusionKind::Score)
      for (const auto& s : score_sources)
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    return out;
  }

  void validate() const {
    if (sources.empty()) fail(ErrorCode::BadConfig, "sources must name at least one embedding");
    for (const auto& s : all_sources())
      if (!is_valid_source_tag(s)) fail(ErrorCode::BadConfig, "unknown source tag '" + s + "'");
    if (fusion == FusionKind::Embed && sources.size() < 2)
      fail(ErrorCode::BadConfig, "embedding fusion needs two or more sources");
    if (fusion != FusionKind::Embed && sources.size() > 1)
      fail(ErrorCode::BadConfig, "several sources given; set fusion = embed");
    if (fusion == FusionKind::Score && score_sources.empty())
      fail(ErrorCode::BadConfig, "score fusion needs score_sources");
    if (use_lda && (lda_components == 0 || lda_components > kNumClasses - 1))
      fail(ErrorCode::BadConfig, "lda_components must be in 1..4");
    if (!(lda_epsilon >= 0)) fail(ErrorCode::BadConfig, "lda_epsilon must be >= 0");
    if (knn_k == 0 || !(knn_p >= 1)) fail(ErrorCode::BadConfig, "knn_k >= 1 and knn_p >= 1 required");
    FusionConfig{alpha}.validate();
    for (double a : alpha_grid) FusionConfig{a}.validate();
    mlp.validate();
  }
};

namespace spec_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string unquote(std::string s) {
  s = trim(std::move(s));
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front())
    return s.substr(1, s.size() - 2);
  return s;
}

inline std::vector<std::string> list(std::string v) {
  v = trim(std::move(v));
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') fail(ErrorCode::BadConfig, "unterminated list '" + v + "'");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = unquote(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline double number(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') fail(ErrorCode::BadConfig, key + ": '" + v + "' is not a number");
  return x;
}

inline std::size_t count(const std::string& key, const std::string& v) {
  const double x = number(key, v);
  if (x < 0 || x != static_cast<double>(static_cast<std::uint64_t>(x)))
    fail(ErrorCode::BadConfig, key + ": '" + v + "' is not a non-negative integer");
  return static_cast<std::size_t>(x);
}

inline bool boolean(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail(ErrorCode::BadConfig, key + ": '" + v + "' is not a boolean");
}

}  // namespace spec_detail

/// Parses `key = value` lines; `#` starts a comment. Values may be quoted,
/// lists are comma separated with optional brackets.
inline PipelineSpec parse_pipeline_spec(const std::string& text) {
  using namespace spec_detail;
  PipelineSpec s;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;  // blank or a section header
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    const std::string v = unquote(raw);

    if (key == "name") s.name = v;
    else if (key == "sources") s.sources = list(raw);
    else if (key == "fusion") {
      if (v == "none") s.fusion = FusionKind::None;
      else if (v == "score") s.fusion = FusionKind::Score;
      else if (v == "embed") s.fusion = FusionKind::Embed;
      else fail(ErrorCode::BadConfig, "fusion: unknown mode '" + v + "' (none|score|embed)");
    } else if (key == "embed_order") {
      if (v == "lda_then_concat") s.embed_order = EmbedOrder::LdaThenConcat;
      else if (v == "concat_then_lda") s.embed_order = EmbedOrder::ConcatThenLda;
      else fail(ErrorCode::BadConfig, "embed_order: unknown value '" + v + "'");
    } else if (key == "score_sources") s.score_sources = list(raw);
    else if (key == "alpha") s.alpha = number(key, v);
    else if (key == "alpha_grid") {
      s.alpha_grid.clear();
      for (const auto& a : list(raw)) s.alpha_grid.push_back(number(key, a));
    } else if (key == "lda") s.use_lda = boolean(key, v);
    else if (key == "lda_components") s.lda_components = count(key, v);
    else if (key == "lda_epsilon") s.lda_epsilon = number(key, v);
    else if (key == "classifier") {
      if (v == "knn") s.classifier = ClassifierKind::Knn;
      else if (v == "gnb" || v == "nbc") s.classifier = ClassifierKind::Gnb;
      else if (v == "mlp" || v == "nn") s.classifier = ClassifierKind::Mlp;
      else fail(ErrorCode::BadConfig, "classifier: unknown name '" + v + "' (knn|gnb|mlp)");
    } else if (key == "knn_k") s.knn_k = count(key, v);
    else if (key == "knn_p") s.knn_p = number(key, v);
    else if (key == "mlp_batch_size") s.mlp.batch_size = count(key, v);
    else if (key == "mlp_learning_rate") s.mlp.learning_rate = number(key, v);
    else if (key == "mlp_patience") s.mlp.patience = count(key, v);
    else if (key == "mlp_max_epochs") s.mlp.max_epochs = count(key, v);
    else if (key == "mlp_hidden1") s.mlp.hidden1 = count(key, v);
    else if (key == "mlp_hidden2") s.mlp.hidden2 = count(key, v);
    else if (key == "mlp_dropout") s.mlp.dropout = number(key, v);
    else if (key == "l2_normalize") {
      s.l2_normalize.clear();
      for (const auto& t : list(raw)) s.l2_normalize.insert(t);
    } else if (key == "seed") s.seed = count(key, v);
    else fail(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  s.validate();
  return s;
}

inline PipelineSpec load_pipeline_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_spec(ss.str());
}

/// Normalized key-value rendering; parsing it back gives the same spec.
inline std::string render_pipeline_spec(const PipelineSpec& s) {
  auto join = [](const auto& items) {
    std::string out;
    for (const auto& i : items) out += (out.empty() ? "" : ", ") + std::string(i);
    return out;
  };
  std::vector<std::string> grid;
  for (double a : s.alpha_grid) grid.push_back(csv::num(a));
  std::ostringstream os;
  os << "name = \"" << s.name << "\"\n";
  os << "sources = " << join(s.sources) << '\n';
  os << "fusion = " << (s.fusion == FusionKind::None ? "none" : s.fusion == FusionKind::Score ? "score" : "embed") << '\n';
  os << "embed_order = " << (s.embed_order == EmbedOrder::LdaThenConcat ? "lda_then_concat" : "concat_then_lda") << '\n';
  os << "score_sources = " << join(s.score_sources) << '\n';
  os << "alpha = " << csv::num(s.alpha) << '\n';
  os << "alpha_grid = " << join(grid) << '\n';
  os << "lda = " << (s.use_lda ? "true" : "false") << '\n';
  os << "lda_components = " << s.lda_components << '\n';
  os << "lda_epsilon = " << csv::num(s.lda_epsilon) << '\n';
  os << "classifier = " << to_string(s.classifier) << '\n';
  os << "knn_k = " << s.knn_k << '\n';
  os << "knn_p = " << csv::num(s.knn_p) << '\n';
  os << "mlp_batch_size = " << s.mlp.batch_size << '\n';
  os << "mlp_learning_rate = " << csv::num(s.mlp.learning_rate) << '\n';
  os << "mlp_patience = " << s.mlp.patience << '\n';
  os << "mlp_max_epochs = " << s.mlp.max_epochs << '\n';
  os << "mlp_hidden1 = " << s.mlp.hidden1 << '\n';
  os << "mlp_hidden2 = " << s.mlp.hidden2 << '\n';
  os << "mlp_dropout = " << csv::num(s.mlp.dropout) << '\n';
  os << "l2_normalize = " << join(s.l2_normalize) << '\n';
  os << "seed = " << s.seed << '\n';
  return os.str();
}

/// 64-bit FNV-1a, for input fingerprints in run snapshots.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::uint64_t value() const noexcept { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  Fnv1a h;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  return h.hex();
}

/// Clip-level features for every clip assigned by some fold, one matrix per
/// source (rows follow `clip_ids`). Contextual sources are stat-pooled,
/// speaker sources pass through.
struct FeatureTable {
  std::vector<std::string> clip_ids;
  std::vector<std::string> podcasts;
  std::vector<Label> labels;
  std::map<std::string, Matrix> by_source;
  std::map<std::string, std::string> digests;  // per source, over the values read

  std::vector<std::size_t> rows_in(const FoldDefinition& fold, Subset s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < podcasts.size(); ++i)
      if (fold.of(s).count(podcasts[i])) out.push_back(i);
    return out;
  }
};

inline PooledVector clip_feature(const Matrix& embedding, const std::string& tag) {
  if (is_speaker_source(tag)) {
    if (embedding.rows() != 1)
      fail(ErrorCode::ShapeMismatch, "speaker embedding must have one row, got " +
                                         std::to_string(embedding.rows()));
    return {embedding.row_vector(0), tag};
  }
  return stat_pool(embedding, tag);
}

inline FeatureTable build_feature_table(const Manifest& manifest,
                                        const std::vector<FoldDefinition>& folds,
                                        const std::vector<std::string>& sources,
                                        const std::set<std::string>& l2_sources = {},
                                        std::size_t jobs = 1) {
  std::set<std::string> used;
  for (const auto& f : folds)
    for (auto s : kAllSubsets) used.insert(f.of(s).begin(), f.of(s).end());

  FeatureTable t;
  std::vector<const ClipRecord*> recs;
  for (const auto& rec : manifest) {
    if (!used.count(rec.podcast_id)) continue;
    recs.push_back(&rec);
    t.clip_ids.push_back(rec.clip_id);
    t.podcasts.push_back(rec.podcast_id);
    t.labels.push_back(rec.label);
  }
  if (recs.empty()) fail(ErrorCode::EmptySet, "no manifest clip belongs to any fold");

  for (const auto& tag : sources) {
    std::vector<Vector> rows(recs.size());
    std::vector<std::uint64_t> hashes(recs.size());
    std::vector<std::string> errors(recs.size());
    std::vector<ErrorCode> codes(recs.size(), ErrorCode::Io);
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t i = begin; i < recs.size(); i += step) {
        try {
          auto it = recs[i]->embedding_paths.find(tag);
          if (it == recs[i]->embedding_paths.end())
            fail(ErrorCode::MissingEmbedding, "clip '" + recs[i]->clip_id + "' has no " + tag + " embedding");
          const Matrix e = read_embedding(it->second);
          Fnv1a h;
          h.update(recs[i]->clip_id);
          for (double v : e.data()) {
            const float f = static_cast<float>(v);
            h.update(&f, sizeof f);
          }
          hashes[i] = h.value();
          auto pooled = clip_feature(e, tag);
          if (l2_sources.count(tag)) pooled = l2_normalize(pooled);
          rows[i] = std::move(pooled.values);
        } catch (const Error& err) {
          errors[i] = err.message();
          codes[i] = err.code();
        }
      }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, recs.size()));
    if (n_threads == 1) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(work, k, n_threads);
      for (auto& th : pool) th.join();
    }
    // Re-raise the first failure in clip order.
    for (std::size_t i = 0; i < recs.size(); ++i)
      if (!errors[i].empty()) throw Error(codes[i], errors[i]);
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].size() != rows[0].size())
        fail(ErrorCode::ShapeMismatch, tag + ": clip '" + recs[i]->clip_id + "' has dimension " +
                                           std::to_string(rows[i].size()) + ", expected " +
                                           std::to_string(rows[0].size()));
    Fnv1a all;
    for (auto h : hashes) all.update(&h, sizeof h);
    t.digests[tag] = all.hex();
    t.by_source[tag] = Matrix::from_rows(rows);
  }
  return t;
}

/// Predictions of one system (feature chain + classifier) on val and test.
struct SystemOutput {
  std::vector<Prediction> val;
  std::vector<Prediction> test;
  std::optional<mlp::TrainingLog> training_log;
};

/// Fitted feature chain: per-part LDA models applied before or after concatenation.
struct FeatureChain {
  std::vector<std::string> sources;
  std::vector<std::optional<LdaModel>> part_lda;  // per source (LdaThenConcat)
  std::optional<LdaModel> joint_lda;              // after concatenation or single source

  Matrix apply(const FeatureTable& t, std::span<const std::size_t> rows) const {
    std::vector<Matrix> parts;
    for (std::size_t s = 0; s < sources.size(); ++s) {
      Matrix x = mlp::gather_rows(t.by_source.at(sources[s]), rows);
      if (part_lda[s]) x = lda_transform(*part_lda[s], x);
      parts.push_back(std::move(x));
    }
    Matrix joined = hconcat(parts);
    if (joint_lda) joined = lda_transform(*joint_lda, joined);
    return joined;
  }

  static Matrix hconcat(const std::vector<Matrix>& parts) {
    if (parts.size() == 1) return parts.front();
    std::size_t cols = 0;
    for (const auto& p : parts) cols += p.cols();
    Matrix out(parts.front().rows(), cols);
    for (std::size_t i = 0; i < out.rows(); ++i) {
      std::vector<PooledVector> pieces;
      for (const auto& p : parts) pieces.push_back({p.row_vector(i), {}});
      const auto joined = concat_embeddings(pieces);
      std::copy(joined.values.begin(), joined.values.end(), out.row(i).begin());
    }
    return out;
  }
};

inline FeatureChain fit_feature_chain(const PipelineSpec& spec, const std::vector<std::string>& sources,
                                      const FeatureTable& t, std::span<const std::size_t> train_rows,
                                      std::span<const Label> train_labels) {
  FeatureChain chain;
  chain.sources = sources;
  chain.part_lda.assign(sources.size(), std::nullopt);
  if (!spec.use_lda) return chain;
  const bool per_part = sources.size() > 1 && spec.embed_order == EmbedOrder::LdaThenConcat;
  if (per_part) {
    for (std::size_t s = 0; s < sources.size(); ++s)
      chain.part_lda[s] = lda_fit(mlp::gather_rows(t.by_source.at(sources[s]), train_rows),
                                  train_labels, spec.lda_components, spec.lda_epsilon);
  } else {
    chain.joint_lda = lda_fit(chain.apply(t, train_rows), train_labels, spec.lda_components,
                              spec.lda_epsilon);
  }
  return chain;
}

inline SystemOutput run_system(const PipelineSpec& spec, const std::vector<std::string>& sources,
                               const FeatureTable& t, const FoldDefinition& fold,
                               std::uint64_t seed) {
  const auto train_rows = t.rows_in(fold, Subset::Train);
  const auto val_rows = t.rows_in(fold, Subset::Val);
  const auto test_rows = t.rows_in(fold, Subset::Test);
  if (train_rows.empty() || test_rows.empty())
    fail(ErrorCode::EmptySet, "fold " + std::to_string(fold.fold_id) + " has an empty train or test subset");
  auto labels_of = [&t](std::span<const std::size_t> rows) {
    std::vector<Label> y;
    for (auto r : rows) y.push_back(t.labels[r]);
    return y;
  };
  const auto y_train = labels_of(train_rows);
  const auto y_val = labels_of(val_rows);

  const auto chain = fit_feature_chain(spec, sources, t, train_rows, y_train);
  const Matrix x_train = chain.apply(t, train_rows);
  const Matrix x_val = chain.apply(t, val_rows);
  const Matrix x_test = chain.apply(t, test_rows);

  SystemOutput out;
  auto predict_all = [](const Matrix& x, auto&& fn) {
    std::vector<Prediction> p;
    p.reserve(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) p.push_back(fn(x.row(i)));
    return p;
  };
  switch (spec.classifier) {
    case ClassifierKind::Knn: {
      const auto model = knn_fit(x_train, y_train, std::min(spec.knn_k, x_train.rows()), spec.knn_p);
      auto fn = [&model](std::span<const double> q) { return knn_predict(model, q); };
      out.val = predict_all(x_val, fn);
      out.test = predict_all(x_test, fn);
      break;
    }
    case ClassifierKind::Gnb: {
      const auto model = gnb_fit(x_train, y_train);
      auto fn = [&model](std::span<const double> q) { return gnb_predict(model, q); };
      out.val = predict_all(x_val, fn);
      out.test = predict_all(x_test, fn);
      break;
    }
    case ClassifierKind::Mlp: {
      if (val_rows.empty())
        fail(ErrorCode::EmptySet, "fold " + std::to_string(fold.fold_id) + " has no validation clips");
      auto cfg = spec.mlp;
      cfg.seed = seed;
      auto model = mlp::make_model(x_train.cols(), cfg);
      out.training_log = mlp::train(model, {x_train, y_train}, {x_val, y_val});
      out.val = mlp::predict_batch(model, x_val);
      out.test = mlp::predict_batch(model, x_test);
      break;
    }
  }
  return out;
}

/// α = 1 and α = 0 pass the corresponding system's prediction through
/// unchanged (label included); interior weights take the fused argmax.
inline Prediction score_fuse(const Prediction& w2v2, const Prediction& ecapa, const FusionConfig& cfg) {
  cfg.validate();
  if (w2v2.scores.kind != ecapa.scores.kind)
    fail(ErrorCode::KindMismatch, "cannot fuse posteriors with vote fractions");
  if (cfg.alpha == 1.0) return w2v2;
  if (cfg.alpha == 0.0) return ecapa;
  return score_fuse(w2v2.scores, ecapa.scores, cfg);
}

struct AlphaTuning {
  AlphaSweep oracle_tuned;  // swept on the test subset itself
  AlphaSweep val_tuned;     // swept on validation
  EvalReport test_at_val_alpha;
};

struct FoldResult {
  EvalReport report;
  ScoreFile test_scores;
  std::vector<std::pair<std::string, mlp::TrainingLog>> training_logs;
  std::optional<AlphaTuning> tuning;
};

inline std::vector<Prediction> fuse_all(const std::vector<Prediction>& a, const std::vector<Prediction>& b,
                                        double alpha) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.push_back(score_fuse(a[i], b[i], FusionConfig{alpha}));
  return out;
}

inline AlphaSweep sweep_predictions(const std::vector<Prediction>& a, const std::vector<Prediction>& b,
                                    const std::vector<Label>& labels, const std::vector<double>& grid) {
  if (a.size() != b.size() || a.size() != labels.size())
    fail(ErrorCode::LengthMismatch, "score lists and labels must align");
  AlphaSweep sweep;
  bool first = true;
  for (double alpha : grid) {
    ConfusionMatrix cm;
    const auto fused = fuse_all(a, b, alpha);
    for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], fused[i].label);
    const double uar = compute_metrics(cm).uar;
    sweep.uar_by_alpha.emplace_back(alpha, uar);
    if (first || uar > sweep.best_uar) {
      sweep.best_alpha = alpha;
      sweep.best_uar = uar;
      first = false;
    }
  }
  return sweep;
}

/// Fits on train, stops early on val (MLP), scores test. Per-fold
/// randomness is seeded from `seed` alone.
inline FoldResult run_fold(const PipelineSpec& spec, const FeatureTable& t, const FoldDefinition& fold,
                           std::uint64_t seed) {
  spec.validate();
  FoldResult res;
  const auto test_rows = t.rows_in(fold, Subset::Test);
  const auto val_rows = t.rows_in(fold, Subset::Val);
  std::vector<Label> y_test, y_val;
  for (auto r : test_rows) y_test.push_back(t.labels[r]);
  for (auto r : val_rows) y_val.push_back(t.labels[r]);

  auto primary = run_system(spec, spec.sources, t, fold, seed);
  if (primary.training_log) res.training_logs.emplace_back("primary", *primary.training_log);
  std::vector<Prediction> final_test = primary.test;

  if (spec.fusion == FusionKind::Score) {
    auto secondary = run_system(spec, spec.score_sources, t, fold, seed ^ 0x5bd1e995ULL);
    if (secondary.training_log) res.training_logs.emplace_back("secondary", *secondary.training_log);
    final_test = fuse_all(primary.test, secondary.test, spec.alpha);

    AlphaTuning tuning;
    tuning.oracle_tuned = sweep_predictions(primary.test, secondary.test, y_test, spec.alpha_grid);
    if (!y_val.empty()) {
      tuning.val_tuned = sweep_predictions(primary.val, secondary.val, y_val, spec.alpha_grid);
      ConfusionMatrix cm;
      const auto fused = fuse_all(primary.test, secondary.test, tuning.val_tuned.best_alpha);
      for (std::size_t i = 0; i < y_test.size(); ++i) cm.add(y_test[i], fused[i].label);
      tuning.test_at_val_alpha = compute_metrics(cm, spec.descriptor() + " (val-tuned alpha)", fold.fold_id);
    }
    res.tuning = tuning;
  }

  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_test.size(); ++i) {
    cm.add(y_test[i], final_test[i].label);
    res.test_scores.clip_ids.push_back(t.clip_ids[test_rows[i]]);
    res.test_scores.scores.push_back(final_test[i].scores);
  }
  res.report = compute_metrics(cm, spec.descriptor(), fold.fold_id);
  return res;
}

inline nlohmann::ordered_json sweep_json(const AlphaSweep& s) {
  nlohmann::ordered_json grid = nlohmann::ordered_json::array();
  for (const auto& [a, u] : s.uar_by_alpha) grid.push_back({{"alpha", a}, {"uar", u}});
  return {{"best_alpha", s.best_alpha}, {"best_uar", s.best_uar}, {"grid", grid}};
}

inline nlohmann::ordered_json fold_json(const FoldResult& r) {
  auto j = to_json(r.report);
  if (r.tuning) {
    j["alpha_tuning"] = {
        {"oracle_tuned", sweep_json(r.tuning->oracle_tuned)},
        {"val_tuned", sweep_json(r.tuning->val_tuned)},
        {"test_uar_at_val_tuned_alpha", r.tuning->test_at_val_alpha.uar},
        {"test_accuracy_at_val_tuned_alpha", r.tuning->test_at_val_alpha.total_accuracy}};
  }
  for (const auto& [name, log] : r.training_logs)
    j["training"][name] = {{"epochs", log.epochs.size()},
                           {"best_epoch", log.best_epoch},
                           {"stopped_early", log.stopped_early}};
  return j;
}

struct CrossvalOptions {
  std::filesystem::path manifest;
  std::filesystem::path folds;
  std::filesystem::path spec_file;  // recorded in the snapshot if set
  std::filesystem::path out_dir;
  std::size_t jobs = 1;
};

struct CrossvalResult {
  std::vector<FoldResult> folds;
  SummaryRow summary;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) fail(ErrorCode::Io, "cannot write " + p.string());
  os << text;
}

/// Runs every fold in the protocol, aggregates, and writes
///   fold_NN.json, confusion_NN.csv, scores_NN.csv, [training_NN_*.csv],
///   summary.json, summary.md, config_snapshot.json
/// into `opt.out_dir`. Fold seeds are spec.seed + fold_id.
inline CrossvalResult crossval(const PipelineSpec& spec, const CrossvalOptions& opt) {
  spec.validate();
  const auto manifest = load_manifest(opt.manifest);
  const auto folds = load_folds(opt.folds);
  if (folds.empty()) fail(ErrorCode::EmptySet, "fold protocol lists no folds");
  for (const auto& f : folds) {
    const auto rep = verify_split(manifest, f);
    if (!rep.disjoint())
      fail(ErrorCode::Malformed, "fold " + std::to_string(f.fold_id) + " is not podcast-disjoint");
  }
  const auto table = build_feature_table(manifest, folds, spec.all_sources(), spec.l2_normalize, opt.jobs);

  CrossvalResult out;
  out.folds.resize(folds.size());
  std::vector<std::string> errors(folds.size());
  std::vector<int> codes(folds.size(), -1);
  auto work = [&](std::size_t begin, std::size_t step) {
    for (std::size_t i = begin; i < folds.size(); i += step) {
      try {
        out.folds[i] = run_fold(spec, table, folds[i], spec.seed + static_cast<std::uint64_t>(folds[i].fold_id));
      } catch (const Error& e) {
        errors[i] = e.message();
        codes[i] = static_cast<int>(e.code());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(opt.jobs, folds.size()));
  if (n_threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(work, k, n_threads);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < folds.size(); ++i)
    if (codes[i] >= 0) throw Error(static_cast<ErrorCode>(codes[i]), "fold " + std::to_string(folds[i].fold_id) + ": " + errors[i]);

  std::vector<EvalReport> reports;
  for (const auto& f : out.folds) reports.push_back(f.report);
  out.summary = aggregate(reports, folds.size());

  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    for (const auto& f : out.folds) {
      char tag[16];
      std::snprintf(tag, sizeof tag, "%02d", f.report.fold_id);
      write_text(opt.out_dir / ("fold_" + std::string(tag) + ".json"), fold_json(f).dump(2) + "\n");
      write_confusion_csv(opt.out_dir / ("confusion_" + std::string(tag) + ".csv"), f.report.confusion);
      write_scores(opt.out_dir / ("scores_" + std::string(tag) + ".csv"), f.test_scores);
      for (const auto& [name, log] : f.training_logs)
        mlp::write_training_log(opt.out_dir / ("training_" + std::string(tag) + "_" + name + ".csv"), log);
    }
    write_text(opt.out_dir / "summary.json", to_json(out.summary).dump(2) + "\n");
    write_text(opt.out_dir / "summary.md", render_report({out.summary}) + "\n" +
                                               render_diagnostics({out.summary}));

    nlohmann::ordered_json snap;
    snap["spec"] = render_pipeline_spec(spec);
    snap["seed"] = spec.seed;
    snap["manifest"] = {{"path", opt.manifest.generic_string()}, {"digest", file_digest(opt.manifest)}};
    snap["folds"] = {{"path", opt.folds.generic_string()}, {"digest", file_digest(opt.folds)}};
    if (!opt.spec_file.empty())
      snap["spec_file"] = {{"path", opt.spec_file.generic_string()}, {"digest", file_digest(opt.spec_file)}};
    snap["embedding_digests"] = table.digests;
    write_text(opt.out_dir / "config_snapshot.json", snap.dump(2) + "\n");
  }
  return out;
}

}  // namespace stutterkit
