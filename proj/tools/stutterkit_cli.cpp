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


// stutterkit command-line front end.
//
// Every failure ends with one line on stderr:
//   error: code=<ErrorCode> class=<usage|data|numeric> message="..."
// and exit status 2 (usage), 3 (data) or 4 (numeric).

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stutterkit/stutterkit.hpp"

namespace sk = stutterkit;
namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

int report_error(std::string_view code, std::string_view cls, const std::string& message) {
  if (cls == "usage") std::cerr << "usage: stutterkit <subcommand> [options]; see stutterkit <subcommand> --help\n";
  std::cerr << "error: code=" << code << " class=" << cls << " message=\"" << one_line(message)
            << "\"\n";
  if (cls == "usage") return kExitUsage;
  if (cls == "numeric") return kExitNumeric;
  return kExitData;
}

int report_error(const sk::Error& e) {
  switch (sk::error_class(e.code())) {
    case sk::ErrorClass::Usage: return report_error(sk::to_string(e.code()), "usage", e.message());
    case sk::ErrorClass::Numeric: return report_error(sk::to_string(e.code()), "numeric", e.message());
    case sk::ErrorClass::Data: break;
  }
  return report_error(sk::to_string(e.code()), "data", e.message());
}

sk::Subset parse_subset(const std::string& s) {
  if (s == "train") return sk::Subset::Train;
  if (s == "val") return sk::Subset::Val;
  if (s == "test") return sk::Subset::Test;
  sk::fail(sk::ErrorCode::BadConfig, "subset must be train, val or test, got '" + s + "'");
}

sk::ClassifierKind parse_classifier(const std::string& s) {
  if (s == "knn") return sk::ClassifierKind::Knn;
  if (s == "gnb" || s == "nbc") return sk::ClassifierKind::Gnb;
  if (s == "mlp" || s == "nn") return sk::ClassifierKind::Mlp;
  sk::fail(sk::ErrorCode::BadConfig, "unknown classifier '" + s + "' (knn|gnb|mlp)");
}

const sk::FoldDefinition& find_fold(const std::vector<sk::FoldDefinition>& folds, int id) {
  for (const auto& f : folds)
    if (f.fold_id == id) return f;
  sk::fail(sk::ErrorCode::BadConfig, "fold " + std::to_string(id) + " not in the protocol");
}

// Reads the first bytes of a model file to tell the formats apart.
sk::ClassifierKind sniff_model(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) sk::fail(sk::ErrorCode::Io, "cannot open " + p.string());
  char head[16] = {};
  in.read(head, sizeof head);
  const std::string s(head, static_cast<std::size_t>(in.gcount()));
  if (s.rfind("SKMLP1", 0) == 0) return sk::ClassifierKind::Mlp;
  if (s.rfind("stutterkit-knn", 0) == 0) return sk::ClassifierKind::Knn;
  if (s.rfind("stutterkit-gnb", 0) == 0) return sk::ClassifierKind::Gnb;
  sk::fail(sk::ErrorCode::BadMagic, p.string() + " is not a stutterkit model file");
}

// --- verify-split ------------------------------------------------------------

struct VerifyArgs {
  fs::path manifest, folds, expected;
  int fold = 0;
  bool strict = false;
};

int run_verify(const VerifyArgs& a) {
  const auto manifest = sk::load_manifest(a.manifest);
  const auto folds = sk::load_folds(a.folds);
  std::optional<sk::SplitCounts> expected;
  if (!a.expected.empty()) expected = sk::load_split_counts(a.expected);
  bool disjoint = true, counts = true;
  for (const auto& f : folds) {
    if (a.fold != 0 && f.fold_id != a.fold) continue;
    const auto rep = sk::verify_split(manifest, f, expected ? &*expected : nullptr);
    std::cout << rep.render();
    disjoint = disjoint && rep.disjoint();
    counts = counts && rep.counts_match();
  }
  if (a.fold != 0) find_fold(folds, a.fold);
  if (!disjoint) sk::fail(sk::ErrorCode::Malformed, "fold protocol is not podcast-disjoint");
  if (a.strict && !counts) sk::fail(sk::ErrorCode::CountMismatch, "subset counts differ from the expected table");
  return 0;
}

// --- make-folds --------------------------------------------------------------

struct MakeFoldsArgs {
  fs::path manifest, expected, out;
  std::uint64_t seed = 0;
  int iterations = 200000;
};

int run_make_folds(const MakeFoldsArgs& a) {
  const auto manifest = sk::load_manifest(a.manifest);
  const auto expected = sk::load_split_counts(a.expected);
  const auto folds = sk::make_folds(manifest, expected, a.seed, a.iterations);
  sk::write_folds(a.out, folds);
  for (const auto& f : folds) std::cout << sk::verify_split(manifest, f, &expected).render();
  return 0;
}

// --- pool --------------------------------------------------------------------

struct PoolArgs {
  fs::path input, output;
  std::string source;
  fs::path manifest, folds;
  int fold = 0;
  std::string subset;
  bool l2 = false;
  std::size_t jobs = 1;
};

int run_pool(const PoolArgs& a) {
  if (!a.input.empty()) {
    if (!a.manifest.empty()) sk::fail(sk::ErrorCode::BadConfig, "--input and --manifest are exclusive");
    const std::string tag = a.source.empty() ? "w2v2.L1" : a.source;
    if (!sk::is_valid_source_tag(tag)) sk::fail(sk::ErrorCode::BadConfig, "unknown source tag '" + tag + "'");
    auto pooled = sk::clip_feature(sk::read_embedding(a.input), tag);
    if (a.l2) pooled = sk::l2_normalize(pooled);
    sk::write_embedding(a.output, sk::Matrix(1, pooled.dim(), pooled.values));
    std::cout << a.output.string() << ": 1x" << pooled.dim() << '\n';
    return 0;
  }
  if (a.manifest.empty()) sk::fail(sk::ErrorCode::BadConfig, "give --input or --manifest");
  if (a.source.empty()) sk::fail(sk::ErrorCode::BadConfig, "--source is required with --manifest");
  if (!sk::is_valid_source_tag(a.source)) sk::fail(sk::ErrorCode::BadConfig, "unknown source tag '" + a.source + "'");
  const auto manifest = sk::load_manifest(a.manifest);

  // Without a protocol every podcast counts as one big training subset.
  std::vector<sk::FoldDefinition> folds;
  if (!a.folds.empty()) {
    folds = sk::load_folds(a.folds);
  } else {
    sk::FoldDefinition all;
    for (const auto& r : manifest) all.of(sk::Subset::Train).insert(r.podcast_id);
    folds.push_back(all);
  }
  std::set<std::string> l2;
  if (a.l2) l2.insert(a.source);
  const auto t = sk::build_feature_table(manifest, folds, {a.source}, l2, a.jobs);
  sk::FeatureSet fs_all{t.clip_ids, t.podcasts, t.labels, t.by_source.at(a.source)};
  sk::FeatureSet out = fs_all;
  if (!a.subset.empty()) {
    if (a.folds.empty() || a.fold == 0) sk::fail(sk::ErrorCode::BadConfig, "--subset needs --folds and --fold");
    out = fs_all.subset(find_fold(folds, a.fold), parse_subset(a.subset));
  }
  sk::write_feature_set(a.output, out);
  std::cout << a.output.string() << ": " << out.size() << " clips x " << out.x.cols() << " features\n";
  return 0;
}

// --- fit-lda / transform -----------------------------------------------------

struct LdaArgs {
  fs::path features, model, output;
  std::size_t components = 4;
  double epsilon = 1e-6;
};

int run_fit_lda(const LdaArgs& a) {
  const auto f = sk::read_feature_set(a.features);
  const auto model = sk::lda_fit(f.x, f.labels, a.components, a.epsilon);
  sk::save_lda(a.output, model);
  std::cout << a.output.string() << ": " << model.input_dim() << " -> " << model.components()
            << ", ratios";
  for (double r : model.discriminant_ratios) std::cout << ' ' << sk::csv::num(r);
  std::cout << '\n';
  return 0;
}

int run_transform(const LdaArgs& a) {
  auto f = sk::read_feature_set(a.features);
  const auto model = sk::load_lda(a.model);
  f.x = sk::lda_transform(model, f.x);
  sk::write_feature_set(a.output, f);
  std::cout << a.output.string() << ": " << f.size() << " clips x " << f.x.cols() << " features\n";
  return 0;
}

// --- train / evaluate --------------------------------------------------------

struct TrainArgs {
  std::string classifier;
  fs::path features, val, output, log;
  std::size_t k = 5;
  double p = 2.0;
  sk::mlp::TrainingConfig mlp;
};

int run_train(const TrainArgs& a) {
  const auto kind = parse_classifier(a.classifier);
  const auto tr = sk::read_feature_set(a.features);
  switch (kind) {
    case sk::ClassifierKind::Knn:
      sk::save_knn(a.output, sk::knn_fit(tr.x, tr.labels, a.k, a.p));
      break;
    case sk::ClassifierKind::Gnb:
      sk::save_gnb(a.output, sk::gnb_fit(tr.x, tr.labels));
      break;
    case sk::ClassifierKind::Mlp: {
      if (a.val.empty()) sk::fail(sk::ErrorCode::BadConfig, "mlp training needs --val for early stopping");
      const auto va = sk::read_feature_set(a.val);
      auto model = sk::mlp::make_model(tr.x.cols(), a.mlp);
      const auto log = sk::mlp::train(model, {tr.x, tr.labels}, {va.x, va.labels});
      sk::mlp::save_checkpoint(a.output, model);
      if (!a.log.empty()) sk::mlp::write_training_log(a.log, log);
      std::cout << "epochs " << log.epochs.size() << ", best " << log.best_epoch << " (val L_tot "
                << sk::csv::num(log.epochs[log.best_epoch - 1].val_total_loss) << ")"
                << (log.stopped_early ? ", stopped early" : "") << '\n';
      break;
    }
  }
  std::cout << a.output.string() << ": " << sk::to_string(kind) << " on " << tr.size() << " clips\n";
  return 0;
}

struct EvaluateArgs {
  fs::path model, features, scores, report, confusion;
  std::string system;
  int fold_id = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto f = sk::read_feature_set(a.features);
  std::vector<sk::Prediction> preds;
  switch (sniff_model(a.model)) {
    case sk::ClassifierKind::Knn: {
      const auto m = sk::load_knn(a.model);
      for (std::size_t i = 0; i < f.size(); ++i) preds.push_back(sk::knn_predict(m, f.x.row(i)));
      break;
    }
    case sk::ClassifierKind::Gnb: {
      const auto m = sk::load_gnb(a.model);
      for (std::size_t i = 0; i < f.size(); ++i) preds.push_back(sk::gnb_predict(m, f.x.row(i)));
      break;
    }
    case sk::ClassifierKind::Mlp:
      preds = sk::mlp::predict_batch(sk::mlp::load_checkpoint(a.model), f.x);
      break;
  }
  sk::ConfusionMatrix cm;
  sk::ScoreFile scores;
  for (std::size_t i = 0; i < f.size(); ++i) {
    cm.add(f.labels[i], preds[i].label);
    scores.clip_ids.push_back(f.clip_ids[i]);
    scores.scores.push_back(preds[i].scores);
  }
  const auto rep = sk::compute_metrics(cm, a.system.empty() ? a.model.stem().string() : a.system, a.fold_id);
  if (!a.scores.empty()) sk::write_scores(a.scores, scores);
  if (!a.report.empty()) sk::write_text(a.report, sk::to_json(rep).dump(2) + "\n");
  if (!a.confusion.empty()) sk::write_confusion_csv(a.confusion, cm);
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  sk::SummaryRow row;
  row.system = rep.system;
  row.recall = rep.recall;
  row.total_accuracy = rep.total_accuracy;
  row.uar = rep.uar;
  std::cout << sk::render_report({row});
  return 0;
}

// --- fuse-scores -------------------------------------------------------------

struct FuseArgs {
  fs::path primary, secondary, output, labels;
  double alpha = 0.9;
  std::string kind = "posterior";
  bool sweep = false;
  std::vector<double> grid;
};

int run_fuse(const FuseArgs& a) {
  sk::ScoreKind kind;
  if (a.kind == "posterior") kind = sk::ScoreKind::Posterior;
  else if (a.kind == "vote") kind = sk::ScoreKind::VoteFraction;
  else sk::fail(sk::ErrorCode::BadConfig, "--kind must be posterior or vote");
  const auto p = sk::read_scores(a.primary, kind);
  const auto s = sk::align_scores(p, sk::read_scores(a.secondary, kind));

  std::vector<sk::Label> truth;
  if (!a.labels.empty()) {
    const auto f = sk::read_feature_set(a.labels);
    std::map<std::string, sk::Label> by_id;
    for (std::size_t i = 0; i < f.size(); ++i) by_id[f.clip_ids[i]] = f.labels[i];
    for (const auto& id : p.clip_ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) sk::fail(sk::ErrorCode::LengthMismatch, "no label for clip '" + id + "'");
      truth.push_back(it->second);
    }
  }

  double alpha = a.alpha;
  if (a.sweep) {
    if (truth.empty()) sk::fail(sk::ErrorCode::BadConfig, "--sweep needs --labels");
    const auto grid = a.grid.empty() ? sk::default_alpha_grid() : a.grid;
    const auto sweep = sk::sweep_alpha(p.scores, s.scores, truth, grid);
    std::cout << "alpha,uar\n";
    for (const auto& [al, uar] : sweep.uar_by_alpha) std::cout << sk::csv::num(al) << ',' << sk::csv::num(uar) << '\n';
    std::cout << "best alpha " << sk::csv::num(sweep.best_alpha) << " (UAR " << sk::csv::num(sweep.best_uar) << ")\n";
    alpha = sweep.best_alpha;
  }

  sk::ScoreFile fused;
  fused.clip_ids = p.clip_ids;
  sk::ConfusionMatrix cm;
  for (std::size_t i = 0; i < p.scores.size(); ++i) {
    const auto out = sk::score_fuse(p.scores[i], s.scores[i], sk::FusionConfig{alpha});
    fused.scores.push_back(out.scores);
    if (!truth.empty()) cm.add(truth[i], out.label);
  }
  if (!a.output.empty()) sk::write_scores(a.output, fused);
  if (!truth.empty()) {
    const auto rep = sk::compute_metrics(cm);
    std::printf("alpha %s: UAR %.2f TA %.2f\n", sk::csv::num(alpha).c_str(), rep.uar, rep.total_accuracy);
  }
  return 0;
}

// --- crossval / report -------------------------------------------------------

struct CrossvalArgs {
  fs::path spec, manifest, folds, out;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

int run_crossval(const CrossvalArgs& a) {
  auto spec = sk::load_pipeline_spec(a.spec);
  if (a.seed) spec.seed = *a.seed;
  sk::CrossvalOptions opt;
  opt.manifest = a.manifest;
  opt.folds = a.folds;
  opt.spec_file = a.spec;
  opt.out_dir = a.out;
  opt.jobs = a.jobs;
  const auto res = sk::crossval(spec, opt);
  std::cout << sk::render_report({res.summary});
  return 0;
}

struct ReportArgs {
  std::vector<fs::path> inputs;
  fs::path output;
  bool diagnostics = false;
};

int run_report(const ReportArgs& a) {
  std::vector<sk::SummaryRow> rows;
  for (const auto& in : a.inputs) {
    const fs::path file = fs::is_directory(in) ? in / "summary.json" : in;
    std::ifstream is(file);
    if (!is) sk::fail(sk::ErrorCode::Io, "cannot open " + file.string());
    try {
      rows.push_back(sk::summary_from_json(nlohmann::ordered_json::parse(is)));
    } catch (const nlohmann::json::exception& e) {
      sk::fail(sk::ErrorCode::Malformed, file.string() + ": " + e.what());
    }
  }
  std::string text = sk::render_report(rows);
  if (a.diagnostics) text += "\n" + sk::render_diagnostics(rows);
  if (!a.output.empty()) sk::write_text(a.output, text);
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stuttering-detection pipeline over pre-extracted speech embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stutterkit 0.1.0");
  std::function<int()> action;

  VerifyArgs verify;
  auto* c_verify = app.add_subcommand("verify-split", "Check a fold protocol for podcast disjointness and expected counts");
  c_verify->add_option("--manifest", verify.manifest, "Clip manifest CSV")->required();
  c_verify->add_option("--folds", verify.folds, "Fold protocol CSV")->required();
  c_verify->add_option("--fold", verify.fold, "Only this fold (default: all)");
  c_verify->add_option("--expected", verify.expected, "Expected per-class counts CSV");
  c_verify->add_flag("--strict", verify.strict, "Fail when counts differ from --expected");
  c_verify->callback([&] { action = [&] { return run_verify(verify); }; });

  MakeFoldsArgs mk;
  auto* c_make = app.add_subcommand("make-folds", "Build a podcast-disjoint protocol matching expected counts");
  c_make->add_option("--manifest", mk.manifest, "Clip manifest CSV")->required();
  c_make->add_option("--expected", mk.expected, "Expected per-class counts CSV")->required();
  c_make->add_option("--out", mk.out, "Fold protocol CSV to write")->required();
  c_make->add_option("--seed", mk.seed, "Search seed");
  c_make->add_option("--iterations", mk.iterations, "Local-search iterations");
  c_make->callback([&] { action = [&] { return run_make_folds(mk); }; });

  PoolArgs pool;
  auto* c_pool = app.add_subcommand("pool", "Mean+std pooling of frame embeddings");
  c_pool->add_option("--input", pool.input, "Single embedding .npy");
  c_pool->add_option("--manifest", pool.manifest, "Pool every clip of the manifest");
  c_pool->add_option("--source", pool.source, "Source tag (ecapa passes through)");
  c_pool->add_option("--folds", pool.folds, "Fold protocol CSV");
  c_pool->add_option("--fold", pool.fold, "Fold id for --subset");
  c_pool->add_option("--subset", pool.subset, "train, val or test");
  c_pool->add_flag("--l2", pool.l2, "L2-normalize pooled vectors");
  c_pool->add_option("--jobs", pool.jobs, "Reader threads")->check(CLI::PositiveNumber);
  c_pool->add_option("--output,--out", pool.output, "Output .npy (--input) or feature CSV (--manifest)")->required();
  c_pool->callback([&] { action = [&] { return run_pool(pool); }; });

  LdaArgs lda;
  auto* c_fit = app.add_subcommand("fit-lda", "Fit an LDA projection on a feature CSV");
  c_fit->add_option("--features", lda.features, "Training features")->required();
  c_fit->add_option("--components", lda.components, "Output dimensions");
  c_fit->add_option("--epsilon", lda.epsilon, "Relative ridge on the within-class scatter");
  c_fit->add_option("--out", lda.output, "Model CSV to write")->required();
  c_fit->callback([&] { action = [&] { return run_fit_lda(lda); }; });

  auto* c_tr = app.add_subcommand("transform", "Project features with a fitted LDA");
  c_tr->add_option("--lda", lda.model, "LDA model CSV")->required();
  c_tr->add_option("--features", lda.features, "Features to project")->required();
  c_tr->add_option("--out", lda.output, "Projected feature CSV")->required();
  c_tr->callback([&] { action = [&] { return run_transform(lda); }; });

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Fit a classifier");
  c_train->add_option("--classifier", train.classifier, "knn, gnb or mlp")->required();
  c_train->add_option("--features", train.features, "Training features")->required();
  c_train->add_option("--val", train.val, "Validation features (mlp)");
  c_train->add_option("--out", train.output, "Model file")->required();
  c_train->add_option("--log", train.log, "Per-epoch training log CSV (mlp)");
  c_train->add_option("--k", train.k, "KNN neighbours");
  c_train->add_option("--p", train.p, "Minkowski order");
  c_train->add_option("--seed", train.mlp.seed, "MLP seed");
  c_train->add_option("--batch-size", train.mlp.batch_size);
  c_train->add_option("--learning-rate", train.mlp.learning_rate);
  c_train->add_option("--patience", train.mlp.patience);
  c_train->add_option("--max-epochs", train.mlp.max_epochs);
  c_train->add_option("--hidden1", train.mlp.hidden1);
  c_train->add_option("--hidden2", train.mlp.hidden2);
  c_train->add_option("--dropout", train.mlp.dropout);
  c_train->callback([&] { action = [&] { return run_train(train); }; });

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score a feature CSV with a trained model");
  c_eval->add_option("--model", ev.model, "Model file from train")->required();
  c_eval->add_option("--features", ev.features, "Test features")->required();
  c_eval->add_option("--system", ev.system, "Name in the report");
  c_eval->add_option("--fold-id", ev.fold_id, "Fold id recorded in the report");
  c_eval->add_option("--scores", ev.scores, "Per-clip score CSV to write");
  c_eval->add_option("--report", ev.report, "Report JSON to write");
  c_eval->add_option("--confusion", ev.confusion, "Confusion CSV to write");
  c_eval->callback([&] { action = [&] { return run_evaluate(ev); }; });

  FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse-scores", "Weighted fusion of two score files");
  c_fuse->add_option("--primary", fuse.primary, "Contextual-system scores (weight alpha)")->required();
  c_fuse->add_option("--secondary", fuse.secondary, "Speaker-system scores (weight 1-alpha)")->required();
  c_fuse->add_option("--alpha", fuse.alpha, "Fusion weight");
  c_fuse->add_option("--kind", fuse.kind, "posterior or vote");
  c_fuse->add_option("--labels", fuse.labels, "Feature CSV supplying true labels");
  c_fuse->add_flag("--sweep", fuse.sweep, "Pick alpha on a grid by UAR");
  c_fuse->add_option("--grid", fuse.grid, "Alpha grid for --sweep")->delimiter(',');
  c_fuse->add_option("--out", fuse.output, "Fused score CSV");
  c_fuse->callback([&] { action = [&] { return run_fuse(fuse); }; });

  CrossvalArgs cv;
  auto* c_cv = app.add_subcommand("crossval", "Run every fold of a protocol and aggregate");
  c_cv->add_option("--spec", cv.spec, "Pipeline spec file")->required();
  c_cv->add_option("--manifest", cv.manifest, "Clip manifest CSV")->required();
  c_cv->add_option("--folds", cv.folds, "Fold protocol CSV")->required();
  c_cv->add_option("--out", cv.out, "Results directory")->required();
  c_cv->add_option("--seed", cv.seed, "Override the spec seed");
  c_cv->add_option("--jobs", cv.jobs, "Folds run in parallel")->check(CLI::PositiveNumber);
  c_cv->callback([&] { action = [&] { return run_crossval(cv); }; });

  ReportArgs rep;
  auto* c_rep = app.add_subcommand("report", "Render summary tables from crossval results");
  c_rep->add_option("inputs", rep.inputs, "Result directories or summary.json files")->required();
  c_rep->add_option("--out", rep.output, "Markdown file to write");
  c_rep->add_flag("--diagnostics", rep.diagnostics, "Append spread and pooled metrics");
  c_rep->callback([&] { action = [&] { return run_report(rep); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("Usage", "usage", e.what());
  }

  try {
    return action();
  } catch (const sk::Error& e) {
    return report_error(e);
  } catch (const fs::filesystem_error& e) {
    return report_error("Io", "data", e.what());
  } catch (const std::exception& e) {
    return report_error("Internal", "data", e.what());
  }
}
