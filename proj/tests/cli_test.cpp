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


// Drives the built command-line tool end to end on a small synthetic corpus.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "test_support.hpp"

namespace stutterkit {
namespace {

namespace fs = std::filesystem;

struct Run {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& scratch() {
  static const fs::path dir = testing::fresh_dir("cli");
  return dir;
}

Run cli(const std::string& args) {
  const auto out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + STUTTERKIT_CLI + "\" " + args + " >\"" + out.string() +
                          "\" 2>\"" + err.string() + "\"";
  const int rc = std::system(cmd.c_str());
  return {WIFEXITED(rc) ? WEXITSTATUS(rc) : -1, slurp(out), slurp(err)};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

const fs::path& corpus() {
  static const fs::path dir = [] {
    auto d = scratch() / "corpus";
    testing::SyntheticDatasetOptions o;
    o.clips_per_class = 60;
    o.podcasts = 20;
    testing::write_synthetic_dataset(d, o);
    return d;
  }();
  return dir;
}

// The final stderr line must be machine-parseable.
void expect_error_line(const Run& r, const std::string& code, const std::string& cls) {
  const std::regex line("error: code=(\\w+) class=(usage|data|numeric) message=\".*\"\n$");
  std::smatch m;
  ASSERT_TRUE(std::regex_search(r.err, m, line)) << r.err;
  EXPECT_EQ(m[1], code) << r.err;
  EXPECT_EQ(m[2], cls);
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(cli("--help").exit_code, 0);
  auto r = cli("");
  EXPECT_EQ(r.exit_code, 2);
  expect_error_line(r, "Usage", "usage");
  r = cli("crossval --manifest x.csv");
  EXPECT_EQ(r.exit_code, 2);
  expect_error_line(r, "Usage", "usage");
}

TEST(Cli, UnknownClassifierIsUsageError) {
  const auto spec = scratch() / "bad.spec";
  testing::write_text_file(spec, "classifier = svm\n");
  auto r = cli("crossval --spec " + q(spec) + " --manifest " + q(corpus() / "manifest.csv") +
               " --folds " + q(corpus() / "folds.csv") + " --out " + q(scratch() / "bad_out"));
  EXPECT_EQ(r.exit_code, 2);
  expect_error_line(r, "BadConfig", "usage");
  EXPECT_NE(r.err.find("usage:"), std::string::npos);
  r = cli("train --classifier svm --features x.csv --out m");
  EXPECT_EQ(r.exit_code, 2);
  expect_error_line(r, "BadConfig", "usage");
}

TEST(Cli, DataAndNumericErrors) {
  auto r = cli("verify-split --manifest " + q(scratch() / "missing.csv") + " --folds " + q(corpus() / "folds.csv"));
  EXPECT_EQ(r.exit_code, 3);
  expect_error_line(r, "Io", "data");

  // A constant feature matrix leaves nothing to discriminate.
  const auto flat = scratch() / "flat.csv";
  std::string text = "clip_id,podcast_id,label,f0,f1\n";
  for (int i = 0; i < 20; ++i)
    text += "c" + std::to_string(i) + ",p,"  + std::string(label_name(label_at(static_cast<std::size_t>(i % 5)))) + ",1,1\n";
  testing::write_text_file(flat, text);
  r = cli("fit-lda --features " + q(flat) + " --components 2 --out " + q(scratch() / "flat_lda.csv"));
  EXPECT_EQ(r.exit_code, 4);
  expect_error_line(r, "RankDeficient", "numeric");
}

TEST(Cli, VerifySplitReportsTableCounts) {
  const auto expected = testing::table1_counts();
  auto [manifest, folds] = testing::exact_split_manifest(expected);
  // Manifest rows are per source; verify-split never opens the files.
  for (auto& rec : manifest) rec.embedding_paths["ecapa"] = "emb/" + rec.clip_id + ".npy";
  write_manifest(scratch() / "exact_manifest.csv", manifest);
  write_folds(scratch() / "exact_folds.csv", folds);
  const auto table = fs::path(STUTTERKIT_SOURCE_DIR) / "data" / "table1.csv";
  const auto r = cli("verify-split --fold 1 --manifest " + q(scratch() / "exact_manifest.csv") + " --folds " +
                     q(scratch() / "exact_folds.csv") + " --expected " + q(table) + " --strict");
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("fold 1 train R=2681 P=1384 B=1726 I=3181 F=9950 total=18922 expected=18922 PASS"), std::string::npos);
  EXPECT_NE(r.out.find("total=2805 expected=2805 PASS"), std::string::npos);
  EXPECT_NE(r.out.find("total=1846 expected=1846 PASS"), std::string::npos);
  EXPECT_NE(r.out.find("fold 1 podcast-disjoint PASS"), std::string::npos);

  // Synthetic corpus against the same table: disjoint but counts differ.
  const auto loose = cli("verify-split --manifest " + q(corpus() / "manifest.csv") + " --folds " +
                         q(corpus() / "folds.csv") + " --expected " + q(table));
  EXPECT_EQ(loose.exit_code, 0);
  EXPECT_NE(loose.out.find("FAIL class-deviation"), std::string::npos);
  const auto strict = cli("verify-split --manifest " + q(corpus() / "manifest.csv") + " --folds " +
                          q(corpus() / "folds.csv") + " --expected " + q(table) + " --strict");
  EXPECT_EQ(strict.exit_code, 3);
  expect_error_line(strict, "CountMismatch", "data");
}

TEST(Cli, StepwisePipelineMatchesLibrary) {
  const auto d = scratch() / "steps";
  fs::create_directories(d);
  const std::string common = " --manifest " + q(corpus() / "manifest.csv") + " --folds " + q(corpus() / "folds.csv") + " --fold 1";
  for (const char* subset : {"train", "val", "test"}) {
    for (const char* src : {"w2v2.L11", "ecapa"}) {
      const auto r = cli("pool" + common + " --source " + src + " --subset " + subset + " --out " +
                         q(d / (std::string(src) + "_" + subset + ".csv")));
      ASSERT_EQ(r.exit_code, 0) << r.err;
    }
  }
  for (const char* src : {"w2v2.L11", "ecapa"}) {
    const std::string s = src;
    ASSERT_EQ(cli("fit-lda --features " + q(d / (s + "_train.csv")) + " --out " + q(d / (s + "_lda.csv"))).exit_code, 0);
    for (const char* subset : {"train", "val", "test"})
      ASSERT_EQ(cli("transform --lda " + q(d / (s + "_lda.csv")) + " --features " + q(d / (s + "_" + subset + ".csv")) +
                    " --out " + q(d / (s + "_" + subset + "_lda.csv"))).exit_code, 0);
    ASSERT_EQ(cli("train --classifier gnb --features " + q(d / (s + "_train_lda.csv")) + " --out " + q(d / (s + "_gnb.csv"))).exit_code, 0);
    const auto ev = cli("evaluate --model " + q(d / (s + "_gnb.csv")) + " --features " + q(d / (s + "_test_lda.csv")) +
                        " --scores " + q(d / (s + "_scores.csv")) + " --report " + q(d / (s + "_report.json")));
    ASSERT_EQ(ev.exit_code, 0) << ev.err;
    EXPECT_NE(ev.out.find("| Model | R | P | B | I | F | TA | UAR(%) |"), std::string::npos);
  }

  // Same fold through the library gives the same report.
  const auto m = load_manifest(corpus() / "manifest.csv");
  const auto folds = load_folds(corpus() / "folds.csv");
  const auto t = build_feature_table(m, folds, {"w2v2.L11"});
  const auto lib = run_fold(parse_pipeline_spec("classifier = gnb\n"), t, folds[0], 1);
  const auto cli_report = eval_report_from_json(nlohmann::ordered_json::parse(slurp(d / "w2v2.L11_report.json")));
  EXPECT_EQ(cli_report.confusion, lib.report.confusion);

  // KNN and MLP on the projected features.
  ASSERT_EQ(cli("train --classifier knn --k 5 --features " + q(d / "w2v2.L11_train_lda.csv") + " --out " + q(d / "knn.csv")).exit_code, 0);
  EXPECT_EQ(cli("evaluate --model " + q(d / "knn.csv") + " --features " + q(d / "w2v2.L11_test_lda.csv")).exit_code, 0);
  const auto mlp = cli("train --classifier mlp --max-epochs 5 --batch-size 32 --features " + q(d / "w2v2.L11_train_lda.csv") +
                       " --val " + q(d / "w2v2.L11_val_lda.csv") + " --out " + q(d / "mlp.bin") + " --log " + q(d / "mlp_log.csv"));
  ASSERT_EQ(mlp.exit_code, 0) << mlp.err;
  EXPECT_EQ(slurp(d / "mlp_log.csv").rfind("epoch,L_f,L_d,L_tot,val_L_tot\n", 0), 0u);
  EXPECT_EQ(cli("evaluate --model " + q(d / "mlp.bin") + " --features " + q(d / "w2v2.L11_test_lda.csv")).exit_code, 0);
  EXPECT_EQ(cli("train --classifier mlp --features " + q(d / "w2v2.L11_train_lda.csv") + " --out " + q(d / "x.bin")).exit_code, 2);

  // Score fusion: alpha=1 reproduces the primary file exactly.
  const auto f1 = cli("fuse-scores --primary " + q(d / "w2v2.L11_scores.csv") + " --secondary " + q(d / "ecapa_scores.csv") +
                      " --alpha 1 --out " + q(d / "fused1.csv"));
  ASSERT_EQ(f1.exit_code, 0) << f1.err;
  EXPECT_EQ(slurp(d / "fused1.csv"), slurp(d / "w2v2.L11_scores.csv"));
  const auto sw = cli("fuse-scores --primary " + q(d / "w2v2.L11_scores.csv") + " --secondary " + q(d / "ecapa_scores.csv") +
                      " --sweep --labels " + q(d / "w2v2.L11_test.csv") + " --out " + q(d / "fused.csv"));
  ASSERT_EQ(sw.exit_code, 0) << sw.err;
  EXPECT_NE(sw.out.find("best alpha"), std::string::npos);
  const auto mixed = cli("fuse-scores --primary " + q(d / "w2v2.L11_scores.csv") + " --secondary " + q(d / "ecapa_scores.csv") +
                         " --kind bogus");
  EXPECT_EQ(mixed.exit_code, 2);
}

TEST(Cli, CrossvalAndReport) {
  const auto spec = scratch() / "knn.spec";
  testing::write_text_file(spec, "name = \"synthetic knn\"\nsources = w2v2.L11\nclassifier = knn\nseed = 4\n");
  const std::string args = "crossval --spec " + q(spec) + " --manifest " + q(corpus() / "manifest.csv") +
                           " --folds " + q(corpus() / "folds.csv") + " --jobs 2 --out ";
  const auto a = cli(args + q(scratch() / "cv_a"));
  ASSERT_EQ(a.exit_code, 0) << a.err;
  EXPECT_NE(a.out.find("| synthetic knn |"), std::string::npos);
  for (int f = 1; f <= 10; ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "fold_%02d.json", f);
    EXPECT_TRUE(fs::exists(scratch() / "cv_a" / name)) << name;
  }
  ASSERT_EQ(cli(args + q(scratch() / "cv_b")).exit_code, 0);
  EXPECT_EQ(slurp(scratch() / "cv_a" / "summary.md"), slurp(scratch() / "cv_b" / "summary.md"));
  EXPECT_EQ(slurp(scratch() / "cv_a" / "config_snapshot.json"), slurp(scratch() / "cv_b" / "config_snapshot.json"));

  const auto r = cli("report " + q(scratch() / "cv_a") + " " + q(scratch() / "cv_b" / "summary.json") +
                     " --diagnostics --out " + q(scratch() / "table.md"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2 + 2 + 1 + 2 + 2);
  EXPECT_EQ(slurp(scratch() / "table.md"), r.out);
}

TEST(Cli, MakeFoldsWritesDisjointProtocol) {
  const auto table = fs::path(STUTTERKIT_SOURCE_DIR) / "data" / "table1.csv";
  const auto manifest = testing::sep28k_shaped_manifest(testing::table1_counts(), 5);
  write_manifest(scratch() / "shaped.csv", manifest);
  const auto r = cli("make-folds --manifest " + q(scratch() / "shaped.csv") + " --expected " + q(table) +
                     " --iterations 5000 --seed 1 --out " + q(scratch() / "shaped_folds.csv"));
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(cli("verify-split --manifest " + q(scratch() / "shaped.csv") + " --folds " + q(scratch() / "shaped_folds.csv")).exit_code, 0);
}

}  // namespace
}  // namespace stutterkit
