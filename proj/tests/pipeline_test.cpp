#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include "kgvec/pipeline.hpp"
#include "kgvec/store.hpp"
#include "test_util.hpp"

using namespace kgvec;

namespace {

struct Run {
  int status;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(KGVEC_CLI) + " " + args + " 2>/dev/null";
  Run r{0, {}};
  FILE* p = popen(cmd.c_str(), "r");
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  r.status = pclose(p);
  return r;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST(Cli, PipelineProducesArtifacts) {
  test::TempDir dir;
  const auto r = cli("pipeline --input " + test::fixture("toy.nt") + " --depth 8 --walks 100 --seed 1 --dim 16 --workdir " +
                     dir.path().string());
  ASSERT_EQ(r.status, 0);
  for (const char* f : {"graph.kgg", "corpus.txt", "model.txt"}) EXPECT_TRUE(std::filesystem::exists(dir.path() / f)) << f;
  const auto model = EmbeddingModel::load(dir.file("model.txt"));
  EXPECT_EQ(model.size(), 12u);  // 10 vertices and 2 predicates
  EXPECT_EQ(model.dim(), 16u);
  EXPECT_FALSE(model.contains("zero"));
}

TEST(Cli, StagesAreDeterministic) {
  test::TempDir a, b;
  for (const auto* d : {&a, &b}) {
    const std::string w = d->path().string();
    ASSERT_EQ(cli("ingest --input " + test::fixture("toy.nt") + " --output " + w + "/g.kgg").status, 0);
    ASSERT_EQ(cli("walk --graph " + w + "/g.kgg --output " + w + "/c.txt --seed 4").status, 0);
    ASSERT_EQ(cli("train --corpus " + w + "/c.txt --output " + w + "/m.bin --dim 20 --seed 4").status, 0);
  }
  for (const char* f : {"g.kgg", "c.txt", "m.bin"}) {
    EXPECT_EQ(test::read_file(a.path() / f), test::read_file(b.path() / f)) << f;
  }
}

TEST(Cli, QueriesAgainstLocalModels) {
  const std::string m = "--model toy=" + test::fixture("analogy.txt");
  auto r = cli("query similarity --dataset toy --a man --b not-a-word " + m);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "0\n");

  r = cli("query analogy --a girl --b boy --c man " + m);
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(first_line(r.out).substr(0, 6), "woman\t");
  r = cli("query analogy --a boy --b girl --c man " + m);
  EXPECT_EQ(first_line(r.out), "woman\t1");

  r = cli("query closest --concept man -n 2 " + m);
  EXPECT_EQ(first_line(r.out).substr(0, 6), "woman\t");
  std::istringstream lines(r.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 2);

  r = cli("query combined --a man --b woman " + m + " --model other=" + test::fixture("analogy_b.txt"));
  EXPECT_EQ(r.status, 0);
  EXPECT_NEAR(std::stod(r.out), 0.995037 + 0.6, 1e-5);

  r = cli("query vector --concept laugh --model wn=" + test::fixture("wordnet_model.txt") + " --labels wn=sidecar:" +
          test::fixture("wordnet_labels.tsv"));
  EXPECT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("laugh#v"), std::string::npos);
}

TEST(Cli, EvalWritesReport) {
  test::TempDir dir;
  const auto r = cli("eval --gold " + test::fixture("ws353.csv") + " --format ws353 --model alpha=" +
                     test::fixture("analogy.txt") + " --model beta=" + test::fixture("analogy_b.txt") +
                     " --combined --out " + dir.file("report"));
  ASSERT_EQ(r.status, 0);
  const auto csv = test::read_file(dir.path() / "report.csv");
  EXPECT_EQ(csv, "dataset,ws353.csv\nalpha,0.9258\nbeta,0.7407\ncombined,0.9258\n");
  EXPECT_EQ(test::read_file(dir.path() / "report.txt"), r.out);
}

TEST(Cli, ErrorsExitNonZero) {
  EXPECT_NE(cli("frobnicate").status, 0);
  EXPECT_NE(cli("train --corpus /nonexistent --output x").status, 0);
  EXPECT_NE(cli("query similarity --a x --b y --model t=/nonexistent").status, 0);
  EXPECT_NE(cli("query similarity --dataset nope --a x --b y --model t=" + test::fixture("analogy.txt")).status, 0);
  test::TempDir dir;
  test::write_file(dir.path() / "bad.nt", "<http://a> <http://p> .\n");
  EXPECT_NE(cli("ingest --strict --input " + dir.file("bad.nt") + " --output " + dir.file("g")).status, 0);
  EXPECT_EQ(cli("ingest --input " + dir.file("bad.nt") + " --output " + dir.file("g")).status, 0);
}

TEST(Pipeline, ConfigFileDrivesStages) {
  test::TempDir dir;
  const auto cfg = parse_pipeline_config(nlohmann::json{
      {"workdir", dir.path().string()},
      {"seed", 3},
      {"ingest", {{"input", test::fixture("toy.nt")}}},
      {"walk", {{"depth", 4}, {"walks", 10}}},
      {"train", {{"dim", 8}, {"epochs", 2}, {"output", "m.bin"}}}});
  EXPECT_EQ(cfg.walk.seed, 3u);
  EXPECT_EQ(cfg.train.seed, 3u);
  const auto r = run_pipeline(cfg);
  EXPECT_EQ(r.ingest.graph.vertices, 10u);
  EXPECT_EQ(r.ingest.graph.dropped_literals, 1u);
  EXPECT_EQ(r.training.epoch_mean_loss.size(), 2u);
  EXPECT_EQ(EmbeddingModel::load(dir.file("m.bin")).dim(), 8u);
  EXPECT_THROW(parse_pipeline_config(nlohmann::json{{"train", {{"mode", "glove"}}}}), Error);
}
