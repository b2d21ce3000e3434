#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "kgvec/sgns.hpp"
#include "kgvec/store.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace kgvec;

namespace {

Vocabulary vocab_of(const std::string& text, std::size_t min_count = 1) {
  std::istringstream in(text);
  return build_vocab(in, min_count);
}

EmbeddingMatrices<double> random_matrices(std::mt19937_64& rng, std::size_t rows, std::size_t dim, double scale) {
  EmbeddingMatrices<double> m(rows, dim);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& x : m.input) x = u(rng);
  for (auto& x : m.output) x = u(rng);
  return m;
}

}  // namespace

TEST(Vocab, CountsEveryToken) {
  const auto v = vocab_of("a p b\na p c");
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.tokens, (std::vector<std::string>{"a", "p", "b", "c"}));
  EXPECT_EQ(v.counts, (std::vector<std::uint64_t>{2, 2, 1, 1}));
  EXPECT_EQ(v.total, 6u);
}

TEST(Vocab, MinCountDropsRareTokens) {
  const auto v = vocab_of("a p b\na p c", 2);
  EXPECT_EQ(v.tokens, (std::vector<std::string>{"a", "p"}));
}

TEST(Vocab, OrderIsFrequencyThenFirstOccurrence) {
  const auto v = vocab_of("z y y x x x w");
  EXPECT_EQ(v.tokens, (std::vector<std::string>{"x", "y", "z", "w"}));
  EXPECT_EQ(*v.find("z"), 2u);
}

TEST(Vocab, EmptyCorpusIsAnError) {
  EXPECT_THROW(vocab_of(""), Error);
  EXPECT_THROW(vocab_of("\n\n  \n"), Error);
  EXPECT_THROW(vocab_of("a b", 5), Error);
}

TEST(NegativeSampler, UniformCounts) {
  const std::vector<std::uint64_t> counts{1, 1};
  NegativeSampler s(counts);
  EXPECT_DOUBLE_EQ(s.probability(0), 0.5);
  EXPECT_DOUBLE_EQ(s.probability(1), 0.5);
}

TEST(NegativeSampler, PowerSmoothing) {
  const std::vector<std::uint64_t> counts{8, 1};
  NegativeSampler s(counts, 0.75);
  const double expected = std::pow(8.0, 0.75) / (std::pow(8.0, 0.75) + 1.0);
  EXPECT_NEAR(s.probability(0), expected, 1e-12);
  EXPECT_NEAR(s.probability(0), 0.8263, 1e-4);
}

TEST(NegativeSampler, EmpiricalFrequenciesMatch) {
  const std::vector<std::uint64_t> counts{50, 20, 9, 7, 5, 3, 2, 1, 1, 1};
  NegativeSampler s(counts, 0.75);
  double z = 0;
  for (auto c : counts) z += std::pow(static_cast<double>(c), 0.75);
  Engine rng(123);
  std::vector<std::size_t> hits(counts.size());
  const std::size_t draws = 1'000'000;
  for (std::size_t i = 0; i < draws; ++i) ++hits[s.sample(rng)];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double analytic = std::pow(static_cast<double>(counts[i]), 0.75) / z;
    EXPECT_NEAR(static_cast<double>(hits[i]) / draws, analytic, 0.01) << "index " << i;
  }
}

TEST(SgnsLoss, ZeroVectorsCostLn2PerTerm) {
  EmbeddingMatrices<double> m(4, 6);
  const std::vector<std::size_t> negs{1, 2, 3, 3, 1};
  const auto g = sgns_pair_loss<double>(0, 1, negs, m);
  EXPECT_NEAR(g.loss, 6 * std::numbers::ln2, 1e-15);
}

TEST(SgnsLoss, AlignedPairHasTinyLoss) {
  EmbeddingMatrices<double> m(2, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    m.input[i] = 1.0;       // center row 0, |v|^2 = 10
    m.output[10 + i] = 1.0;  // context row 1 equals v
  }
  const auto g = sgns_pair_loss<double>(0, 1, {}, m);
  EXPECT_NEAR(g.loss, std::log1p(std::exp(-10.0)), 1e-18);
  EXPECT_NEAR(g.loss, 4.54e-5, 1e-7);
}

TEST(SgnsLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int probe = 0; probe < 150; ++probe) {
    const std::size_t rows = 12, dim = 16;
    const auto m = random_matrices(rng, rows, dim, 0.8);
    const std::size_t center = rng() % rows, context = rng() % rows;
    std::vector<std::size_t> negs(1 + rng() % 8);
    for (auto& n : negs) n = rng() % rows;  // duplicates and collisions allowed
    const auto r = oracle::check_gradient(center, context, negs, m);
    worst = std::max(worst, r.max_rel_error);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(SgnsLoss, DuplicateNegativesAccumulate) {
  std::mt19937_64 rng(5);
  const auto m = random_matrices(rng, 5, 4, 0.5);
  const std::vector<std::size_t> once{3}, twice{3, 3};
  const auto g1 = sgns_pair_loss<double>(0, 1, once, m);
  const auto g2 = sgns_pair_loss<double>(0, 1, twice, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(g2.output.at(3)[i], 2 * g1.output.at(3)[i], 1e-15);
}

// A training step with distinct rows is plain SGD on the analytic gradient.
TEST(Trainer, StepIsGradientDescent) {
  TrainingConfig cfg;
  cfg.dim = 8;
  cfg.negatives = 3;
  SgnsTrainer t(vocab_of("a b c d e f"), cfg);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-0.4f, 0.4f);
  for (auto& x : t.weights().input) x = u(rng);
  for (auto& x : t.weights().output) x = u(rng);

  EmbeddingMatrices<double> before(t.weights().rows, t.weights().dim);
  std::copy(t.weights().input.begin(), t.weights().input.end(), before.input.begin());
  std::copy(t.weights().output.begin(), t.weights().output.end(), before.output.begin());
  const std::vector<std::uint32_t> negs{2, 3, 4};
  const std::vector<std::size_t> negs_sz{2, 3, 4};
  const auto grad = sgns_pair_loss<double>(0, 1, negs_sz, before);
  const float lr = 0.05f;
  const double loss = t.step(0, 1, negs, lr);
  EXPECT_NEAR(loss, grad.loss, 1e-5);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_NEAR(t.weights().input[i], before.input[i] - lr * grad.center[i], 1e-6);
  }
  for (const auto& [row, g] : grad.output) {
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NEAR(t.weights().output[row * 8 + i], before.output[row * 8 + i] - lr * g[i], 1e-6);
    }
  }
}

TEST(Trainer, DefaultsEchoReferenceConfiguration) {
  test::TempDir dir;
  test::write_file(dir.path() / "c.txt", "a p b\nb q c\n");
  TrainingConfig cfg;
  cfg.epochs = 5;
  const auto m = train(dir.file("c.txt"), cfg);
  EXPECT_EQ(m.metadata().at("dim"), 200);
  EXPECT_EQ(m.metadata().at("window"), 5);
  EXPECT_EQ(m.metadata().at("epochs"), 5);
  EXPECT_EQ(m.metadata().at("negative"), 25);
  EXPECT_EQ(m.metadata().at("mode"), "skip-gram");
  EXPECT_EQ(m.dim(), 200u);
  EXPECT_EQ(m.size(), 5u);  // vertex and edge tokens alike
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (float x : m.row(r)) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(Trainer, CooccurrenceSeparatesDisjointSentences) {
  test::TempDir dir;
  std::string corpus;
  for (int i = 0; i < 200; ++i) corpus += "a p b\nx q y\n";
  test::write_file(dir.path() / "c.txt", corpus);
  TrainingConfig cfg;
  cfg.dim = 50;
  const auto m = train(dir.file("c.txt"), cfg);
  const auto v = [&](const char* t) { return m.row(*m.find(t)); };
  EXPECT_GT(cosine(v("a"), v("b")), cosine(v("a"), v("x")));
  EXPECT_GT(cosine(v("a"), v("b")), cosine(v("a"), v("y")));
  EXPECT_GT(cosine(v("x"), v("y")), cosine(v("x"), v("b")));
}

TEST(Trainer, SameSeedGivesIdenticalMatrices) {
  test::TempDir dir;
  std::string corpus;
  std::mt19937 rng(4);
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 9; ++j) corpus += "t" + std::to_string(rng() % 30) + (j == 8 ? "\n" : " ");
  }
  test::write_file(dir.path() / "c.txt", corpus);
  TrainingConfig cfg;
  cfg.dim = 32;
  cfg.seed = 99;
  train(dir.file("c.txt"), cfg).save(dir.file("m1.bin"));
  train(dir.file("c.txt"), cfg).save(dir.file("m2.bin"));
  EXPECT_EQ(test::read_file(dir.path() / "m1.bin"), test::read_file(dir.path() / "m2.bin"));
  cfg.seed = 100;
  train(dir.file("c.txt"), cfg).save(dir.file("m3.bin"));
  EXPECT_NE(test::read_file(dir.path() / "m1.bin"), test::read_file(dir.path() / "m3.bin"));
}

TEST(Trainer, EpochLossIsNonIncreasing) {
  test::TempDir dir;
  std::string corpus;
  std::mt19937 rng(8);
  for (int i = 0; i < 400; ++i) {
    const int start = static_cast<int>(rng() % 60);
    for (int j = 0; j < 9; ++j) {
      corpus += "n" + std::to_string((start * 7 + j * 13 + static_cast<int>(rng() % 3)) % 60) + (j == 8 ? "\n" : " ");
    }
  }
  test::write_file(dir.path() / "c.txt", corpus);
  TrainingConfig cfg;
  cfg.dim = 32;
  TrainingReport rep;
  train(dir.file("c.txt"), cfg, &rep);
  ASSERT_EQ(rep.epoch_mean_loss.size(), 5u);
  int violations = 0;
  for (std::size_t e = 1; e < rep.epoch_mean_loss.size(); ++e) {
    if (rep.epoch_mean_loss[e] > rep.epoch_mean_loss[e - 1]) ++violations;
  }
  EXPECT_LE(violations, 1);
  EXPECT_LT(rep.epoch_mean_loss.back(), rep.epoch_mean_loss.front());
}

TEST(Trainer, WindowNeverCrossesSentenceBoundary) {
  test::TempDir dir;
  // Two-token sentences: every center has exactly one in-sentence neighbor
  // whatever radius is drawn, so pairs per epoch = number of tokens.
  test::write_file(dir.path() / "c.txt", "a b\nc d\ne f\n");
  TrainingConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 3;
  TrainingReport rep;
  train(dir.file("c.txt"), cfg, &rep);
  EXPECT_EQ(rep.pairs, 6u * 3u);

  test::write_file(dir.path() / "s.txt", "a\nb\nc\n");
  train(dir.file("s.txt"), cfg, &rep);
  EXPECT_EQ(rep.pairs, 0u);
}

TEST(Trainer, DivergenceIsReported) {
  test::TempDir dir;
  std::string corpus;
  for (int i = 0; i < 50; ++i) corpus += "a b c d e f g h i\n";
  test::write_file(dir.path() / "c.txt", corpus);
  TrainingConfig cfg;
  cfg.dim = 16;
  cfg.alpha = 1e30;
  cfg.min_alpha = 1e29;
  EXPECT_THROW(train(dir.file("c.txt"), cfg), TrainingError);
}

TEST(Trainer, SubsamplingAndCbowStayFinite) {
  test::TempDir dir;
  std::string corpus;
  for (int i = 0; i < 100; ++i) corpus += "a p b q c\nx r y s z\n";
  test::write_file(dir.path() / "c.txt", corpus);
  TrainingConfig cfg;
  cfg.dim = 16;
  cfg.sample = 1e-3;
  cfg.mode = TrainingMode::kCbow;
  const auto m = train(dir.file("c.txt"), cfg);
  EXPECT_EQ(m.metadata().at("mode"), "cbow");
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (float x : m.row(r)) EXPECT_TRUE(std::isfinite(x));
  }
}

TEST(Trainer, ConfigValidation) {
  TrainingConfig cfg;
  cfg.window = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainingConfig{};
  cfg.alpha = 1e-5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = TrainingConfig{};
  cfg.dim = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
