#include <string>

#include "doctest.h"
#include "seqclass/baseline.hpp"
#include "seqclass/corpus.hpp"

using namespace seqclass;

namespace {

Vocabulary letters_vocab() {
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.emplace_back("a", 30);
  entries.emplace_back("b", 20);
  entries.emplace_back("c", 10);
  return Vocabulary(entries);
}

}  // namespace

TEST_CASE("featurize counts tokens against the vocabulary") {
  const Vocabulary v = letters_vocab();
  const BowVector f = featurize({"a", "b", "a"}, v);
  REQUIRE(f.counts.size() == 2);
  CHECK(f.counts[0] == std::pair<std::uint32_t, double>{1, 2.0});
  CHECK(f.counts[1] == std::pair<std::uint32_t, double>{2, 1.0});
  CHECK(f.bias == 1.0);
}

TEST_CASE("featurize folds unknown tokens into one bucket") {
  const Vocabulary v = letters_vocab();
  const BowVector f = featurize({"zz", "qq"}, v);
  REQUIRE(f.counts.size() == 1);
  CHECK(f.counts[0].first == v.oov_index());
  CHECK(f.counts[0].second == 2.0);
}

TEST_CASE("featurize of nothing leaves only the bias") {
  const BowVector f = featurize({}, letters_vocab());
  CHECK(f.counts.empty());
  CHECK(f.bias == 1.0);
}

TEST_CASE("featurize ignores token order") {
  const Vocabulary v = letters_vocab();
  const BowVector f1 = featurize({"a", "b", "c"}, v);
  const BowVector f2 = featurize({"c", "a", "b"}, v);
  CHECK(f1.counts == f2.counts);
}

TEST_CASE("both baselines separate a keyword task") {
  const Dataset data = gen_synthetic(SyntheticTask::keyword, 200, 60, 7);
  const Vocabulary vocab = build_vocabulary(data, 100);
  for (BaselineKind kind : {BaselineKind::logreg, BaselineKind::perceptron}) {
    const LinearModel m = train_baseline(kind, data, vocab, 20, 7);
    const Metrics metrics = baseline_evaluate(m, vocab, data);
    CHECK(metrics.accuracy >= 0.99);
  }
}

TEST_CASE("the perceptron converges to zero mistakes when separable") {
  const Dataset data = gen_synthetic(SyntheticTask::keyword, 200, 60, 15);
  const Vocabulary vocab = build_vocabulary(data, 100);
  std::size_t mistakes = 99;
  train_baseline(BaselineKind::perceptron, data, vocab, 30, 15, &mistakes);
  CHECK(mistakes == 0);
}

TEST_CASE("bag-of-words models cannot read token order") {
  const Dataset train = gen_synthetic(SyntheticTask::order, 1000, 60, 3);
  const Dataset test = gen_synthetic(SyntheticTask::order, 250, 60, 4);
  const Vocabulary vocab = build_vocabulary(train, 100);
  for (BaselineKind kind : {BaselineKind::logreg, BaselineKind::perceptron}) {
    const LinearModel m = train_baseline(kind, train, vocab, 10, 3);
    const Metrics metrics = baseline_evaluate(m, vocab, test);
    CHECK(metrics.accuracy <= 0.6);
  }
}

TEST_CASE("baseline training is reproducible") {
  const Dataset data = gen_synthetic(SyntheticTask::keyword, 120, 60, 8);
  const Vocabulary vocab = build_vocabulary(data, 100);
  const LinearModel m1 = train_baseline(BaselineKind::logreg, data, vocab, 5, 8);
  const LinearModel m2 = train_baseline(BaselineKind::logreg, data, vocab, 5, 8);
  const LinearModel m3 = train_baseline(BaselineKind::logreg, data, vocab, 5, 9);
  CHECK(m1.weights == m2.weights);
  CHECK_FALSE(m1.weights == m3.weights);
}

TEST_CASE("prediction scores come out in model-appropriate units") {
  const Vocabulary v = letters_vocab();
  LinearModel logreg;
  logreg.kind = BaselineKind::logreg;
  logreg.weights.assign(v.size() + 2, 0.0);
  const Prediction p = baseline_predict(logreg, v, "a");
  CHECK(p.score == 0.5);
  CHECK(p.label == 1);

  LinearModel perc;
  perc.kind = BaselineKind::perceptron;
  perc.weights.assign(v.size() + 2, 0.0);
  perc.weights[0] = -2.0;  // bias
  const Prediction q = baseline_predict(perc, v, "a");
  CHECK(q.score == -2.0);
  CHECK(q.label == 0);
}

TEST_CASE("comparison table reports deltas per task") {
  ComparisonEntry e;
  e.task = "keyword";
  e.baseline.accuracy = 0.9;
  e.baseline.tp = e.baseline.tn = 9;
  e.baseline.fp = e.baseline.fn = 1;
  e.lstm.accuracy = 0.9;
  e.lstm.tp = e.lstm.tn = 9;
  e.lstm.fp = e.lstm.fn = 1;
  const std::string csv = comparison_csv({e});
  CHECK(csv == "task,baseline_acc,lstm_acc,delta\nkeyword,0.9,0.9,0\n");
}

TEST_CASE("comparison table rejects mismatched example counts") {
  ComparisonEntry e;
  e.task = "keyword";
  e.baseline.tp = 5;
  e.lstm.tp = 4;
  CHECK_THROWS_AS(comparison_csv({e}), std::invalid_argument);
}

TEST_CASE("baseline names parse both ways") {
  CHECK(baseline_from_string("logreg") == BaselineKind::logreg);
  CHECK(baseline_from_string("perceptron") == BaselineKind::perceptron);
  CHECK(to_string(BaselineKind::logreg) == "logreg");
  CHECK_THROWS_AS(baseline_from_string("svm"), std::invalid_argument);
}
