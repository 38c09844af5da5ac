#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "seqclass/corpus.hpp"
#include "seqclass/train.hpp"

namespace seqclass {

// Sparse token counts by vocabulary index, OOV bucketed at V+1, plus a
// constant bias feature at slot 0.
struct BowVector {
  std::vector<std::pair<std::uint32_t, double>> counts;  // index ascending
  double bias = 1.0;
};

enum class BaselineKind { logreg, perceptron };

BaselineKind baseline_from_string(std::string_view s);
std::string_view to_string(BaselineKind k);

struct LinearModel {
  BaselineKind kind = BaselineKind::logreg;
  std::vector<double> weights;  // V+2 entries; weights[0] is the bias weight
};

BowVector featurize(const std::vector<std::string>& tokens,
                    const Vocabulary& vocab);

// logreg: per-example SGD on logistic loss, step 0.1, seeded shuffle each
// epoch. perceptron: averaged perceptron (the returned weights are the
// average). final_epoch_mistakes, when given, receives the number of
// misclassified training examples seen during the last epoch.
LinearModel train_baseline(BaselineKind kind, const Dataset& train,
                           const Vocabulary& vocab, std::size_t epochs,
                           std::uint64_t seed,
                           std::size_t* final_epoch_mistakes = nullptr);

// Raw linear margin w.x (positive class iff >= 0).
double baseline_margin(const LinearModel& model, const BowVector& features);

Prediction baseline_predict(const LinearModel& model, const Vocabulary& vocab,
                            std::string_view text);
Metrics baseline_evaluate(const LinearModel& model, const Vocabulary& vocab,
                          const Dataset& data);

// One row of the traditional-vs-LSTM accuracy table. Both metrics must come
// from the same test set.
struct ComparisonEntry {
  std::string task;
  Metrics baseline;
  Metrics lstm;
};

// CSV `task,baseline_acc,lstm_acc,delta`; rejects rows whose example counts
// differ between the two sides.
std::string comparison_csv(const std::vector<ComparisonEntry>& entries);

}  // namespace seqclass
