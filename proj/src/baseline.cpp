#include "seqclass/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace seqclass {

BaselineKind baseline_from_string(std::string_view s) {
  if (s == "logreg") return BaselineKind::logreg;
  if (s == "perceptron") return BaselineKind::perceptron;
  throw std::invalid_argument("unknown baseline '" + std::string(s) +
                              "' (expected logreg or perceptron)");
}

std::string_view to_string(BaselineKind k) {
  return k == BaselineKind::logreg ? "logreg" : "perceptron";
}

BowVector featurize(const std::vector<std::string>& tokens,
                    const Vocabulary& vocab) {
  std::vector<std::uint32_t> indices;
  indices.reserve(tokens.size());
  for (const auto& tok : tokens) indices.push_back(vocab.index_of(tok));
  std::sort(indices.begin(), indices.end());
  BowVector bow;
  for (std::size_t i = 0; i < indices.size();) {
    std::size_t j = i;
    while (j < indices.size() && indices[j] == indices[i]) ++j;
    bow.counts.emplace_back(indices[i], static_cast<double>(j - i));
    i = j;
  }
  return bow;
}

double baseline_margin(const LinearModel& model, const BowVector& features) {
  double score = model.weights[0] * features.bias;
  for (const auto& [idx, count] : features.counts)
    score += model.weights[idx] * count;
  return score;
}

namespace {

constexpr double kLogregStep = 0.1;

std::vector<BowVector> featurize_dataset(const Dataset& data,
                                         const Vocabulary& vocab,
                                         std::vector<int>& labels) {
  std::vector<BowVector> features;
  features.reserve(data.size());
  labels.reserve(data.size());
  for (const auto& ex : data.examples) {
    features.push_back(featurize(tokenize(ex.text), vocab));
    labels.push_back(ex.label);
  }
  return features;
}

void axpy(std::vector<double>& w, double a, const BowVector& x) {
  w[0] += a * x.bias;
  for (const auto& [idx, count] : x.counts) w[idx] += a * count;
}

}  // namespace

LinearModel train_baseline(BaselineKind kind, const Dataset& train,
                           const Vocabulary& vocab, std::size_t epochs,
                           std::uint64_t seed,
                           std::size_t* final_epoch_mistakes) {
  if (train.empty()) throw std::invalid_argument("training dataset is empty");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (vocab.empty()) throw std::invalid_argument("vocabulary is empty");

  std::vector<int> labels;
  const std::vector<BowVector> features = featurize_dataset(train, vocab, labels);
  const std::size_t dim = vocab.size() + 2;

  LinearModel model;
  model.kind = kind;
  model.weights.assign(dim, 0.0);

  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);

  // Averaged-perceptron accumulator (u) and example counter, so the average
  // is computed in one pass at the end: w_avg = w - u / c.
  std::vector<double> accum;
  double counter = 1.0;
  if (kind == BaselineKind::perceptron) accum.assign(dim, 0.0);

  std::size_t epoch_mistakes = 0;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    epoch_mistakes = 0;
    for (std::size_t idx : order) {
      const BowVector& x = features[idx];
      const double y = labels[idx] == 1 ? 1.0 : 0.0;
      const double margin = baseline_margin(model, x);
      if (kind == BaselineKind::logreg) {
        const double p = sigmoid(margin);
        if ((margin >= 0.0 ? 1 : 0) != labels[idx]) ++epoch_mistakes;
        axpy(model.weights, -kLogregStep * (p - y), x);
      } else {
        const int pred = margin >= 0.0 ? 1 : 0;
        if (pred != labels[idx]) {
          ++epoch_mistakes;
          const double delta = y == 1.0 ? 1.0 : -1.0;
          axpy(model.weights, delta, x);
          // Accumulate delta * counter on the touched coordinates only.
          accum[0] += delta * counter * x.bias;
          for (const auto& [fi, count] : x.counts)
            accum[fi] += delta * counter * count;
        }
      }
      counter += 1.0;
    }
  }

  if (kind == BaselineKind::perceptron)
    for (std::size_t k = 0; k < dim; ++k)
      model.weights[k] -= accum[k] / counter;

  if (final_epoch_mistakes) *final_epoch_mistakes = epoch_mistakes;
  return model;
}

Prediction baseline_predict(const LinearModel& model, const Vocabulary& vocab,
                            std::string_view text) {
  const BowVector x = featurize(tokenize(text), vocab);
  const double margin = baseline_margin(model, x);
  Prediction p;
  p.label = margin >= 0.0 ? 1 : 0;
  p.score = model.kind == BaselineKind::logreg ? sigmoid(margin) : margin;
  return p;
}

Metrics baseline_evaluate(const LinearModel& model, const Vocabulary& vocab,
                          const Dataset& data) {
  Metrics m;
  double loss_sum = 0.0;
  for (const auto& ex : data.examples) {
    const BowVector x = featurize(tokenize(ex.text), vocab);
    const double margin = baseline_margin(model, x);
    const int pred = margin >= 0.0 ? 1 : 0;
    if (pred == 1)
      (ex.label == 1 ? m.tp : m.fp) += 1;
    else
      (ex.label == 0 ? m.tn : m.fn) += 1;
    loss_sum += bce_loss(sigmoid(margin), ex.label);
  }
  if (!data.empty()) {
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(data.size());
    m.mean_loss = loss_sum / static_cast<double>(data.size());
  }
  return m;
}

std::string comparison_csv(const std::vector<ComparisonEntry>& entries) {
  std::string out = "task,baseline_acc,lstm_acc,delta\n";
  char buf[160];
  for (const auto& e : entries) {
    if (e.baseline.total() != e.lstm.total())
      throw std::invalid_argument(
          "comparison '" + e.task + "': baseline evaluated on " +
          std::to_string(e.baseline.total()) + " examples, lstm on " +
          std::to_string(e.lstm.total()));
    std::snprintf(buf, sizeof(buf), "%s,%.6g,%.6g,%.6g\n", e.task.c_str(),
                  e.baseline.accuracy, e.lstm.accuracy,
                  e.lstm.accuracy - e.baseline.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace seqclass
