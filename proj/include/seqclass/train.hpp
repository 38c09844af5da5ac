#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "seqclass/corpus.hpp"
#include "seqclass/nn.hpp"
#include "seqclass/optim.hpp"

namespace seqclass {

struct TrainingConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  std::size_t max_len = 50;
  std::size_t vocab_size = 0;  // 0 resolves to the supplied vocabulary's size
  std::size_t embed_units = 128;
  std::size_t lstm_units = 128;
  double dropout = 0.5;
  Activation activation = Activation::sigmoid;
  bool shuffle = true;

  ModelConfig model_config() const;
};

// Flat `key=value` lines; # starts a comment. Returns pairs in file order.
std::vector<std::pair<std::string, std::string>> parse_key_values(
    std::string_view text);
// Applies recognized keys onto a default config; unknown keys are errors.
TrainingConfig training_config_from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs);
std::string training_config_to_string(const TrainingConfig& config);

struct Metrics {
  double accuracy = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  double mean_loss = 0.0;

  std::size_t total() const { return tp + tn + fp + fn; }
};

struct ExperimentReport {
  TrainingConfig config;
  std::vector<double> epoch_losses;  // mean train loss per epoch
  Metrics train;
  Metrics test;
  double seconds = 0.0;  // wall clock; reported in summaries, never in the CSV
};

// Raised when a run collapses at runtime (non-finite loss); distinct from
// configuration errors so the command line can map it to its own exit code.
class TrainingFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mini-batch training: seeded shuffle each epoch, mean-loss gradient per
// batch (final partial batch kept), one optimizer step per batch. The report
// carries the config echo, per-epoch losses, and final train metrics; test
// metrics are the caller's to fill.
std::pair<ModelParams, ExperimentReport> train_model(const Dataset& train,
                                                     const TrainingConfig& config,
                                                     const Vocabulary& vocab);

// Inference-mode accuracy/loss. threads > 1 fans the forward passes out and
// reduces in index order, so results equal the sequential run exactly.
Metrics evaluate(const ModelParams& model, const Vocabulary& vocab,
                 const Dataset& data, unsigned threads = 0);
Metrics evaluate_encoded(const ModelParams& model,
                         const std::vector<EncodedMessage>& messages,
                         const std::vector<int>& labels, unsigned threads = 0);

struct Prediction {
  double score = 0.0;
  int label = 0;
};

// Positive iff score >= 0.5 for the sigmoid head, >= 0 for the tanh head.
double decision_threshold(Activation act);
Prediction predict(const ModelParams& model, const Vocabulary& vocab,
                   std::string_view text);

// One CSV row per run; wall-clock time is deliberately absent so identical
// seeds give byte-identical reports.
std::string report_csv_header();
std::string report_csv_row(const ExperimentReport& report);
std::string report_summary(const ExperimentReport& report);

}  // namespace seqclass
