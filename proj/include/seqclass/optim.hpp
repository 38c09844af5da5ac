#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "seqclass/nn.hpp"

namespace seqclass {

enum class OptimizerKind { sgd, adam, adagrad, rmsprop };

OptimizerKind optimizer_from_string(std::string_view s);
std::string_view to_string(OptimizerKind k);
// Canonical published default step size for each rule: sgd and adagrad 0.01,
// adam and rmsprop 0.001.
double default_learning_rate(OptimizerKind k);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 0.0;  // 0 resolves to default_learning_rate(kind)
  double beta1 = 0.9;          // adam first-moment decay
  double beta2 = 0.999;        // adam second-moment decay
  double rho = 0.9;            // rmsprop average decay
  double epsilon = 1e-8;
  double clip_norm = 0.0;      // global gradient-norm cap; 0 disables
};

// Applies one update rule across all parameter tensors. Accumulator tensors
// (adam moments, adagrad/rmsprop squared-gradient state) mirror the parameter
// shapes. The embedding padding row is never touched.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const ModelConfig& shapes);

  void step(ModelParams& params, const Gradients& grads);

  const OptimizerConfig& config() const { return config_; }
  double learning_rate() const { return lr_; }
  std::uint64_t steps_taken() const { return t_; }

 private:
  OptimizerConfig config_;
  double lr_ = 0.0;
  std::uint64_t t_ = 0;
  std::vector<Tensor> acc_;     // adagrad/rmsprop squared sums, adam m
  std::vector<Tensor> second_;  // adam v
};

}  // namespace seqclass
