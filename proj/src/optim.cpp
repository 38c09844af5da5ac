#include "seqclass/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace seqclass {

OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  if (s == "adagrad") return OptimizerKind::adagrad;
  if (s == "rmsprop") return OptimizerKind::rmsprop;
  throw std::invalid_argument("unknown optimizer '" + std::string(s) +
                              "' (expected sgd, adam, adagrad, or rmsprop)");
}

std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::adagrad: return "adagrad";
    case OptimizerKind::rmsprop: return "rmsprop";
  }
  return "sgd";
}

double default_learning_rate(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::sgd: return 0.01;
    case OptimizerKind::adam: return 0.001;
    case OptimizerKind::adagrad: return 0.01;
    case OptimizerKind::rmsprop: return 0.001;
  }
  return 0.01;
}

Optimizer::Optimizer(const OptimizerConfig& config, const ModelConfig& shapes)
    : config_(config) {
  if (config_.learning_rate < 0.0)
    throw std::invalid_argument("learning rate must be >= 0");
  if (config_.epsilon <= 0.0)
    throw std::invalid_argument("optimizer epsilon must be > 0");
  if (config_.clip_norm < 0.0)
    throw std::invalid_argument("clip norm must be >= 0");
  lr_ = config_.learning_rate == 0.0 ? default_learning_rate(config_.kind)
                                     : config_.learning_rate;
  if (config_.kind != OptimizerKind::sgd) {
    const Gradients proto = make_gradients(shapes);
    for (const Tensor* t : proto.tensors())
      acc_.emplace_back(t->rows(), t->cols());
    if (config_.kind == OptimizerKind::adam)
      for (const Tensor* t : proto.tensors())
        second_.emplace_back(t->rows(), t->cols());
  }
}

void Optimizer::step(ModelParams& params, const Gradients& grads) {
  const auto param_list = params.tensors();
  const auto grad_list = grads.tensors();
  for (std::size_t k = 0; k < param_list.size(); ++k)
    if (!param_list[k]->same_shape(*grad_list[k]))
      throw std::invalid_argument("optimizer: gradient shape " +
                                  grad_list[k]->shape_str() +
                                  " does not match parameter " +
                                  param_list[k]->shape_str());

  double scale = 1.0;
  if (config_.clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor* g : grad_list)
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double v = g->data()[i];
        sq += v * v;
      }
    const double norm = std::sqrt(sq);
    if (norm > config_.clip_norm) scale = config_.clip_norm / norm;
  }

  ++t_;
  // Bias corrections for adam at this step count.
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));

  for (std::size_t k = 0; k < param_list.size(); ++k) {
    double* theta = param_list[k]->data();
    const double* g_raw = grad_list[k]->data();
    // Tensor 0 is the embedding table; its first row is the frozen padding
    // row and is skipped outright.
    const std::size_t begin = k == 0 ? param_list[k]->cols() : 0;
    const std::size_t end = param_list[k]->size();
    switch (config_.kind) {
      case OptimizerKind::sgd:
        for (std::size_t i = begin; i < end; ++i)
          theta[i] -= lr_ * (scale * g_raw[i]);
        break;
      case OptimizerKind::adam: {
        double* m = acc_[k].data();
        double* v = second_[k].data();
        for (std::size_t i = begin; i < end; ++i) {
          const double g = scale * g_raw[i];
          m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
          v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
          theta[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon);
        }
        break;
      }
      case OptimizerKind::adagrad: {
        double* sum = acc_[k].data();
        for (std::size_t i = begin; i < end; ++i) {
          const double g = scale * g_raw[i];
          sum[i] += g * g;
          theta[i] -= lr_ * g / std::sqrt(sum[i] + config_.epsilon);
        }
        break;
      }
      case OptimizerKind::rmsprop: {
        double* avg = acc_[k].data();
        for (std::size_t i = begin; i < end; ++i) {
          const double g = scale * g_raw[i];
          avg[i] = config_.rho * avg[i] + (1.0 - config_.rho) * g * g;
          theta[i] -= lr_ * g / std::sqrt(avg[i] + config_.epsilon);
        }
        break;
      }
    }
  }
}

}  // namespace seqclass
