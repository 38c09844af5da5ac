#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "seqclass/corpus.hpp"
#include "seqclass/tensor.hpp"

namespace seqclass {

enum class Activation { sigmoid, tanh };

Activation activation_from_string(std::string_view s);
std::string_view to_string(Activation a);

// Architecture of the Embedding -> LSTM -> Dropout -> Dense network.
struct ModelConfig {
  std::size_t vocab_size = 0;     // V; the embedding table has V+2 rows
  std::size_t embed_units = 128;  // d_e
  std::size_t lstm_units = 128;   // d_h
  std::size_t max_len = 50;       // L
  double dropout = 0.5;
  Activation activation = Activation::sigmoid;
};

// Row 0 is the padding row and stays all zeros for the model's entire life;
// row V+1 holds the out-of-vocabulary token.
struct EmbeddingParams {
  Tensor table;  // (V+2) x d_e
};

struct LstmParams {
  Tensor w_i, u_i, b_i;  // d_e x d_h, d_h x d_h, 1 x d_h
  Tensor w_f, u_f, b_f;
  Tensor w_c, u_c, b_c;  // candidate ("cell") gate
  Tensor w_o, u_o, b_o;
};

struct DenseParams {
  Tensor w;  // d_h x 1
  Tensor b;  // 1 x 1
};

struct ModelParams {
  ModelConfig config;
  EmbeddingParams embedding;
  LstmParams lstm;
  DenseParams dense;

  // Every trainable tensor in the fixed serialization order: embedding table,
  // then per gate (input, forget, candidate, output) the W, U, b triple, then
  // the dense weight and bias.
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

// Same shapes and ordering as the trainable tensors of ModelParams.
struct Gradients {
  EmbeddingParams embedding;
  LstmParams lstm;
  DenseParams dense;

  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
  void zero();
  void scale(double s);
};

// Glorot-uniform weights, forget-gate bias 1.0, other biases zero, padding
// row zeroed. Draws happen in the tensors() order, so a seed pins every
// weight bit-for-bit.
ModelParams init_model(const ModelConfig& config, std::uint64_t seed);
Gradients make_gradients(const ModelConfig& config);

enum class Mode { train, infer };

// Per-timestep activations captured by the forward pass; everything the
// backward pass needs and nothing else. tc caches tanh(c).
struct LstmTrace {
  Tensor x;                          // L x d_e
  Tensor i, f, o, g, c, tc, h;       // L x d_h each
};

struct ForwardTrace {
  EncodedMessage msg;
  LstmTrace lstm;
  Tensor mask;       // 1 x d_h, entries 0 or 1/(1-p); all ones at inference
  Tensor h_dropped;  // 1 x d_h
  double pre_activation = 0.0;
  double score = 0.0;
};

// Row lookup per index; padding maps to the zero row.
Tensor embed_forward(const EncodedMessage& msg, const EmbeddingParams& emb);

// Standard forget-gate LSTM over the embedded sequence, h_0 = c_0 = 0:
//   i_t = sigmoid(x_t W_i + h_{t-1} U_i + b_i)     (f_t, o_t alike)
//   g_t = tanh(x_t W_c + h_{t-1} U_c + b_c)
//   c_t = f_t.c_{t-1} + i_t.g_t,  h_t = o_t.tanh(c_t)
// Returns h_T (1 x d_h) and fills the trace.
Tensor lstm_forward(const Tensor& x, const LstmParams& params, LstmTrace& trace);

// Train mode: each entry is dropped with probability p, survivors scaled by
// 1/(1-p). Infer mode (or p = 0): identity, and the rng is not consumed.
Tensor make_dropout_mask(std::size_t units, double p, Mode mode, Rng& rng);
std::pair<Tensor, Tensor> dropout(const Tensor& h, double p, Mode mode, Rng& rng);

// a = h.w + b, then the configured activation. pre_act receives a when given.
double dense_forward(const Tensor& h, const DenseParams& dense, Activation act,
                     double* pre_act = nullptr);

// -(y ln p + (1-y) ln(1-p)) with p clamped to [1e-7, 1-1e-7] before the logs.
double bce_loss(double p, int y);

// Full network pass. Train mode draws a fresh dropout mask from rng; infer
// mode uses the identity mask and leaves rng untouched.
double forward(const EncodedMessage& msg, const ModelParams& params, Mode mode,
               Rng& rng, ForwardTrace& trace);
// Same pass with a caller-supplied dropout mask (batch training, gradient
// checks with the mask held fixed).
double forward_masked(const EncodedMessage& msg, const ModelParams& params,
                      const Tensor& mask, ForwardTrace& trace);
// Traceless inference path; agrees bitwise with forward in infer mode.
double forward_infer(const EncodedMessage& msg, const ModelParams& params);

// Exact loss gradient for one example via backpropagation through time.
// Accumulates into grads (callers average over a batch by scaling). The
// padding row of the embedding gradient is always zero.
void backward_into(const ForwardTrace& trace, int label,
                   const ModelParams& params, Gradients& grads);
Gradients backward(const ForwardTrace& trace, int label,
                   const ModelParams& params);

}  // namespace seqclass
