#include "seqclass/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace seqclass {

namespace {

constexpr double kScoreClamp = 1e-7;

// acc (1 x n) += v (1 x m) . M (m x n). Zero entries of v are skipped, which
// matters for pre-padded sequences where most x_t rows are all zero.
void add_vec_mat(const double* v, const Tensor& m, double* acc) {
  const std::size_t cols = m.cols();
  for (std::size_t k = 0; k < m.rows(); ++k) {
    const double vk = v[k];
    if (vk == 0.0) continue;
    const double* row = m.row(k);
    for (std::size_t j = 0; j < cols; ++j) acc[j] += vk * row[j];
  }
}

// acc (1 x m) += v (1 x n) . transpose(M) for M (m x n).
void add_vec_matT(const double* v, const Tensor& m, double* acc) {
  const std::size_t cols = m.cols();
  for (std::size_t k = 0; k < m.rows(); ++k) {
    const double* row = m.row(k);
    double dot = 0.0;
    for (std::size_t j = 0; j < cols; ++j) dot += v[j] * row[j];
    acc[k] += dot;
  }
}

// M (m x n) += transpose(u) . v for row vectors u (1 x m), v (1 x n).
void add_outer(const double* u, std::size_t m, const double* v, std::size_t n,
               Tensor& out) {
  for (std::size_t k = 0; k < m; ++k) {
    const double uk = u[k];
    if (uk == 0.0) continue;
    double* row = out.row(k);
    for (std::size_t j = 0; j < n; ++j) row[j] += uk * v[j];
  }
}

void ensure_shape(Tensor& t, std::size_t rows, std::size_t cols) {
  if (t.rows() != rows || t.cols() != cols) t = Tensor(rows, cols);
}

// a = h.w + b. Shared by the traced and traceless paths so their scores
// agree bitwise.
double dense_pre_activation(const double* h, const DenseParams& dense) {
  double a = dense.b(0, 0);
  for (std::size_t j = 0; j < dense.w.rows(); ++j) a += h[j] * dense.w(j, 0);
  return a;
}

double apply_activation(double a, Activation act) {
  return act == Activation::sigmoid ? sigmoid(a) : std::tanh(a);
}

void check_config(const ModelConfig& c) {
  if (c.vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");
  if (c.embed_units < 1) throw std::invalid_argument("embed_units must be >= 1");
  if (c.lstm_units < 1) throw std::invalid_argument("lstm_units must be >= 1");
  if (c.max_len < 1) throw std::invalid_argument("max_len must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");
}

template <typename Params, typename List>
void collect(Params& p, List& out) {
  out = {&p.embedding.table,
         &p.lstm.w_i, &p.lstm.u_i, &p.lstm.b_i,
         &p.lstm.w_f, &p.lstm.u_f, &p.lstm.b_f,
         &p.lstm.w_c, &p.lstm.u_c, &p.lstm.b_c,
         &p.lstm.w_o, &p.lstm.u_o, &p.lstm.b_o,
         &p.dense.w, &p.dense.b};
}

}  // namespace

Activation activation_from_string(std::string_view s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + std::string(s) +
                              "' (expected sigmoid or tanh)");
}

std::string_view to_string(Activation a) {
  return a == Activation::sigmoid ? "sigmoid" : "tanh";
}

std::vector<Tensor*> ModelParams::tensors() {
  std::vector<Tensor*> out;
  collect(*this, out);
  return out;
}

std::vector<const Tensor*> ModelParams::tensors() const {
  std::vector<const Tensor*> out;
  collect(*this, out);
  return out;
}

std::vector<Tensor*> Gradients::tensors() {
  std::vector<Tensor*> out;
  collect(*this, out);
  return out;
}

std::vector<const Tensor*> Gradients::tensors() const {
  std::vector<const Tensor*> out;
  collect(*this, out);
  return out;
}

void Gradients::zero() {
  for (Tensor* t : tensors()) t->fill(0.0);
}

void Gradients::scale(double s) {
  for (Tensor* t : tensors())
    for (std::size_t i = 0; i < t->size(); ++i) t->data()[i] *= s;
}

ModelParams init_model(const ModelConfig& config, std::uint64_t seed) {
  check_config(config);
  const std::size_t rows = config.vocab_size + 2;
  const std::size_t d_e = config.embed_units;
  const std::size_t d_h = config.lstm_units;
  Rng rng(seed);

  ModelParams m;
  m.config = config;
  m.embedding.table = glorot_uniform(rows, d_e, rng);
  for (std::size_t c = 0; c < d_e; ++c) m.embedding.table(0, c) = 0.0;

  auto gate = [&](Tensor& w, Tensor& u, Tensor& b, double bias) {
    w = glorot_uniform(d_e, d_h, rng);
    u = glorot_uniform(d_h, d_h, rng);
    b = constant(1, d_h, bias);
  };
  gate(m.lstm.w_i, m.lstm.u_i, m.lstm.b_i, 0.0);
  // Forget bias 1.0 keeps early cell state from washing out.
  gate(m.lstm.w_f, m.lstm.u_f, m.lstm.b_f, 1.0);
  gate(m.lstm.w_c, m.lstm.u_c, m.lstm.b_c, 0.0);
  gate(m.lstm.w_o, m.lstm.u_o, m.lstm.b_o, 0.0);

  m.dense.w = glorot_uniform(d_h, 1, rng);
  m.dense.b = zeros(1, 1);
  return m;
}

Gradients make_gradients(const ModelConfig& config) {
  check_config(config);
  const std::size_t rows = config.vocab_size + 2;
  const std::size_t d_e = config.embed_units;
  const std::size_t d_h = config.lstm_units;
  Gradients g;
  g.embedding.table = zeros(rows, d_e);
  auto gate = [&](Tensor& w, Tensor& u, Tensor& b) {
    w = zeros(d_e, d_h);
    u = zeros(d_h, d_h);
    b = zeros(1, d_h);
  };
  gate(g.lstm.w_i, g.lstm.u_i, g.lstm.b_i);
  gate(g.lstm.w_f, g.lstm.u_f, g.lstm.b_f);
  gate(g.lstm.w_c, g.lstm.u_c, g.lstm.b_c);
  gate(g.lstm.w_o, g.lstm.u_o, g.lstm.b_o);
  g.dense.w = zeros(d_h, 1);
  g.dense.b = zeros(1, 1);
  return g;
}

namespace {

void embed_into(const EncodedMessage& msg, const EmbeddingParams& emb,
                Tensor& out) {
  const std::size_t d_e = emb.table.cols();
  ensure_shape(out, msg.indices.size(), d_e);
  for (std::size_t t = 0; t < msg.indices.size(); ++t) {
    const std::uint32_t idx = msg.indices[t];
    if (idx >= emb.table.rows())
      throw std::invalid_argument("embedding index " + std::to_string(idx) +
                                  " out of range [0, " +
                                  std::to_string(emb.table.rows() - 1) + "]");
    std::memcpy(out.row(t), emb.table.row(idx), d_e * sizeof(double));
  }
}

}  // namespace

Tensor embed_forward(const EncodedMessage& msg, const EmbeddingParams& emb) {
  Tensor out;
  embed_into(msg, emb, out);
  return out;
}

Tensor lstm_forward(const Tensor& x, const LstmParams& params, LstmTrace& trace) {
  const std::size_t steps = x.rows();
  const std::size_t d_h = params.b_i.cols();
  if (x.cols() != params.w_i.rows())
    throw std::invalid_argument("lstm: input width " + x.shape_str() +
                                " does not match W " + params.w_i.shape_str());
  if (&trace.x != &x) trace.x = x;
  for (Tensor* t : {&trace.i, &trace.f, &trace.o, &trace.g, &trace.c,
                    &trace.tc, &trace.h})
    ensure_shape(*t, steps, d_h);

  const std::vector<double> zero_state(d_h, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double* xt = trace.x.row(t);
    const double* h_prev = t > 0 ? trace.h.row(t - 1) : zero_state.data();
    const double* c_prev = t > 0 ? trace.c.row(t - 1) : zero_state.data();

    auto gate_pre = [&](const Tensor& w, const Tensor& u, const Tensor& b,
                        double* out) {
      std::memcpy(out, b.row(0), d_h * sizeof(double));
      add_vec_mat(xt, w, out);
      if (t > 0) add_vec_mat(h_prev, u, out);
    };
    double* i_t = trace.i.row(t);
    double* f_t = trace.f.row(t);
    double* o_t = trace.o.row(t);
    double* g_t = trace.g.row(t);
    gate_pre(params.w_i, params.u_i, params.b_i, i_t);
    gate_pre(params.w_f, params.u_f, params.b_f, f_t);
    gate_pre(params.w_c, params.u_c, params.b_c, g_t);
    gate_pre(params.w_o, params.u_o, params.b_o, o_t);

    double* c_t = trace.c.row(t);
    double* tc_t = trace.tc.row(t);
    double* h_t = trace.h.row(t);
    for (std::size_t j = 0; j < d_h; ++j) {
      i_t[j] = sigmoid(i_t[j]);
      f_t[j] = sigmoid(f_t[j]);
      g_t[j] = std::tanh(g_t[j]);
      o_t[j] = sigmoid(o_t[j]);
      c_t[j] = f_t[j] * c_prev[j] + i_t[j] * g_t[j];
      tc_t[j] = std::tanh(c_t[j]);
      h_t[j] = o_t[j] * tc_t[j];
    }
  }

  Tensor h_final(1, d_h);
  if (steps > 0)
    std::memcpy(h_final.row(0), trace.h.row(steps - 1), d_h * sizeof(double));
  return h_final;
}

Tensor make_dropout_mask(std::size_t units, double p, Mode mode, Rng& rng) {
  Tensor mask = constant(1, units, 1.0);
  if (mode == Mode::infer || p == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t j = 0; j < units; ++j)
    mask(0, j) = rng.uniform() < p ? 0.0 : keep_scale;
  return mask;
}

std::pair<Tensor, Tensor> dropout(const Tensor& h, double p, Mode mode,
                                  Rng& rng) {
  if (!(p >= 0.0 && p < 1.0))
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  Tensor mask = make_dropout_mask(h.cols(), p, mode, rng);
  return {mul(h, mask), std::move(mask)};
}

double dense_forward(const Tensor& h, const DenseParams& dense, Activation act,
                     double* pre_act) {
  if (h.cols() != dense.w.rows())
    throw std::invalid_argument("dense: input " + h.shape_str() +
                                " does not match weight " + dense.w.shape_str());
  const double a = dense_pre_activation(h.row(0), dense);
  if (pre_act) *pre_act = a;
  return apply_activation(a, act);
}

double bce_loss(double p, int y) {
  const double clamped = std::min(1.0 - kScoreClamp, std::max(kScoreClamp, p));
  return y == 1 ? -std::log(clamped) : -std::log(1.0 - clamped);
}

double forward_masked(const EncodedMessage& msg, const ModelParams& params,
                      const Tensor& mask, ForwardTrace& trace) {
  const std::size_t d_h = params.config.lstm_units;
  if (mask.rows() != 1 || mask.cols() != d_h)
    throw std::invalid_argument("dropout mask shape " + mask.shape_str() +
                                " does not match lstm units " +
                                std::to_string(d_h));
  trace.msg = msg;
  embed_into(msg, params.embedding, trace.lstm.x);
  Tensor h_final = lstm_forward(trace.lstm.x, params.lstm, trace.lstm);
  trace.mask = mask;
  ensure_shape(trace.h_dropped, 1, d_h);
  for (std::size_t j = 0; j < d_h; ++j)
    trace.h_dropped(0, j) = h_final(0, j) * mask(0, j);
  trace.score = dense_forward(trace.h_dropped, params.dense,
                              params.config.activation, &trace.pre_activation);
  return trace.score;
}

double forward(const EncodedMessage& msg, const ModelParams& params, Mode mode,
               Rng& rng, ForwardTrace& trace) {
  const Tensor mask =
      make_dropout_mask(params.config.lstm_units, params.config.dropout, mode, rng);
  return forward_masked(msg, params, mask, trace);
}

double forward_infer(const EncodedMessage& msg, const ModelParams& params) {
  const LstmParams& lp = params.lstm;
  const std::size_t d_h = params.config.lstm_units;
  std::vector<double> h(d_h, 0.0), c(d_h, 0.0);
  std::vector<double> i_t(d_h), f_t(d_h), o_t(d_h), g_t(d_h), h_next(d_h);
  for (std::size_t t = 0; t < msg.indices.size(); ++t) {
    const std::uint32_t idx = msg.indices[t];
    if (idx >= params.embedding.table.rows())
      throw std::invalid_argument("embedding index " + std::to_string(idx) +
                                  " out of range [0, " +
                                  std::to_string(params.embedding.table.rows() - 1) +
                                  "]");
    const double* xt = params.embedding.table.row(idx);
    auto gate_pre = [&](const Tensor& w, const Tensor& u, const Tensor& b,
                        double* out) {
      std::memcpy(out, b.row(0), d_h * sizeof(double));
      add_vec_mat(xt, w, out);
      if (t > 0) add_vec_mat(h.data(), u, out);
    };
    gate_pre(lp.w_i, lp.u_i, lp.b_i, i_t.data());
    gate_pre(lp.w_f, lp.u_f, lp.b_f, f_t.data());
    gate_pre(lp.w_c, lp.u_c, lp.b_c, g_t.data());
    gate_pre(lp.w_o, lp.u_o, lp.b_o, o_t.data());
    for (std::size_t j = 0; j < d_h; ++j) {
      const double ij = sigmoid(i_t[j]);
      const double fj = sigmoid(f_t[j]);
      const double gj = std::tanh(g_t[j]);
      const double oj = sigmoid(o_t[j]);
      c[j] = fj * c[j] + ij * gj;
      h_next[j] = oj * std::tanh(c[j]);
    }
    h.swap(h_next);
  }
  const double a = dense_pre_activation(h.data(), params.dense);
  return apply_activation(a, params.config.activation);
}

void backward_into(const ForwardTrace& trace, int label,
                   const ModelParams& params, Gradients& grads) {
  const std::size_t steps = trace.lstm.h.rows();
  const std::size_t d_e = params.config.embed_units;
  const std::size_t d_h = params.config.lstm_units;
  const double y = label == 1 ? 1.0 : 0.0;
  const double p = trace.score;

  // d(loss)/d(pre-activation). The loss clamps the score, so a score outside
  // the clamp window contributes no gradient at all.
  double da = 0.0;
  if (p > kScoreClamp && p < 1.0 - kScoreClamp) {
    if (params.config.activation == Activation::sigmoid) {
      da = p - y;  // the sigmoid+BCE cancellation
    } else {
      da = (p - y) / (p * (1.0 - p)) * (1.0 - p * p);
    }
  }

  for (std::size_t j = 0; j < d_h; ++j)
    grads.dense.w(j, 0) += da * trace.h_dropped(0, j);
  grads.dense.b(0, 0) += da;

  std::vector<double> dh(d_h), dc(d_h, 0.0);
  for (std::size_t j = 0; j < d_h; ++j)
    dh[j] = da * params.dense.w(j, 0) * trace.mask(0, j);

  const std::vector<double> zero_state(d_h, 0.0);
  std::vector<double> dzi(d_h), dzf(d_h), dzg(d_h), dzo(d_h);
  std::vector<double> dh_prev(d_h), dx(d_e);
  for (std::size_t step = steps; step-- > 0;) {
    const double* i_t = trace.lstm.i.row(step);
    const double* f_t = trace.lstm.f.row(step);
    const double* o_t = trace.lstm.o.row(step);
    const double* g_t = trace.lstm.g.row(step);
    const double* tc_t = trace.lstm.tc.row(step);
    const double* xt = trace.lstm.x.row(step);
    const double* h_prev = step > 0 ? trace.lstm.h.row(step - 1) : zero_state.data();
    const double* c_prev = step > 0 ? trace.lstm.c.row(step - 1) : zero_state.data();

    for (std::size_t j = 0; j < d_h; ++j) {
      dzo[j] = dh[j] * tc_t[j] * o_t[j] * (1.0 - o_t[j]);
      dc[j] += dh[j] * o_t[j] * (1.0 - tc_t[j] * tc_t[j]);
      dzi[j] = dc[j] * g_t[j] * i_t[j] * (1.0 - i_t[j]);
      dzg[j] = dc[j] * i_t[j] * (1.0 - g_t[j] * g_t[j]);
      dzf[j] = dc[j] * c_prev[j] * f_t[j] * (1.0 - f_t[j]);
    }

    auto gate_grads = [&](const std::vector<double>& dz, Tensor& gw, Tensor& gu,
                          Tensor& gb) {
      add_outer(xt, d_e, dz.data(), d_h, gw);
      add_outer(h_prev, d_h, dz.data(), d_h, gu);
      double* gb_row = gb.row(0);
      for (std::size_t j = 0; j < d_h; ++j) gb_row[j] += dz[j];
    };
    gate_grads(dzi, grads.lstm.w_i, grads.lstm.u_i, grads.lstm.b_i);
    gate_grads(dzf, grads.lstm.w_f, grads.lstm.u_f, grads.lstm.b_f);
    gate_grads(dzg, grads.lstm.w_c, grads.lstm.u_c, grads.lstm.b_c);
    gate_grads(dzo, grads.lstm.w_o, grads.lstm.u_o, grads.lstm.b_o);

    const std::uint32_t idx = trace.msg.indices[step];
    if (idx != Vocabulary::kPadIndex) {
      std::fill(dx.begin(), dx.end(), 0.0);
      add_vec_matT(dzi.data(), params.lstm.w_i, dx.data());
      add_vec_matT(dzf.data(), params.lstm.w_f, dx.data());
      add_vec_matT(dzg.data(), params.lstm.w_c, dx.data());
      add_vec_matT(dzo.data(), params.lstm.w_o, dx.data());
      double* emb_row = grads.embedding.table.row(idx);
      for (std::size_t k = 0; k < d_e; ++k) emb_row[k] += dx[k];
    }

    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    add_vec_matT(dzi.data(), params.lstm.u_i, dh_prev.data());
    add_vec_matT(dzf.data(), params.lstm.u_f, dh_prev.data());
    add_vec_matT(dzg.data(), params.lstm.u_c, dh_prev.data());
    add_vec_matT(dzo.data(), params.lstm.u_o, dh_prev.data());
    dh.swap(dh_prev);
    for (std::size_t j = 0; j < d_h; ++j) dc[j] *= f_t[j];
  }
}

Gradients backward(const ForwardTrace& trace, int label,
                   const ModelParams& params) {
  Gradients grads = make_gradients(params.config);
  backward_into(trace, label, params, grads);
  return grads;
}

}  // namespace seqclass
