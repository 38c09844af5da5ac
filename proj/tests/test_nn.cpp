#include <cmath>
#include <vector>

#include "doctest.h"
#include "seqclass/nn.hpp"

using namespace seqclass;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.vocab_size = 20;
  c.embed_units = 4;
  c.lstm_units = 3;
  c.max_len = 6;
  c.dropout = 0.0;
  c.activation = Activation::sigmoid;
  return c;
}

// central finite difference of the loss with the dropout mask held fixed
double numeric_grad(ModelParams& model, const EncodedMessage& msg, int label,
                    const Tensor& mask, double* coord) {
  const double eps = 1e-5;
  const double saved = *coord;
  ForwardTrace trace;
  *coord = saved + eps;
  forward_masked(msg, model, mask, trace);
  const double up = bce_loss(trace.score, label);
  *coord = saved - eps;
  forward_masked(msg, model, mask, trace);
  const double down = bce_loss(trace.score, label);
  *coord = saved;
  return (up - down) / (2.0 * eps);
}

bool grads_close(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return diff < 1e-4 * scale || diff < 1e-7;
}

int check_all_coords(ModelParams& model, const EncodedMessage& msg, int label) {
  Tensor mask = constant(1, model.config.lstm_units, 1.0);
  ForwardTrace trace;
  forward_masked(msg, model, mask, trace);
  Gradients grads = backward(trace, label, model);

  auto param_tensors = model.tensors();
  auto grad_tensors = grads.tensors();
  int failures = 0;
  for (std::size_t t = 0; t < param_tensors.size(); ++t) {
    Tensor& p = *param_tensors[t];
    const Tensor& g = *grad_tensors[t];
    // row 0 of the embedding table is the frozen padding row
    const std::size_t begin = t == 0 ? p.cols() : 0;
    for (std::size_t k = begin; k < p.size(); ++k) {
      const double numeric = numeric_grad(model, msg, label, mask, p.data() + k);
      if (!grads_close(g.data()[k], numeric)) ++failures;
    }
  }
  return failures;
}

}  // namespace

TEST_CASE("init produces the documented shapes") {
  const ModelConfig c = small_config();
  const ModelParams m = init_model(c, 42);
  CHECK(m.embedding.table.rows() == 22);
  CHECK(m.embedding.table.cols() == 4);
  CHECK(m.lstm.w_i.rows() == 4);
  CHECK(m.lstm.w_i.cols() == 3);
  CHECK(m.lstm.u_o.rows() == 3);
  CHECK(m.lstm.u_o.cols() == 3);
  CHECK(m.lstm.b_c.rows() == 1);
  CHECK(m.lstm.b_c.cols() == 3);
  CHECK(m.dense.w.rows() == 3);
  CHECK(m.dense.w.cols() == 1);
  CHECK(m.dense.b.size() == 1);
}

TEST_CASE("init zeroes the padding row and sets the forget bias to one") {
  const ModelParams m = init_model(small_config(), 7);
  for (std::size_t c = 0; c < m.embedding.table.cols(); ++c)
    CHECK(m.embedding.table(0, c) == 0.0);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(m.lstm.b_f(0, j) == 1.0);
    CHECK(m.lstm.b_i(0, j) == 0.0);
    CHECK(m.lstm.b_c(0, j) == 0.0);
    CHECK(m.lstm.b_o(0, j) == 0.0);
  }
}

TEST_CASE("init is seed deterministic") {
  const ModelParams a = init_model(small_config(), 5);
  const ModelParams b = init_model(small_config(), 5);
  const ModelParams c = init_model(small_config(), 6);
  CHECK(a.embedding.table == b.embedding.table);
  CHECK(a.lstm.w_c == b.lstm.w_c);
  CHECK(a.dense.w == b.dense.w);
  CHECK_FALSE(a.embedding.table == c.embedding.table);
}

TEST_CASE("embedding lookup copies the addressed rows") {
  EmbeddingParams emb;
  emb.table = zeros(22, 2);
  emb.table(4, 0) = 0.25;
  emb.table(4, 1) = 0.1;
  emb.table(20, 0) = 0.6;
  emb.table(20, 1) = -0.2;
  EncodedMessage msg;
  msg.indices = {0, 4, 20};
  const Tensor x = embed_forward(msg, emb);
  CHECK(x.rows() == 3);
  CHECK(x(0, 0) == 0.0);
  CHECK(x(0, 1) == 0.0);
  CHECK(x(1, 0) == 0.25);
  CHECK(x(1, 1) == 0.1);
  CHECK(x(2, 0) == 0.6);
  CHECK(x(2, 1) == -0.2);
}

TEST_CASE("embedding lookup rejects out-of-range indices") {
  EmbeddingParams emb;
  emb.table = zeros(22, 2);
  EncodedMessage msg;
  msg.indices = {22};
  CHECK_THROWS_AS(embed_forward(msg, emb), std::invalid_argument);
}

TEST_CASE("recurrent state stays zero under zero parameters") {
  ModelConfig c = small_config();
  ModelParams m = init_model(c, 1);
  for (Tensor* t : m.tensors()) t->fill(0.0);
  EncodedMessage msg;
  msg.indices = {0, 3, 5, 1, 2, 7};
  const Tensor x = embed_forward(msg, m.embedding);
  LstmTrace trace;
  const Tensor h = lstm_forward(x, m.lstm, trace);
  for (std::size_t j = 0; j < h.cols(); ++j) CHECK(h(0, j) == 0.0);
}

TEST_CASE("single recurrent step matches the closed form") {
  // one unit, one input dim, zero weights: the gates collapse to
  // i=f=o=0.5 and g=tanh(1e6)=1, so c1=0.5 and h1=0.5*tanh(0.5)
  ModelConfig c;
  c.vocab_size = 3;
  c.embed_units = 1;
  c.lstm_units = 1;
  c.max_len = 1;
  ModelParams m = init_model(c, 1);
  for (Tensor* t : m.tensors()) t->fill(0.0);
  m.lstm.b_c.fill(1e6);
  m.embedding.table(1, 0) = 0.0;
  EncodedMessage msg;
  msg.indices = {1};
  LstmTrace trace;
  const Tensor h = lstm_forward(embed_forward(msg, m.embedding), m.lstm, trace);
  CHECK(trace.c(0, 0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h(0, 0) == doctest::Approx(0.23105857863000487).epsilon(1e-15));
}

TEST_CASE("recurrence is order sensitive") {
  ModelParams m = init_model(small_config(), 13);
  EncodedMessage ab, ba;
  ab.indices = {3, 9};
  ba.indices = {9, 3};
  LstmTrace ta, tb;
  const Tensor ha = lstm_forward(embed_forward(ab, m.embedding), m.lstm, ta);
  const Tensor hb = lstm_forward(embed_forward(ba, m.embedding), m.lstm, tb);
  CHECK_FALSE(ha == hb);
}

TEST_CASE("dropout is identity at inference and at rate zero") {
  Rng rng(1);
  const std::uint64_t before = Rng(1).next_u64();
  const Tensor h = Tensor::from_rows({{1.0, -2.0, 3.0}});
  const auto [out_infer, mask_infer] = dropout(h, 0.5, Mode::infer, rng);
  CHECK(out_infer == h);
  CHECK(rng.next_u64() == before);  // mask generation consumed no randomness

  Rng rng2(1);
  const auto [out_train, mask_train] = dropout(h, 0.0, Mode::train, rng2);
  CHECK(out_train == h);
  CHECK(rng2.next_u64() == before);
}

TEST_CASE("dropout masks scale surviving units") {
  Rng rng(99);
  const Tensor mask = make_dropout_mask(64, 0.5, Mode::train, rng);
  int kept = 0;
  for (std::size_t j = 0; j < 64; ++j) {
    const double v = mask(0, j);
    CHECK((v == 0.0 || v == 2.0));
    kept += v != 0.0;
  }
  CHECK(kept > 16);
  CHECK(kept < 48);
}

TEST_CASE("readout applies weights, bias, and the squashing choice") {
  DenseParams d;
  d.w = Tensor::from_rows({{1.0}, {-1.0}});
  d.b = Tensor::from_rows({{0.5}});
  const Tensor h = Tensor::from_rows({{2.0, 1.0}});
  CHECK(dense_forward(h, d, Activation::sigmoid) ==
        doctest::Approx(sigmoid(1.5)).epsilon(1e-15));
  CHECK(dense_forward(h, d, Activation::tanh) ==
        doctest::Approx(std::tanh(1.5)).epsilon(1e-15));
  d.w.fill(0.0);
  d.b.fill(0.0);
  CHECK(dense_forward(h, d, Activation::sigmoid) == 0.5);
  CHECK(dense_forward(h, d, Activation::tanh) == 0.0);
}

TEST_CASE("loss oracle values") {
  CHECK(bce_loss(0.5, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(0.5, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(0.1, 1) == doctest::Approx(2.302585092994046).epsilon(1e-12));
  CHECK(std::isfinite(bce_loss(0.0, 1)));
  CHECK(std::isfinite(bce_loss(1.0, 0)));
  CHECK(bce_loss(0.0, 1) > 15.0);
}

TEST_CASE("zero model scores one half") {
  ModelParams m = init_model(small_config(), 2);
  for (Tensor* t : m.tensors()) t->fill(0.0);
  EncodedMessage msg;
  msg.indices = {0, 0, 1, 2, 3, 4};
  CHECK(forward_infer(msg, m) == 0.5);
}

TEST_CASE("training-mode forward without dropout equals inference") {
  ModelParams m = init_model(small_config(), 21);
  m.config.dropout = 0.0;
  EncodedMessage msg;
  msg.indices = {0, 0, 2, 19, 21, 5};
  Rng rng(4);
  ForwardTrace trace;
  const double trained = forward(msg, m, Mode::train, rng, trace);
  const double inferred = forward_infer(msg, m);
  CHECK(trained == inferred);  // bitwise, same operation order
}

TEST_CASE("analytic gradients match finite differences") {
  const EncodedMessage msg{{0, 0, 5, 21, 5, 3}, 4};
  int total_failures = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    ModelParams m = init_model(small_config(), seed);
    total_failures += check_all_coords(m, msg, seed % 2 == 0 ? 1 : 0);
  }
  CHECK(total_failures == 0);
}

TEST_CASE("analytic gradients hold under an active dropout mask") {
  ModelParams m = init_model(small_config(), 11);
  const EncodedMessage msg{{0, 1, 2, 3, 4, 5}, 5};
  Tensor mask = constant(1, 3, 1.0);
  mask(0, 1) = 0.0;  // unit dropped, rest kept at weight 1
  ForwardTrace trace;
  forward_masked(msg, m, mask, trace);
  Gradients grads = backward(trace, 1, m);
  auto params = m.tensors();
  auto gt = grads.tensors();
  int failures = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::size_t begin = t == 0 ? params[t]->cols() : 0;
    for (std::size_t k = begin; k < params[t]->size(); ++k) {
      const double numeric = numeric_grad(m, msg, 1, mask, params[t]->data() + k);
      if (!grads_close(gt[t]->data()[k], numeric)) ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("the padding row receives no gradient") {
  ModelParams m = init_model(small_config(), 8);
  const EncodedMessage msg{{0, 0, 0, 7, 2, 7}, 3};
  Tensor mask = constant(1, 3, 1.0);
  ForwardTrace trace;
  forward_masked(msg, m, mask, trace);
  const Gradients grads = backward(trace, 0, m);
  for (std::size_t c = 0; c < grads.embedding.table.cols(); ++c)
    CHECK(grads.embedding.table(0, c) == 0.0);
}

TEST_CASE("readout bias gradient equals the score residual") {
  ModelParams m = init_model(small_config(), 14);
  const EncodedMessage msg{{1, 2, 3, 4, 5, 6}, 6};
  Tensor mask = constant(1, 3, 1.0);
  ForwardTrace trace;
  forward_masked(msg, m, mask, trace);
  const Gradients grads = backward(trace, 1, m);
  CHECK(grads.dense.b(0, 0) == doctest::Approx(trace.score - 1.0).epsilon(1e-12));
}

TEST_CASE("gradients check out for the tanh readout") {
  ModelConfig c = small_config();
  c.activation = Activation::tanh;
  const EncodedMessage msg{{0, 2, 9, 9, 1, 18}, 5};
  int failures = 0;
  for (std::uint64_t seed : {5, 6}) {
    ModelParams m = init_model(c, seed);
    m.dense.b.fill(0.5);  // keep the squashed score away from the clamp
    failures += check_all_coords(m, msg, seed % 2 == 0 ? 0 : 1);
  }
  CHECK(failures == 0);
}

TEST_CASE("full-batch descent reduces the loss monotonically") {
  ModelConfig c = small_config();
  c.vocab_size = 10;
  ModelParams m = init_model(c, 3);
  const std::vector<EncodedMessage> msgs = {
      {{0, 0, 1, 2, 3, 4}, 4},
      {{0, 5, 6, 7, 8, 9}, 5},
      {{0, 0, 0, 2, 9, 4}, 3},
      {{1, 3, 5, 7, 9, 11}, 6},
  };
  const int labels[] = {1, 0, 1, 0};
  const Tensor mask = constant(1, c.lstm_units, 1.0);
  const double lr = 0.05;
  double prev = 1e300;
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    Gradients grads = make_gradients(c);
    double loss = 0.0;
    for (std::size_t e = 0; e < msgs.size(); ++e) {
      ForwardTrace trace;
      forward_masked(msgs[e], m, mask, trace);
      loss += bce_loss(trace.score, labels[e]);
      backward_into(trace, labels[e], m, grads);
    }
    loss /= msgs.size();
    grads.scale(1.0 / msgs.size());
    if (step == 0) first = loss;
    last = loss;
    CHECK(loss <= prev + 1e-12);
    prev = loss;
    auto pt = m.tensors();
    auto gt = grads.tensors();
    for (std::size_t t = 0; t < pt.size(); ++t)
      for (std::size_t k = 0; k < pt[t]->size(); ++k)
        pt[t]->data()[k] -= lr * gt[t]->data()[k];
  }
  CHECK(last < first);
}
