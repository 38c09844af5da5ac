#include "seqclass/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <thread>

namespace seqclass {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::uint64_t parse_u64(std::string_view v, const std::string& key) {
  if (v.empty()) throw std::invalid_argument(key + ": empty value");
  std::uint64_t out = 0;
  for (char c : v) {
    if (c < '0' || c > '9')
      throw std::invalid_argument(key + ": expected unsigned integer, got '" +
                                  std::string(v) + "'");
    out = out * 10 + static_cast<std::uint64_t>(c - '0');
  }
  return out;
}

double parse_real(std::string_view v, const std::string& key) {
  const std::string s(v);
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(key + ": expected number, got '" + s + "'");
  }
  if (pos != s.size())
    throw std::invalid_argument(key + ": expected number, got '" + s + "'");
  return out;
}

bool parse_bool(std::string_view v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument(key + ": expected true or false, got '" +
                              std::string(v) + "'");
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

ModelConfig TrainingConfig::model_config() const {
  ModelConfig mc;
  mc.vocab_size = vocab_size;
  mc.embed_units = embed_units;
  mc.lstm_units = lstm_units;
  mc.max_len = max_len;
  mc.dropout = dropout;
  mc.activation = activation;
  return mc;
}

std::vector<std::pair<std::string, std::string>> parse_key_values(
    std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line = end == std::string_view::npos
                                ? text.substr(start)
                                : text.substr(start, end - start);
    ++line_no;
    if (const std::size_t hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const std::size_t eq = line.find('=');
      if (eq == std::string_view::npos)
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": expected key=value");
      const std::string_view key = trim(line.substr(0, eq));
      const std::string_view value = trim(line.substr(eq + 1));
      if (key.empty())
        throw std::invalid_argument("line " + std::to_string(line_no) +
                                    ": empty key");
      out.emplace_back(std::string(key), std::string(value));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

TrainingConfig training_config_from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  TrainingConfig c;
  for (const auto& [key, value] : pairs) {
    if (key == "epochs") c.epochs = parse_u64(value, key);
    else if (key == "batch_size") c.batch_size = parse_u64(value, key);
    else if (key == "optimizer") c.optimizer.kind = optimizer_from_string(value);
    else if (key == "learning_rate") c.optimizer.learning_rate = parse_real(value, key);
    else if (key == "clip_norm") c.optimizer.clip_norm = parse_real(value, key);
    else if (key == "seed") c.seed = parse_u64(value, key);
    else if (key == "max_len") c.max_len = parse_u64(value, key);
    else if (key == "vocab_size") c.vocab_size = parse_u64(value, key);
    else if (key == "embed_units") c.embed_units = parse_u64(value, key);
    else if (key == "lstm_units") c.lstm_units = parse_u64(value, key);
    else if (key == "dropout") {
      c.dropout = parse_real(value, key);
      if (!(c.dropout >= 0.0 && c.dropout < 1.0))
        throw std::invalid_argument("dropout must be in [0, 1), got " + value);
    }
    else if (key == "activation") c.activation = activation_from_string(value);
    else if (key == "shuffle") c.shuffle = parse_bool(value, key);
    else
      throw std::invalid_argument("unknown config key '" + key + "'");
  }
  return c;
}

std::string training_config_to_string(const TrainingConfig& c) {
  std::string out;
  out += "epochs=" + std::to_string(c.epochs) + "\n";
  out += "batch_size=" + std::to_string(c.batch_size) + "\n";
  out += "optimizer=" + std::string(to_string(c.optimizer.kind)) + "\n";
  out += "learning_rate=" + format_real(c.optimizer.learning_rate) + "\n";
  out += "clip_norm=" + format_real(c.optimizer.clip_norm) + "\n";
  out += "seed=" + std::to_string(c.seed) + "\n";
  out += "max_len=" + std::to_string(c.max_len) + "\n";
  out += "vocab_size=" + std::to_string(c.vocab_size) + "\n";
  out += "embed_units=" + std::to_string(c.embed_units) + "\n";
  out += "lstm_units=" + std::to_string(c.lstm_units) + "\n";
  out += "dropout=" + format_real(c.dropout) + "\n";
  out += "activation=" + std::string(to_string(c.activation)) + "\n";
  out += std::string("shuffle=") + (c.shuffle ? "true" : "false") + "\n";
  return out;
}

namespace {

void encode_dataset(const Dataset& data, const Vocabulary& vocab,
                    std::size_t max_len, std::vector<EncodedMessage>& msgs,
                    std::vector<int>& labels) {
  msgs.reserve(data.size());
  labels.reserve(data.size());
  for (const auto& ex : data.examples) {
    msgs.push_back(encode(tokenize(ex.text), vocab, max_len));
    labels.push_back(ex.label);
  }
}

Metrics reduce_metrics(const std::vector<double>& scores,
                       const std::vector<int>& labels, double threshold) {
  Metrics m;
  double loss_sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= threshold ? 1 : 0;
    if (pred == 1)
      (labels[i] == 1 ? m.tp : m.fp) += 1;
    else
      (labels[i] == 0 ? m.tn : m.fn) += 1;
    loss_sum += bce_loss(scores[i], labels[i]);
  }
  if (!scores.empty()) {
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(scores.size());
    m.mean_loss = loss_sum / static_cast<double>(scores.size());
  }
  return m;
}

}  // namespace

double decision_threshold(Activation act) {
  return act == Activation::sigmoid ? 0.5 : 0.0;
}

Metrics evaluate_encoded(const ModelParams& model,
                         const std::vector<EncodedMessage>& messages,
                         const std::vector<int>& labels, unsigned threads) {
  if (messages.size() != labels.size())
    throw std::invalid_argument("evaluate: message/label count mismatch");
  std::vector<double> scores(messages.size());
  const std::size_t n = messages.size();
  if (threads > 1 && n > 1) {
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += workers)
          scores[i] = forward_infer(messages[i], model);
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t i = 0; i < n; ++i)
      scores[i] = forward_infer(messages[i], model);
  }
  return reduce_metrics(scores, labels,
                        decision_threshold(model.config.activation));
}

Metrics evaluate(const ModelParams& model, const Vocabulary& vocab,
                 const Dataset& data, unsigned threads) {
  if (model.config.vocab_size != vocab.size())
    throw std::invalid_argument(
        "evaluate: model was built for vocabulary size " +
        std::to_string(model.config.vocab_size) + ", got " +
        std::to_string(vocab.size()));
  std::vector<EncodedMessage> msgs;
  std::vector<int> labels;
  encode_dataset(data, vocab, model.config.max_len, msgs, labels);
  return evaluate_encoded(model, msgs, labels, threads);
}

Prediction predict(const ModelParams& model, const Vocabulary& vocab,
                   std::string_view text) {
  const EncodedMessage msg =
      encode(tokenize(text), vocab, model.config.max_len);
  Prediction p;
  p.score = forward_infer(msg, model);
  p.label = p.score >= decision_threshold(model.config.activation) ? 1 : 0;
  return p;
}

std::pair<ModelParams, ExperimentReport> train_model(const Dataset& train,
                                                     const TrainingConfig& config,
                                                     const Vocabulary& vocab) {
  const auto started = std::chrono::steady_clock::now();
  if (train.empty()) throw std::invalid_argument("training dataset is empty");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (vocab.empty()) throw std::invalid_argument("vocabulary is empty");
  if (config.vocab_size != 0 && config.vocab_size != vocab.size())
    throw std::invalid_argument("config vocab_size " +
                                std::to_string(config.vocab_size) +
                                " does not match vocabulary of size " +
                                std::to_string(vocab.size()));

  TrainingConfig resolved = config;
  resolved.vocab_size = vocab.size();
  resolved.optimizer.learning_rate =
      config.optimizer.learning_rate == 0.0
          ? default_learning_rate(config.optimizer.kind)
          : config.optimizer.learning_rate;
  const ModelConfig mc = resolved.model_config();

  std::vector<EncodedMessage> msgs;
  std::vector<int> labels;
  encode_dataset(train, vocab, mc.max_len, msgs, labels);

  ModelParams model = init_model(mc, resolved.seed);
  Optimizer opt(resolved.optimizer, mc);
  // A stream separate from the init draws; feeds epoch shuffles and masks.
  Rng loop_rng(resolved.seed + 0x9E3779B97F4A7C15ull);

  ExperimentReport report;
  report.config = resolved;
  report.epoch_losses.reserve(resolved.epochs);

  const std::size_t n = msgs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  ForwardTrace trace;
  Gradients grads = make_gradients(mc);
  for (std::size_t epoch = 0; epoch < resolved.epochs; ++epoch) {
    if (resolved.shuffle) loop_rng.shuffle(order);
    double epoch_loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += resolved.batch_size) {
      const std::size_t stop = std::min(n, start + resolved.batch_size);
      grads.zero();
      double batch_loss = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        const Tensor mask = make_dropout_mask(mc.lstm_units, mc.dropout,
                                              Mode::train, loop_rng);
        const double score = forward_masked(msgs[idx], model, mask, trace);
        batch_loss += bce_loss(score, labels[idx]);
        backward_into(trace, labels[idx], model, grads);
      }
      const double batch_n = static_cast<double>(stop - start);
      if (!std::isfinite(batch_loss))
        throw TrainingFailure("non-finite loss at epoch " +
                              std::to_string(epoch + 1));
      grads.scale(1.0 / batch_n);
      opt.step(model, grads);
      epoch_loss_sum += batch_loss;
    }
    report.epoch_losses.push_back(epoch_loss_sum / static_cast<double>(n));
  }

  report.train = evaluate_encoded(model, msgs, labels);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  return {std::move(model), std::move(report)};
}

std::string report_csv_header() {
  return "embed_units,lstm_units,vocab_size,optimizer,batch_size,activation,"
         "seed,epochs,max_len,dropout,train_loss,train_acc,test_acc";
}

std::string report_csv_row(const ExperimentReport& r) {
  const TrainingConfig& c = r.config;
  std::string out;
  out += std::to_string(c.embed_units) + ",";
  out += std::to_string(c.lstm_units) + ",";
  out += std::to_string(c.vocab_size) + ",";
  out += std::string(to_string(c.optimizer.kind)) + ",";
  out += std::to_string(c.batch_size) + ",";
  out += std::string(to_string(c.activation)) + ",";
  out += std::to_string(c.seed) + ",";
  out += std::to_string(c.epochs) + ",";
  out += std::to_string(c.max_len) + ",";
  out += format_real(c.dropout) + ",";
  out += format_real(r.train.mean_loss) + ",";
  out += format_real(r.train.accuracy) + ",";
  out += format_real(r.test.accuracy);
  return out;
}

std::string report_summary(const ExperimentReport& r) {
  std::string out = "trained " + std::to_string(r.config.epochs) + " epochs (" +
                    std::string(to_string(r.config.optimizer.kind)) +
                    ", batch " + std::to_string(r.config.batch_size) + ") in " +
                    format_real(r.seconds) + "s\n";
  out += "final train loss " + format_real(r.train.mean_loss) +
         ", train accuracy " + format_real(r.train.accuracy);
  if (r.test.total() > 0)
    out += ", test accuracy " + format_real(r.test.accuracy);
  out += "\n";
  return out;
}

}  // namespace seqclass
