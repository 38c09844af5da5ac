// Acceptance harness: each criterion prints one [PASS]/[FAIL] line and the
// binary exits nonzero if anything failed. An optional argv[1] runs a single
// criterion by name.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "seqclass/baseline.hpp"
#include "seqclass/model_io.hpp"
#include "seqclass/train.hpp"

#ifndef SEQCLASS_BIN
#error "SEQCLASS_BIN must point at the command-line binary"
#endif

using namespace seqclass;
namespace fs = std::filesystem;

namespace {

// ---- small utilities -------------------------------------------------------

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

int run_cmd(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

fs::path fresh_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("seqclass_accept_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ---- gradient correctness --------------------------------------------------
// Every analytic parameter gradient matches central finite differences
// (eps = 1e-5, dropout mask held fixed) with relative error below 1e-4,
// for at least five seeds of a (V=20, d_e=4, d_h=3, L=6) network.

std::string check_gradients() {
  ModelConfig config;
  config.vocab_size = 20;
  config.embed_units = 4;
  config.lstm_units = 3;
  config.max_len = 6;
  config.dropout = 0.0;

  const double eps = 1e-5;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ModelParams model = init_model(config, seed);
    Rng rng(seed * 1000 + 1);
    EncodedMessage msg;
    const std::size_t pads = seed % 3;
    for (std::size_t t = 0; t < config.max_len; ++t)
      msg.indices.push_back(
          t < pads ? 0u : static_cast<std::uint32_t>(rng.below(22)));
    msg.original_len = config.max_len - pads;
    const int label = static_cast<int>(seed & 1);
    const Tensor mask = constant(1, config.lstm_units, 1.0);

    ForwardTrace trace;
    forward_masked(msg, model, mask, trace);
    Gradients grads = backward(trace, label, model);

    auto params = model.tensors();
    auto analytic = grads.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
      Tensor& p = *params[t];
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (t == 0 && k < p.cols()) {
          // the padding row is frozen; its analytic gradient must be zero
          if (analytic[t]->data()[k] != 0.0)
            return fmt("seed %llu: padding row gradient is %.3e, want 0",
                       (unsigned long long)seed, analytic[t]->data()[k]);
          continue;
        }
        double* coord = p.data() + k;
        const double saved = *coord;
        *coord = saved + eps;
        forward_masked(msg, model, mask, trace);
        const double up = bce_loss(trace.score, label);
        *coord = saved - eps;
        forward_masked(msg, model, mask, trace);
        const double down = bce_loss(trace.score, label);
        *coord = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double a = analytic[t]->data()[k];
        const double diff = std::abs(a - numeric);
        const double scale = std::max(std::abs(a), std::abs(numeric));
        if (diff >= 1e-4 * scale && diff >= 1e-7)
          return fmt("seed %llu tensor %zu coord %zu: analytic %.10e vs "
                     "numeric %.10e (rel %.3e)",
                     (unsigned long long)seed, t, k, a, numeric,
                     scale > 0 ? diff / scale : diff);
      }
    }
  }
  return "";
}

// ---- memorization ----------------------------------------------------------
// A 32-example keyword corpus is memorized to training accuracy 1.0 within
// 200 epochs (adam, d_e = d_h = 16, batch 8).

std::string check_memorization() {
  const Dataset data = gen_synthetic(SyntheticTask::keyword, 32, 40, 11);
  const Vocabulary vocab = build_vocabulary(data, 60);
  TrainingConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 8;
  cfg.embed_units = 16;
  cfg.lstm_units = 16;
  cfg.max_len = 20;
  cfg.dropout = 0.5;
  cfg.optimizer.kind = OptimizerKind::adam;
  cfg.seed = 42;
  const auto [model, report] = train_model(data, cfg, vocab);
  if (report.train.accuracy != 1.0)
    return fmt("train accuracy %.4f after %zu epochs, want 1.0",
               report.train.accuracy, cfg.epochs);
  return "";
}

// ---- generalization --------------------------------------------------------
// Keyword task, 10,000 train / 2,500 test, V = 200: test accuracy >= 0.95.

std::string check_generalization() {
  const Dataset all = gen_synthetic(SyntheticTask::keyword, 12500, 400, 3);
  const auto [train_data, test_data] = split(all, 0.8, 3);
  if (train_data.size() != 10000 || test_data.size() != 2500)
    return fmt("split gave %zu/%zu, want 10000/2500", train_data.size(),
               test_data.size());
  const Vocabulary vocab = build_vocabulary(train_data, 200);
  if (vocab.size() != 200)
    return fmt("vocabulary has %zu tokens, want 200", vocab.size());
  TrainingConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  cfg.embed_units = 32;
  cfg.lstm_units = 32;
  cfg.max_len = 20;
  cfg.dropout = 0.5;
  cfg.seed = 42;
  const auto [model, report] = train_model(train_data, cfg, vocab);
  const Metrics test = evaluate(model, vocab, test_data);
  if (test.accuracy < 0.95)
    return fmt("test accuracy %.4f, want >= 0.95", test.accuracy);
  return "";
}

// ---- order-vs-bag separation -----------------------------------------------
// On the order task (identical bag-of-words per class) the recurrent model
// reaches >= 0.90 test accuracy while both linear baselines stay <= 0.60.

std::string check_separation() {
  const Dataset all = gen_synthetic(SyntheticTask::order, 12500, 60, 4);
  const auto [train_data, test_data] = split(all, 0.8, 4);
  const Vocabulary vocab = build_vocabulary(train_data, 100);

  TrainingConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 64;
  cfg.embed_units = 32;
  cfg.lstm_units = 32;
  cfg.max_len = 20;
  cfg.dropout = 0.2;
  cfg.seed = 42;
  const auto [model, report] = train_model(train_data, cfg, vocab);
  const Metrics lstm = evaluate(model, vocab, test_data);
  if (lstm.accuracy < 0.90)
    return fmt("recurrent test accuracy %.4f, want >= 0.90", lstm.accuracy);

  for (BaselineKind kind : {BaselineKind::logreg, BaselineKind::perceptron}) {
    const LinearModel lin = train_baseline(kind, train_data, vocab, 10, 42);
    const Metrics m = baseline_evaluate(lin, vocab, test_data);
    if (m.accuracy > 0.60)
      return fmt("%s test accuracy %.4f, want <= 0.60 on an order-only task",
                 std::string(to_string(kind)).c_str(), m.accuracy);
  }
  return "";
}

// ---- hyperparameter sweep ----------------------------------------------------
// The {16,32,64,128} x {32,64} x {adam,adagrad,rmsprop} grid completes with
// 24 CSV rows and every adam run lands within 0.05 of the best test accuracy.

std::string check_sweep() {
  const fs::path dir = fresh_dir("sweep");
  const std::string bin = SEQCLASS_BIN;
  const fs::path data = dir / "data.tsv";
  const fs::path train = dir / "train.tsv";
  const fs::path test = dir / "test.tsv";
  const fs::path vocab_dir = dir / "vocabs";
  fs::create_directories(vocab_dir);

  if (run_cmd(bin + " gen-synth --task keyword --n 5000 --vocab-size 400" +
              " --seed 5 --out " + data.string() + " > /dev/null") != 0)
    return "gen-synth failed";
  if (run_cmd(bin + " split --input " + data.string() +
              " --ratio 0.8 --seed 5 --out-train " + train.string() +
              " --out-test " + test.string() + " > /dev/null") != 0)
    return "split failed";
  if (run_cmd(bin + " build-vocab --input " + train.string() +
              " --max-vocab 200 --out " + (vocab_dir / "vocab_200.tsv").string() +
              " > /dev/null") != 0)
    return "build-vocab failed";

  const fs::path grid = dir / "grid.txt";
  std::ofstream(grid) << "embed_units = 16,32,64,128\n"
                      << "lstm_units = 32,64\n"
                      << "vocab_size = 200\n"
                      << "optimizer = adam,adagrad,rmsprop\n"
                      << "epochs = 3\n"
                      << "max_len = 20\n"
                      << "seed = 42\n";
  const fs::path out = dir / "sweep.csv";
  if (run_cmd(bin + " sweep --grid " + grid.string() + " --train " +
              train.string() + " --test " + test.string() + " --vocab-dir " +
              vocab_dir.string() + " --out " + out.string() +
              " --parallel 4 > /dev/null 2>&1") != 0)
    return "sweep exited nonzero";

  const auto rows = lines_of(slurp(out));
  if (rows.size() != 25)
    return fmt("sweep wrote %zu lines, want header + 24 rows", rows.size());

  double best = 0.0;
  std::vector<double> adam_accs;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto fields = split_csv(rows[r]);
    if (fields.size() != 11 || fields[10] != "ok")
      return fmt("row %zu is not ok: %s", r, rows[r].c_str());
    const double acc = std::stod(fields[8]);
    best = std::max(best, acc);
    if (fields[3] == "adam") adam_accs.push_back(acc);
  }
  if (adam_accs.size() != 8)
    return fmt("found %zu adam rows, want 8", adam_accs.size());
  for (double acc : adam_accs)
    if (best - acc > 0.05)
      return fmt("an adam run scored %.4f but the best run scored %.4f", acc,
                 best);
  fs::remove_all(dir);
  return "";
}

// ---- vocabulary size study ---------------------------------------------------
// With every trigger token inside both vocabularies, V=200 and V=50 differ in
// test accuracy by less than 0.05.

std::string check_vocab_study() {
  const Dataset all = gen_synthetic(SyntheticTask::keyword, 6000, 400, 6);
  const auto [train_data, test_data] = split(all, 0.8, 6);
  const Vocabulary v200 = build_vocabulary(train_data, 200);
  const Vocabulary v50 = build_vocabulary(train_data, 50);
  if (v200.size() != 200 || v50.size() != 50)
    return fmt("vocabularies hold %zu and %zu tokens, want 200 and 50",
               v200.size(), v50.size());
  for (const auto& trigger : keyword_triggers()) {
    if (!v200.contains(trigger)) return "trigger '" + trigger + "' missing from V=200";
    if (!v50.contains(trigger)) return "trigger '" + trigger + "' missing from V=50";
  }

  TrainingConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 64;
  cfg.embed_units = 16;
  cfg.lstm_units = 16;
  cfg.max_len = 20;
  cfg.dropout = 0.5;
  cfg.seed = 42;
  const auto [m200, r200] = train_model(train_data, cfg, v200);
  const double acc200 = evaluate(m200, v200, test_data).accuracy;
  const auto [m50, r50] = train_model(train_data, cfg, v50);
  const double acc50 = evaluate(m50, v50, test_data).accuracy;
  if (std::abs(acc200 - acc50) >= 0.05)
    return fmt("V=200 scored %.4f, V=50 scored %.4f; gap %.4f, want < 0.05",
               acc200, acc50, std::abs(acc200 - acc50));
  return "";
}

// ---- determinism -------------------------------------------------------------
// Two cmd-line training runs with identical flags and seed write byte-identical
// model bundles and reports.

std::string check_determinism() {
  const fs::path dir = fresh_dir("determinism");
  const std::string bin = SEQCLASS_BIN;
  const fs::path data = dir / "data.tsv";
  const fs::path train = dir / "train.tsv";
  const fs::path test = dir / "test.tsv";
  const fs::path vocab = dir / "vocab.tsv";

  if (run_cmd(bin + " gen-synth --task keyword --n 400 --vocab-size 60" +
              " --seed 7 --out " + data.string() + " > /dev/null") != 0)
    return "gen-synth failed";
  if (run_cmd(bin + " split --input " + data.string() +
              " --ratio 0.8 --seed 7 --out-train " + train.string() +
              " --out-test " + test.string() + " > /dev/null") != 0)
    return "split failed";
  if (run_cmd(bin + " build-vocab --input " + train.string() +
              " --max-vocab 100 --out " + vocab.string() + " > /dev/null") != 0)
    return "build-vocab failed";

  const std::string tail = " --train " + train.string() + " --test " +
                           test.string() + " --vocab " + vocab.string() +
                           " --embed-units 8 --lstm-units 8 --epochs 2" +
                           " --max-len 20 --seed 5 > /dev/null";
  const fs::path m1 = dir / "model1";
  const fs::path m2 = dir / "model2";
  if (run_cmd(bin + " train --out " + m1.string() + tail) != 0)
    return "first training run failed";
  if (run_cmd(bin + " train --out " + m2.string() + tail) != 0)
    return "second training run failed";

  for (const char* f : {"manifest.txt", "weights.bin", "vocab.tsv", "report.csv"})
    if (slurp(m1 / f) != slurp(m2 / f))
      return std::string(f) + " differs between the two runs";
  fs::remove_all(dir);
  return "";
}

// ---- save/load round trip ------------------------------------------------
// The persisted bundle fully determines predictions: loading a saved model,
// saving it again, and loading that gives bitwise-identical scores on 100
// probe messages, and the weight blob is a fixed point of save followed by
// load. Scores of the freshly trained (double precision) model agree with the
// loaded (32-bit) model to well within float rounding.

std::string check_round_trip() {
  const Dataset data = gen_synthetic(SyntheticTask::keyword, 64, 40, 21);
  const Vocabulary vocab = build_vocabulary(data, 60);
  TrainingConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.embed_units = 8;
  cfg.lstm_units = 8;
  cfg.max_len = 20;
  cfg.seed = 9;
  const auto [model, report] = train_model(data, cfg, vocab);

  const fs::path d1 = fresh_dir("round_trip_a");
  const fs::path d2 = fresh_dir("round_trip_b");
  save_model(model, vocab, d1);
  const LoadedModel m1 = load_model(d1);
  save_model(m1.model, m1.vocab, d2);
  const LoadedModel m2 = load_model(d2);

  if (slurp(d1 / "weights.bin") != slurp(d2 / "weights.bin"))
    return "weight blob changed across a save/load/save cycle";

  const Dataset probes = gen_synthetic(SyntheticTask::keyword, 100, 40, 99);
  for (std::size_t k = 0; k < probes.examples.size(); ++k) {
    const std::string& text = probes.examples[k].text;
    const double s1 = predict(m1.model, m1.vocab, text).score;
    const double s2 = predict(m2.model, m2.vocab, text).score;
    if (s1 != s2)
      return fmt("probe %zu: scores %.17g and %.17g differ after a round trip",
                 k, s1, s2);
    const double orig = predict(model, vocab, text).score;
    if (std::abs(orig - s1) >= 1e-3)
      return fmt("probe %zu: 32-bit score %.17g drifted from %.17g", k, s1, orig);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
  return "";
}

// ---- encoder examples ------------------------------------------------------
// "the school" encodes to [1, 125] under a vocabulary ranking "the" first and
// "school" 125th; unknown tokens map to V+1; shorter messages are pre-padded
// with zeros and longer ones truncated to their first L tokens.

std::string check_encoder() {
  std::vector<std::pair<std::string, std::uint64_t>> entries;
  entries.emplace_back("the", 100000);
  for (int k = 0; k < 123; ++k)
    entries.emplace_back("f" + std::to_string(k), 99000 - k);
  entries.emplace_back("school", 500);
  const Vocabulary vocab(entries);
  if (vocab.index_of("the") != 1 || vocab.index_of("school") != 125)
    return "constructed vocabulary does not rank the probe tokens as 1 and 125";

  const EncodedMessage two = encode(tokenize("the school"), vocab, 2);
  if (two.indices != std::vector<std::uint32_t>{1, 125})
    return "\"the school\" did not encode to [1, 125]";

  if (vocab.oov_index() != 126) return "OOV index is not V+1";
  const EncodedMessage oov = encode(tokenize("the zzz"), vocab, 2);
  if (oov.indices != std::vector<std::uint32_t>{1, 126})
    return "unknown token did not map to index V+1";

  const EncodedMessage padded = encode(tokenize("the school"), vocab, 5);
  if (padded.indices != std::vector<std::uint32_t>{0, 0, 0, 1, 125})
    return "short message was not pre-padded with zeros";

  const EncodedMessage cut =
      encode({"the", "school", "f0", "f1", "f2", "f3"}, vocab, 4);
  if (cut.indices != std::vector<std::uint32_t>{1, 125, 2, 3})
    return "long message was not truncated to its first tokens";
  return "";
}

struct Criterion {
  const char* name;
  std::function<std::string()> run;
  double budget_seconds;  // 0 = no stated bound
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {"gradient-check", check_gradients, 60.0},
      {"memorization", check_memorization, 60.0},
      {"generalization", check_generalization, 300.0},
      {"separation", check_separation, 0.0},
      {"sweep", check_sweep, 1800.0},
      {"vocab-study", check_vocab_study, 0.0},
      {"determinism", check_determinism, 0.0},
      {"round-trip", check_round_trip, 0.0},
      {"encoder", check_encoder, 0.0},
  };

  const std::string filter = argc > 1 ? argv[1] : "";
  bool ran_any = false;
  bool all_passed = true;
  for (const Criterion& c : criteria) {
    if (!filter.empty() && filter != c.name) continue;
    ran_any = true;
    const auto started = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      detail = std::string("unexpected exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
            .count();
    if (detail.empty() && c.budget_seconds > 0 && seconds >= c.budget_seconds)
      detail = fmt("took %.1fs, budget is %.0fs", seconds, c.budget_seconds);
    if (detail.empty()) {
      std::printf("[PASS] %s (%.1fs)\n", c.name, seconds);
    } else {
      std::printf("[FAIL] %s: %s (%.1fs)\n", c.name, detail.c_str(), seconds);
      all_passed = false;
    }
    std::fflush(stdout);
  }
  if (!ran_any) {
    std::fprintf(stderr, "unknown criterion '%s'\n", filter.c_str());
    return 2;
  }
  return all_passed ? 0 : 1;
}
