#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "seqclass/baseline.hpp"
#include "seqclass/model_io.hpp"
#include "seqclass/train.hpp"

namespace {

using namespace seqclass;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::invalid_argument("write failed: " + path);
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void print_metrics(const Metrics& m) {
  std::printf("accuracy %s (%zu/%zu)\n", format_real(m.accuracy).c_str(),
              m.tp + m.tn, m.total());
  std::printf("tp %zu  tn %zu  fp %zu  fn %zu\n", m.tp, m.tn, m.fp, m.fn);
  std::printf("mean loss %s\n", format_real(m.mean_loss).c_str());
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string train_path, test_path, vocab_path, out_dir;
  std::string config_path, report_path;
  std::string optimizer = "adam", activation = "sigmoid";
  std::size_t embed_units = 128, lstm_units = 128, batch_size = 64, epochs = 5,
              max_len = 50;
  double dropout = 0.5, learning_rate = 0.0, clip_norm = 0.0;
  std::uint64_t seed = 42;
};

TrainingConfig resolve_train_config(const TrainArgs& a, const CLI::App* cmd) {
  TrainingConfig cfg;
  if (a.config_path.empty()) {
    // Flags and their built-in defaults define the run outright.
    cfg.embed_units = a.embed_units;
    cfg.lstm_units = a.lstm_units;
    cfg.batch_size = a.batch_size;
    cfg.epochs = a.epochs;
    cfg.max_len = a.max_len;
    cfg.dropout = a.dropout;
    cfg.seed = a.seed;
    cfg.optimizer.kind = optimizer_from_string(a.optimizer);
    cfg.optimizer.learning_rate = a.learning_rate;
    cfg.optimizer.clip_norm = a.clip_norm;
    cfg.activation = activation_from_string(a.activation);
    return cfg;
  }
  cfg = training_config_from_pairs(parse_key_values(read_text_file(a.config_path)));
  // Only flags the user actually passed override the file.
  if (cmd->count("--embed-units")) cfg.embed_units = a.embed_units;
  if (cmd->count("--lstm-units")) cfg.lstm_units = a.lstm_units;
  if (cmd->count("--batch-size")) cfg.batch_size = a.batch_size;
  if (cmd->count("--epochs")) cfg.epochs = a.epochs;
  if (cmd->count("--max-len")) cfg.max_len = a.max_len;
  if (cmd->count("--dropout")) cfg.dropout = a.dropout;
  if (cmd->count("--seed")) cfg.seed = a.seed;
  if (cmd->count("--optimizer")) cfg.optimizer.kind = optimizer_from_string(a.optimizer);
  if (cmd->count("--learning-rate")) cfg.optimizer.learning_rate = a.learning_rate;
  if (cmd->count("--clip-norm")) cfg.optimizer.clip_norm = a.clip_norm;
  if (cmd->count("--activation")) cfg.activation = activation_from_string(a.activation);
  return cfg;
}

int run_train(const TrainArgs& a, const CLI::App* cmd) {
  const TrainingConfig cfg = resolve_train_config(a, cmd);
  const Dataset train_data = load_tsv(a.train_path);
  const Dataset test_data = load_tsv(a.test_path);
  const Vocabulary vocab = Vocabulary::load_tsv(a.vocab_path);

  auto [model, report] = train_model(train_data, cfg, vocab);
  report.test = evaluate(model, vocab, test_data);

  BundleMeta meta;
  meta.optimizer = std::string(to_string(report.config.optimizer.kind));
  meta.seed = report.config.seed;
  save_model(model, vocab, a.out_dir, meta);

  const std::string report_path =
      a.report_path.empty() ? a.out_dir + "/report.csv" : a.report_path;
  write_text_file(report_path,
                  report_csv_header() + "\n" + report_csv_row(report) + "\n");

  std::fputs(report_summary(report).c_str(), stdout);
  std::printf("model bundle written to %s\n", a.out_dir.c_str());
  return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepGrid {
  std::vector<std::size_t> embed_units{128};
  std::vector<std::size_t> lstm_units{128};
  std::vector<std::size_t> vocab_sizes;
  std::vector<OptimizerKind> optimizers{OptimizerKind::adam};
  std::vector<std::size_t> batch_sizes{64};
  std::vector<Activation> activations{Activation::sigmoid};
  TrainingConfig base;  // single-valued settings shared by every run
};

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = value.find(',', start);
    std::string_view item = comma == std::string_view::npos
                                ? value.substr(start)
                                : value.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) throw std::invalid_argument("empty list entry");
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::size_t> parse_size_list(std::string_view value,
                                         const std::string& key) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(value)) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != item.size())
      throw std::invalid_argument(key + ": bad value '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string require_single(std::string_view value, const std::string& key) {
  if (value.find(',') != std::string_view::npos)
    throw std::invalid_argument(key + " takes a single value, got a list");
  return std::string(value);
}

SweepGrid parse_grid(const std::string& text) {
  SweepGrid grid;
  bool saw_vocab = false;
  std::vector<std::pair<std::string, std::string>> singles;
  for (const auto& [key, value] : parse_key_values(text)) {
    if (key == "embed_units") {
      grid.embed_units = parse_size_list(value, key);
    } else if (key == "lstm_units") {
      grid.lstm_units = parse_size_list(value, key);
    } else if (key == "vocab_size") {
      grid.vocab_sizes = parse_size_list(value, key);
      saw_vocab = true;
    } else if (key == "optimizer") {
      grid.optimizers.clear();
      for (const std::string& item : split_list(value))
        grid.optimizers.push_back(optimizer_from_string(item));
    } else if (key == "batch_size") {
      grid.batch_sizes = parse_size_list(value, key);
    } else if (key == "activation") {
      grid.activations.clear();
      for (const std::string& item : split_list(value))
        grid.activations.push_back(activation_from_string(item));
    } else if (key == "epochs" || key == "seed" || key == "max_len" ||
               key == "dropout" || key == "learning_rate" ||
               key == "clip_norm" || key == "shuffle") {
      singles.emplace_back(key, require_single(value, key));
    } else {
      throw std::invalid_argument("unknown grid key '" + key + "'");
    }
  }
  grid.base = training_config_from_pairs(singles);
  if (!saw_vocab)
    throw std::invalid_argument("grid must set vocab_size (picks vocab_<V>.tsv)");
  return grid;
}

struct SweepRow {
  TrainingConfig config;
  bool ok = false;
  double train_acc = 0.0, test_acc = 0.0, seconds = 0.0;
  std::string error;
};

std::string sanitize_csv_field(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

struct SweepArgs {
  std::string grid_path, train_path, test_path, vocab_dir, out_path;
  unsigned parallel = 1;
};

unsigned thread_cap_from_env(unsigned requested) {
  const char* env = std::getenv("SEQCLASS_THREADS");
  if (!env || !*env) return requested;
  char* end = nullptr;
  const unsigned long cap = std::strtoul(env, &end, 10);
  if (end == env || *end != '\0' || cap == 0)
    throw std::invalid_argument("SEQCLASS_THREADS must be a positive integer");
  return static_cast<unsigned>(std::min<unsigned long>(requested, cap));
}

int run_sweep(const SweepArgs& a) {
  const SweepGrid grid = parse_grid(read_text_file(a.grid_path));
  const Dataset train_data = load_tsv(a.train_path);
  const Dataset test_data = load_tsv(a.test_path);

  // Load each requested vocabulary once, before any training starts.
  std::map<std::size_t, Vocabulary> vocabs;
  for (std::size_t v : grid.vocab_sizes) {
    if (vocabs.count(v)) continue;
    const std::string path = a.vocab_dir + "/vocab_" + std::to_string(v) + ".tsv";
    Vocabulary vocab = Vocabulary::load_tsv(path);
    if (vocab.size() != v)
      throw std::invalid_argument(path + " holds " + std::to_string(vocab.size()) +
                                  " tokens, expected " + std::to_string(v));
    vocabs.emplace(v, std::move(vocab));
  }

  std::vector<SweepRow> rows;
  for (std::size_t e : grid.embed_units)
    for (std::size_t l : grid.lstm_units)
      for (std::size_t v : grid.vocab_sizes)
        for (OptimizerKind o : grid.optimizers)
          for (std::size_t b : grid.batch_sizes)
            for (Activation act : grid.activations) {
              SweepRow row;
              row.config = grid.base;
              row.config.embed_units = e;
              row.config.lstm_units = l;
              row.config.vocab_size = v;
              row.config.optimizer.kind = o;
              row.config.batch_size = b;
              row.config.activation = act;
              rows.push_back(std::move(row));
            }

  std::printf("sweep: %zu runs (%zu embed x %zu lstm x %zu vocab x %zu optimizer "
              "x %zu batch x %zu activation)\n",
              rows.size(), grid.embed_units.size(), grid.lstm_units.size(),
              grid.vocab_sizes.size(), grid.optimizers.size(),
              grid.batch_sizes.size(), grid.activations.size());
  std::fflush(stdout);

  const unsigned workers = std::max(1u, std::min<unsigned>(
      thread_cap_from_env(a.parallel), static_cast<unsigned>(rows.size())));

  auto run_one = [&](SweepRow& row) {
    const auto started = std::chrono::steady_clock::now();
    try {
      const Vocabulary& vocab = vocabs.at(row.config.vocab_size);
      auto [model, report] = train_model(train_data, row.config, vocab);
      report.test = evaluate(model, vocab, test_data);
      row.train_acc = report.train.accuracy;
      row.test_acc = report.test.accuracy;
      row.ok = true;
    } catch (const std::exception& ex) {
      row.error = ex.what();
    }
    row.seconds = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - started).count();
    const std::string status =
        row.ok ? "test_acc " + format_real(row.test_acc) : row.error;
    std::fprintf(stderr, "  embed=%zu lstm=%zu vocab=%zu %s batch=%zu %s: %s\n",
                 row.config.embed_units, row.config.lstm_units,
                 row.config.vocab_size,
                 std::string(to_string(row.config.optimizer.kind)).c_str(),
                 row.config.batch_size,
                 std::string(to_string(row.config.activation)).c_str(),
                 status.c_str());
  };

  if (workers <= 1) {
    for (SweepRow& row : rows) run_one(row);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t k = next.fetch_add(1);
          if (k >= rows.size()) break;
          run_one(rows[k]);
        }
      });
    for (auto& t : pool) t.join();
  }

  // Rows are buffered and written in grid order, independent of which worker
  // finished first.
  std::string csv =
      "embed_units,lstm_units,vocab_size,optimizer,batch_size,activation,seed,"
      "train_acc,test_acc,seconds,status\n";
  std::size_t failures = 0;
  for (const SweepRow& row : rows) {
    const TrainingConfig& c = row.config;
    char buf[64];
    csv += std::to_string(c.embed_units) + ",";
    csv += std::to_string(c.lstm_units) + ",";
    csv += std::to_string(c.vocab_size) + ",";
    csv += std::string(to_string(c.optimizer.kind)) + ",";
    csv += std::to_string(c.batch_size) + ",";
    csv += std::string(to_string(c.activation)) + ",";
    csv += std::to_string(c.seed) + ",";
    if (row.ok) {
      csv += format_real(row.train_acc) + "," + format_real(row.test_acc) + ",";
    } else {
      csv += ",,";
      ++failures;
    }
    std::snprintf(buf, sizeof(buf), "%.3f", row.seconds);
    csv += buf;
    csv += ",";
    csv += row.ok ? "ok" : "failed: " + sanitize_csv_field(row.error);
    csv += "\n";
  }
  write_text_file(a.out_path, csv);
  std::printf("%zu rows written to %s\n", rows.size(), a.out_path.c_str());
  if (failures > 0) {
    std::fprintf(stderr, "%zu of %zu runs failed\n", failures, rows.size());
    return 1;
  }
  return 0;
}

// ---- predict --------------------------------------------------------------

std::pair<std::string, std::string> parse_labels(const std::string& labels) {
  const std::size_t comma = labels.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 >= labels.size())
    throw std::invalid_argument(
        "--labels wants two comma-separated names, e.g. \"NEG,POS\"");
  return {labels.substr(0, comma), labels.substr(comma + 1)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM text-sequence classifier: training, evaluation, sweeps"};
  app.require_subcommand(1);

  // build-vocab
  std::string bv_input, bv_out;
  std::size_t bv_max = 20000;
  auto* bv = app.add_subcommand("build-vocab",
                                "Build a frequency-ranked vocabulary from a TSV");
  bv->add_option("--input", bv_input, "labeled TSV corpus")->required();
  bv->add_option("--max-vocab", bv_max, "keep at most this many tokens");
  bv->add_option("--out", bv_out, "output vocabulary TSV")->required();

  // train
  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a model and save the bundle");
  tr->add_option("--train", ta.train_path, "training TSV")->required();
  tr->add_option("--test", ta.test_path, "test TSV")->required();
  tr->add_option("--vocab", ta.vocab_path, "vocabulary TSV")->required();
  tr->add_option("--out", ta.out_dir, "output bundle directory")->required();
  tr->add_option("--config", ta.config_path, "key=value config file");
  tr->add_option("--report", ta.report_path,
                 "report CSV path (default <out>/report.csv)");
  tr->add_option("--embed-units", ta.embed_units, "embedding width");
  tr->add_option("--lstm-units", ta.lstm_units, "recurrent width");
  tr->add_option("--dropout", ta.dropout, "dropout rate in [0,1)");
  tr->add_option("--optimizer", ta.optimizer, "sgd|adam|adagrad|rmsprop");
  tr->add_option("--learning-rate", ta.learning_rate,
                 "step size (0 picks the optimizer default)");
  tr->add_option("--clip-norm", ta.clip_norm, "global gradient-norm cap (0 off)");
  tr->add_option("--batch-size", ta.batch_size, "examples per update");
  tr->add_option("--epochs", ta.epochs, "training passes");
  tr->add_option("--max-len", ta.max_len, "sequence length L");
  tr->add_option("--activation", ta.activation, "sigmoid|tanh");
  tr->add_option("--seed", ta.seed, "rng seed");

  // eval
  std::string ev_model, ev_data;
  unsigned ev_threads = 0;
  auto* ev = app.add_subcommand("eval", "Evaluate a saved model on a TSV");
  ev->add_option("--model", ev_model, "bundle directory")->required();
  ev->add_option("--data", ev_data, "labeled TSV")->required();
  ev->add_option("--threads", ev_threads, "parallel scoring threads");

  // predict
  std::string pr_model, pr_text, pr_labels = "NON-ACTIONABLE,ACTIONABLE";
  bool pr_stdin = false;
  auto* pr = app.add_subcommand("predict", "Score messages with a saved model");
  pr->add_option("--model", pr_model, "bundle directory")->required();
  auto* pr_text_opt = pr->add_option("--text", pr_text, "one message to score");
  auto* pr_stdin_opt =
      pr->add_flag("--stdin", pr_stdin, "score each line read from stdin");
  pr_text_opt->excludes(pr_stdin_opt);
  pr->add_option("--labels", pr_labels, "negative,positive display names");

  // sweep
  SweepArgs sa;
  auto* sw = app.add_subcommand("sweep", "Train every point of a config grid");
  sw->add_option("--grid", sa.grid_path, "key=value grid (comma lists = axes)")
      ->required();
  sw->add_option("--train", sa.train_path, "training TSV")->required();
  sw->add_option("--test", sa.test_path, "test TSV")->required();
  sw->add_option("--vocab-dir", sa.vocab_dir,
                 "directory holding vocab_<V>.tsv files")->required();
  sw->add_option("--out", sa.out_path, "output CSV")->required();
  sw->add_option("--parallel", sa.parallel,
                 "concurrent runs (SEQCLASS_THREADS caps this)");

  // gen-synth
  std::string gs_task = "keyword", gs_out;
  std::size_t gs_n = 1000, gs_vocab = 100;
  std::uint64_t gs_seed = 42;
  auto* gs = app.add_subcommand("gen-synth", "Generate a synthetic labeled TSV");
  gs->add_option("--task", gs_task, "keyword|order");
  gs->add_option("--n", gs_n, "example count");
  gs->add_option("--vocab-size", gs_vocab, "filler token pool size");
  gs->add_option("--seed", gs_seed, "rng seed");
  gs->add_option("--out", gs_out, "output TSV")->required();

  // split
  std::string sp_input, sp_train, sp_test;
  double sp_ratio = 0.8;
  bool sp_balanced = false;
  std::uint64_t sp_seed = 42;
  auto* sp = app.add_subcommand("split", "Shuffle and partition a labeled TSV");
  sp->add_option("--input", sp_input, "labeled TSV")->required();
  sp->add_option("--ratio", sp_ratio, "train fraction in (0,1)");
  sp->add_flag("--balanced", sp_balanced, "equalize class counts first");
  sp->add_option("--seed", sp_seed, "rng seed");
  sp->add_option("--out-train", sp_train, "training TSV")->required();
  sp->add_option("--out-test", sp_test, "test TSV")->required();

  try {
    app.parse(argc, argv);

    if (bv->parsed()) {
      const Dataset data = load_tsv(bv_input);
      const Vocabulary vocab = build_vocabulary(data, bv_max);
      vocab.save_tsv(bv_out);
      std::printf("vocabulary of %zu tokens written to %s\n", vocab.size(),
                  bv_out.c_str());
      return 0;
    }
    if (tr->parsed()) return run_train(ta, tr);
    if (ev->parsed()) {
      const LoadedModel loaded = load_model(ev_model);
      const Metrics m = evaluate(loaded.model, loaded.vocab, load_tsv(ev_data),
                                 ev_threads);
      print_metrics(m);
      return 0;
    }
    if (pr->parsed()) {
      const LoadedModel loaded = load_model(pr_model);
      const auto [neg, pos] = parse_labels(pr_labels);
      auto emit = [&](const std::string& line) {
        const Prediction p = predict(loaded.model, loaded.vocab, line);
        std::printf("%s\t%s\n", format_real(p.score).c_str(),
                    (p.label == 1 ? pos : neg).c_str());
      };
      if (pr_stdin) {
        std::string line;
        while (std::getline(std::cin, line)) emit(line);
      } else if (pr_text_opt->count()) {
        emit(pr_text);
      } else {
        throw std::invalid_argument("predict wants --text or --stdin");
      }
      return 0;
    }
    if (sw->parsed()) return run_sweep(sa);
    if (gs->parsed()) {
      const Dataset data = gen_synthetic(synthetic_task_from_string(gs_task),
                                         gs_n, gs_vocab, gs_seed);
      save_tsv(data, gs_out);
      std::printf("%zu examples written to %s\n", data.size(), gs_out.c_str());
      return 0;
    }
    if (sp->parsed()) {
      Dataset data = load_tsv(sp_input);
      if (sp_balanced) data = balanced_sample(data, sp_seed);
      auto [train_part, test_part] = split(data, sp_ratio, sp_seed);
      save_tsv(train_part, sp_train);
      save_tsv(test_part, sp_test);
      std::printf("%zu train / %zu test examples written\n", train_part.size(),
                  test_part.size());
      return 0;
    }
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const TrainingFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
