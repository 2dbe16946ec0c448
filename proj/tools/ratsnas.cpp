#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "ratsnas/bench_io.hpp"
#include "ratsnas/errors.hpp"
#include "ratsnas/metrics.hpp"
#include "ratsnas/predictors.hpp"
#include "ratsnas/rng.hpp"
#include "ratsnas/search.hpp"

namespace {

using namespace ratsnas;

std::uint64_t default_seed() {
  const char* env = std::getenv("RATS_SEED");
  if (!env || !*env) return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0') {
    throw Error("RATS_SEED is not an unsigned integer");
  }
  return v;
}

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::size_t default_jobs() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

// Runs fn(0..runs-1) on up to `jobs` threads; the first exception wins and is
// rethrown after all workers drain.
template <typename Fn>
void parallel_runs(std::size_t runs, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, runs));
  if (jobs == 1) {
    for (std::size_t r = 0; r < runs; ++r) fn(r);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t r = next.fetch_add(1);
      if (r >= runs) return;
      try {
        fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(jobs);
  for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
  for (std::thread& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> accuracies_of(const SearchSpace& space) {
  std::vector<double> out;
  out.reserve(space.entries.size());
  for (const BenchmarkEntry& e : space.entries) out.push_back(e.accuracy);
  return out;
}

PredictorConfig make_config(const std::string& kind, std::size_t layers,
                            std::size_t hidden, const Benchmark& bench) {
  PredictorConfig config;
  config.kind = predictor_kind_from_string(kind);
  config.layers = layers;
  config.hidden = hidden;
  config.vocab_size = bench.vocab.size();
  config.max_nodes = bench.max_nodes;
  return config;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

struct GenSynthArgs {
  std::string out;
  SynthSpec spec;
};

int cmd_gen_synth(const GenSynthArgs& args) {
  const Benchmark bench = gen_synthetic(args.spec);
  save_benchmark(args.out, bench);
  double optimum = 0.0;
  for (const BenchmarkEntry& e : bench.space.entries) {
    optimum = std::max(optimum, e.accuracy);
  }
  std::cout << "cells=" << bench.space.entries.size()
            << " optimum=" << fmt(optimum, 9) << " file=" << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string bench_path;
  std::string kind = "rats-gcn";
  std::size_t budget = 30;
  std::size_t runs = 1;
  std::size_t topk = 100;
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::size_t hidden = 32;
  std::size_t layers = 3;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string csv;
  std::string save_params;
};

int cmd_eval_predictor(const EvalArgs& args) {
  const Benchmark bench = load_benchmark(args.bench_path);
  const SearchSpace& space = bench.space;
  const std::vector<double> truth = accuracies_of(space);
  const bool oracle = args.kind == "oracle";
  if (!oracle && args.budget > space.entries.size()) {
    throw KTooLargeError("eval: budget exceeds space size");
  }
  if (!args.save_params.empty() && oracle) {
    throw Error("eval: the oracle stub has no parameters to save");
  }

  struct Row {
    std::uint64_t seed = 0;
    double m_acc = 0.0, psp = 0.0;
  };
  std::vector<Row> rows(args.runs);
  std::optional<PredictorParams> first_params;
  std::optional<PredictorConfig> first_config;

  parallel_runs(args.runs, oracle ? 1 : args.jobs, [&](std::size_t r) {
    const std::uint64_t run_seed = mix_seed(args.seed, r);
    std::vector<double> scores;
    if (oracle) {
      scores = truth;
    } else {
      const PredictorConfig config =
          make_config(args.kind, args.layers, args.hidden, bench);
      Rng pool_rng(mix_seed(run_seed, 3));
      std::vector<TrainExample> pool;
      pool.reserve(args.budget);
      for (std::size_t idx : pool_rng.sample_without_replacement(
               space.entries.size(), args.budget)) {
        pool.push_back({space.entries[idx].cell, space.entries[idx].accuracy});
      }
      TrainOptions train;
      train.epochs = args.epochs;
      train.lr = args.lr;
      train.seed = run_seed;
      TrainResult result = train_predictor(config, pool, train);
      scores = predict_all(config, result.params, space);
      if (r == 0 && !args.save_params.empty()) {
        first_params = std::move(result.params);
        first_config = config;
      }
    }
    rows[r] = {run_seed, mean_topk(scores, space, args.topk),
               spearman(scores, truth)};
  });

  double sum_macc = 0.0, sum_psp = 0.0;
  for (std::size_t r = 0; r < args.runs; ++r) {
    std::cout << "run=" << r << " seed=" << rows[r].seed
              << " m_acc=" << fmt(rows[r].m_acc) << " psp=" << fmt(rows[r].psp)
              << "\n";
    sum_macc += rows[r].m_acc;
    sum_psp += rows[r].psp;
  }
  std::cout << "mean m_acc=" << fmt(sum_macc / double(args.runs))
            << " psp=" << fmt(sum_psp / double(args.runs)) << " runs="
            << args.runs << " kind=" << args.kind << " budget=" << args.budget
            << "\n";

  if (!args.csv.empty()) {
    std::ofstream out = open_out(args.csv);
    out << "run,seed,budget,kind,m_acc,psp\n";
    for (std::size_t r = 0; r < args.runs; ++r) {
      out << r << "," << rows[r].seed << "," << args.budget << "," << args.kind
          << "," << fmt(rows[r].m_acc) << "," << fmt(rows[r].psp) << "\n";
    }
  }
  if (first_params) {
    save_predictor(args.save_params, *first_config, *first_params);
  }
  return 0;
}

struct SearchArgs {
  std::string bench_path;
  std::string kind = "rats-gcn";
  std::size_t k = 10;
  std::size_t budget = 150;
  std::size_t runs = 1;
  bool stop_at_optimum = false;
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::size_t hidden = 32;
  std::size_t layers = 3;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string fallback = "keep";
  std::string csv;
  std::string events_dir;
};

int cmd_search(const SearchArgs& args) {
  const Benchmark bench = load_benchmark(args.bench_path);
  const SearchSpace& space = bench.space;
  const bool random = args.kind == "random";

  struct Row {
    std::uint64_t seed = 0;
    SearchResult result;
    std::size_t to_optimum = kOptimumNotFound;
  };
  std::vector<Row> rows(args.runs);

  parallel_runs(args.runs, args.jobs, [&](std::size_t r) {
    const std::uint64_t run_seed = mix_seed(args.seed, r);
    SearchResult result;
    if (random) {
      result =
          run_random_search(space, run_seed, args.budget, args.stop_at_optimum);
    } else {
      P3sOptions options;
      options.k = args.k;
      options.seed = run_seed;
      options.config = make_config(args.kind, args.layers, args.hidden, bench);
      options.train.epochs = args.epochs;
      options.train.lr = args.lr;
      options.fallback = args.fallback == "latter"
                             ? RefocusFallback::kLatterHalf
                             : RefocusFallback::kKeep;
      result = run_p3s(space, options, args.budget, args.stop_at_optimum);
    }
    rows[r].seed = run_seed;
    rows[r].to_optimum = samples_to_optimum(result.history, space);
    rows[r].result = std::move(result);
  });

  std::size_t found = 0;
  double sum_found_samples = 0.0, sum_best = 0.0;
  std::vector<std::size_t> to_opt;
  to_opt.reserve(args.runs);
  for (std::size_t r = 0; r < args.runs; ++r) {
    const Row& row = rows[r];
    std::cout << "run=" << r << " seed=" << row.seed
              << " samples_used=" << row.result.samples_used
              << " samples_to_optimum=";
    if (row.to_optimum == kOptimumNotFound) {
      std::cout << "-1";
    } else {
      std::cout << row.to_optimum;
      ++found;
      sum_found_samples += double(row.to_optimum);
    }
    std::cout << " best=" << fmt(row.result.best_accuracy) << "\n";
    sum_best += row.result.best_accuracy;
    to_opt.push_back(row.to_optimum);
  }
  std::sort(to_opt.begin(), to_opt.end());
  const std::size_t median = to_opt[(to_opt.size() - 1) / 2];
  std::cout << "aggregate kind=" << args.kind << " runs=" << args.runs
            << " found=" << found << " mean_samples_found="
            << (found ? fmt(sum_found_samples / double(found), 1)
                      : std::string("-"))
            << " median_samples="
            << (median == kOptimumNotFound ? std::string("not-found")
                                           : std::to_string(median))
            << " mean_best=" << fmt(sum_best / double(args.runs)) << "\n";

  if (!args.csv.empty()) {
    std::ofstream out = open_out(args.csv);
    out << "run,seed,kind,k,budget,samples_used,samples_to_optimum,"
           "best_accuracy\n";
    for (std::size_t r = 0; r < args.runs; ++r) {
      const Row& row = rows[r];
      out << r << "," << row.seed << "," << args.kind << "," << args.k << ","
          << args.budget << "," << row.result.samples_used << ","
          << (row.to_optimum == kOptimumNotFound
                  ? std::string("-1")
                  : std::to_string(row.to_optimum))
          << "," << fmt(row.result.best_accuracy) << "\n";
    }
  }
  if (!args.events_dir.empty()) {
    std::filesystem::create_directories(args.events_dir);
    for (std::size_t r = 0; r < args.runs; ++r) {
      std::ofstream out = open_out(args.events_dir + "/run-" +
                                   std::to_string(r) + ".jsonl");
      for (const StepRecord& step : rows[r].result.steps) {
        nlohmann::json rec;
        rec["t"] = step.t;
        rec["lo"] = step.lo;
        rec["hi"] = step.hi;
        rec["sampled_ids"] = step.sampled_ids;
        rec["best_so_far"] = step.best_so_far;
        rec["widened"] = step.widened;
        out << rec.dump() << "\n";
      }
    }
  }
  return 0;
}

struct DumpArgs {
  std::string bench_path;
  std::string params_path;
  std::string cell_id;
  std::string csv;
};

int cmd_dump_trails(const DumpArgs& args) {
  const Benchmark bench = load_benchmark(args.bench_path);
  const auto [config, params] = load_predictor(args.params_path);
  if (config.vocab_size != bench.vocab.size() ||
      config.max_nodes != bench.max_nodes) {
    throw Error("dump-trails: predictor was trained for a different space");
  }
  const BenchmarkEntry* entry = nullptr;
  for (const BenchmarkEntry& e : bench.space.entries) {
    if (e.id == args.cell_id) {
      entry = &e;
      break;
    }
  }
  if (!entry) {
    throw UnknownCellError("dump-trails: no cell '" + args.cell_id + "'");
  }

  const std::vector<Tensor> adjs =
      layer_adjacencies(config, params, entry->cell);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.csv.empty()) {
    file = open_out(args.csv);
    out = &file;
  }
  *out << "layer,src,dst,weight\n";
  for (std::size_t l = 0; l < adjs.size(); ++l) {
    for (std::size_t i = 0; i < entry->cell.n; ++i) {
      for (std::size_t j = 0; j < entry->cell.n; ++j) {
        if (i == j) continue;
        *out << l << "," << i << "," << j << "," << fmt(adjs[l](i, j), 9)
             << "\n";
      }
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-based architecture performance prediction and search"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  GenSynthArgs gen;
  gen.spec.seed = seed;
  CLI::App* gen_cmd =
      app.add_subcommand("gen-synth", "Generate a synthetic benchmark file");
  gen_cmd->add_option("--out", gen.out, "Output JSONL path")->required();
  gen_cmd->add_option("--cells", gen.spec.n_cells, "Number of cells");
  gen_cmd->add_option("--nodes", gen.spec.n_nodes, "Maximum nodes per cell");
  gen_cmd->add_option("--vocab", gen.spec.vocab_size,
                      "Vocabulary size incl. input/output");
  gen_cmd->add_option("--seed", gen.spec.seed, "Generator seed");
  gen_cmd->add_option("--noise", gen.spec.noise_sigma, "Accuracy noise sigma");
  gen_cmd->add_option("--base", gen.spec.coeffs.base, "Accuracy base");
  gen_cmd->add_option("--band", gen.spec.coeffs.band, "Flops band height");
  gen_cmd->add_option("--slope", gen.spec.coeffs.slope, "Linear flops trend");
  gen_cmd->add_option("--comp", gen.spec.coeffs.comp, "Composition weight");
  gen_cmd->add_option("--center", gen.spec.coeffs.center, "Band center");
  gen_cmd->add_option("--width", gen.spec.coeffs.width, "Band width");
  gen_cmd->add_option("--name", gen.spec.dataset_name, "Dataset name");

  const std::vector<std::string> predictor_kinds = {"mlp", "gcn", "bi-gcn",
                                                    "rats-gcn"};
  std::vector<std::string> eval_kinds = predictor_kinds;
  eval_kinds.push_back("oracle");
  std::vector<std::string> search_kinds = predictor_kinds;
  search_kinds.push_back("random");

  EvalArgs eval;
  eval.seed = seed;
  eval.jobs = default_jobs();
  CLI::App* eval_cmd = app.add_subcommand(
      "eval-predictor", "Train on a sample budget, score the whole space");
  eval_cmd->add_option("--bench", eval.bench_path, "Benchmark JSONL")
      ->required();
  eval_cmd->add_option("--kind", eval.kind, "Predictor kind")
      ->check(CLI::IsMember(eval_kinds));
  eval_cmd->add_option("--budget", eval.budget, "Training sample budget");
  eval_cmd->add_option("--runs", eval.runs, "Independent runs")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--topk", eval.topk, "k for mean top-k accuracy");
  eval_cmd->add_option("--epochs", eval.epochs, "Training epochs");
  eval_cmd->add_option("--lr", eval.lr, "Learning rate");
  eval_cmd->add_option("--hidden", eval.hidden, "Hidden width");
  eval_cmd->add_option("--layers", eval.layers, "Propagation layers");
  eval_cmd->add_option("--seed", eval.seed, "Base seed");
  eval_cmd->add_option("--jobs", eval.jobs, "Max parallel runs");
  eval_cmd->add_option("--csv", eval.csv, "Write per-run rows to CSV");
  eval_cmd->add_option("--save-params", eval.save_params,
                       "Save run 0's trained parameters");

  SearchArgs search;
  search.seed = seed;
  search.jobs = default_jobs();
  CLI::App* search_cmd =
      app.add_subcommand("search", "Run the sampling search loop");
  search_cmd->add_option("--bench", search.bench_path, "Benchmark JSONL")
      ->required();
  search_cmd->add_option("--kind", search.kind, "Predictor kind or 'random'")
      ->check(CLI::IsMember(search_kinds));
  search_cmd->add_option("--k", search.k, "Samples per iteration");
  search_cmd->add_option("--budget", search.budget, "Total sample budget");
  search_cmd->add_option("--runs", search.runs, "Independent runs")
      ->check(CLI::PositiveNumber);
  search_cmd->add_flag("--stop-at-optimum", search.stop_at_optimum,
                       "Stop once the global optimum is sampled");
  search_cmd->add_option("--epochs", search.epochs, "Retrain epochs");
  search_cmd->add_option("--lr", search.lr, "Learning rate");
  search_cmd->add_option("--hidden", search.hidden, "Hidden width");
  search_cmd->add_option("--layers", search.layers, "Propagation layers");
  search_cmd->add_option("--seed", search.seed, "Base seed");
  search_cmd->add_option("--jobs", search.jobs, "Max parallel runs");
  search_cmd->add_option("--fallback", search.fallback,
                         "Interval fallback when the split is undecided")
      ->check(CLI::IsMember({"keep", "latter"}));
  search_cmd->add_option("--csv", search.csv, "Write per-run rows to CSV");
  search_cmd->add_option("--events", search.events_dir,
                         "Write per-run step logs (JSONL) to this directory");

  DumpArgs dump;
  CLI::App* dump_cmd = app.add_subcommand(
      "dump-trails", "Print per-layer trail weights for one cell");
  dump_cmd->add_option("--bench", dump.bench_path, "Benchmark JSONL")
      ->required();
  dump_cmd->add_option("--params", dump.params_path, "Trained predictor file")
      ->required();
  dump_cmd->add_option("--cell", dump.cell_id, "Cell id")->required();
  dump_cmd->add_option("--csv", dump.csv, "Write listing to CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen_synth(gen);
    if (eval_cmd->parsed()) return cmd_eval_predictor(eval);
    if (search_cmd->parsed()) return cmd_search(search);
    if (dump_cmd->parsed()) return cmd_dump_trails(dump);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 3;
  }
}
