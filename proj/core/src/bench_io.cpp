#include "ratsnas/bench_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include "json.hpp"
#include "ratsnas/errors.hpp"
#include "ratsnas/rng.hpp"

namespace ratsnas {

namespace {

using nlohmann::json;

std::string at_line(std::size_t line_no) {
  return " (line " + std::to_string(line_no) + ")";
}

Tensor adjacency_from_json(const json& rows, std::size_t n) {
  if (!rows.is_array() || rows.size() != n) {
    throw ValidationError("adjacency row count != node count");
  }
  Tensor a = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const json& row = rows.at(i);
    if (!row.is_array() || row.size() != n) {
      throw ValidationError("adjacency is not n x n");
    }
    for (std::size_t j = 0; j < n; ++j) {
      a(i, j) = row.at(j).get<double>();
    }
  }
  return a;
}

}  // namespace

Benchmark load_benchmark(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");

  Benchmark bench;
  bool have_header = false;
  std::vector<BenchmarkEntry> entries;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("benchmark '" + path + "': " + e.what() +
                       at_line(line_no));
    }
    try {
      const std::string type = rec.at("record_type").get<std::string>();
      if (type == "header") {
        if (have_header) {
          throw ValidationError("second header record" + at_line(line_no));
        }
        if (rec.at("format_version").get<int>() != 1) {
          throw ValidationError("unsupported format_version" +
                                at_line(line_no));
        }
        bench.vocab =
            OpVocabulary(rec.at("vocab").get<std::vector<std::string>>());
        bench.max_nodes = rec.at("max_nodes").get<std::size_t>();
        bench.dataset_name = rec.at("dataset_name").get<std::string>();
        if (rec.contains("notes")) {
          bench.notes = rec.at("notes").get<std::string>();
        }
        have_header = true;
        continue;
      }
      if (type != "cell") {
        throw ValidationError("unknown record_type '" + type + "'" +
                              at_line(line_no));
      }
      if (!have_header) {
        throw ValidationError("cell record before header" + at_line(line_no));
      }
      BenchmarkEntry entry;
      entry.id = rec.at("id").get<std::string>();
      const std::vector<std::string> ops =
          rec.at("ops").get<std::vector<std::string>>();
      if (ops.size() > bench.max_nodes) {
        throw ValidationError("cell '" + entry.id +
                              "' exceeds header max_nodes");
      }
      const Tensor adjacency =
          adjacency_from_json(rec.at("adjacency"), ops.size());
      entry.cell = validate_cell(
          make_cell(adjacency, encode_operations(ops, bench.vocab)),
          bench.vocab);
      entry.flops = rec.at("flops").get<double>();
      entry.accuracy = rec.at("accuracy").get<double>();
      if (!std::isfinite(entry.flops) || entry.flops < 0.0) {
        throw ValidationError("cell '" + entry.id + "': bad flops");
      }
      if (!std::isfinite(entry.accuracy) || entry.accuracy < 0.0 ||
          entry.accuracy > 1.0) {
        throw ValidationError("cell '" + entry.id +
                              "': accuracy outside [0, 1]");
      }
      entries.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw ValidationError("benchmark '" + path + "': " + e.what() +
                            at_line(line_no));
    } catch (const ParseError&) {
      throw;
    } catch (const DuplicateIdError&) {
      throw;
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw ValidationError("benchmark '" + path + "': " + e.what() +
                            at_line(line_no));
    }
  }
  if (!have_header) throw ValidationError("benchmark '" + path + "': no header");
  if (entries.empty()) {
    throw ValidationError("benchmark '" + path + "': no cells");
  }
  bench.space = make_search_space(std::move(entries));
  return bench;
}

void save_benchmark(const std::string& path, const Benchmark& bench) {
  std::ofstream out(path, std::ios::binary);  // binary keeps LF endings
  if (!out) throw Error("cannot open '" + path + "' for writing");

  json header;
  header["record_type"] = "header";
  header["format_version"] = 1;
  header["vocab"] = bench.vocab.names();
  header["max_nodes"] = bench.max_nodes;
  header["dataset_name"] = bench.dataset_name;
  if (!bench.notes.empty()) header["notes"] = bench.notes;
  out << header.dump() << "\n";

  for (const BenchmarkEntry& e : bench.space.entries) {
    json rec;
    rec["record_type"] = "cell";
    rec["id"] = e.id;
    rec["ops"] = decode_operations(e.cell.ops, bench.vocab);
    std::vector<std::vector<int>> adj(e.cell.n, std::vector<int>(e.cell.n, 0));
    for (std::size_t i = 0; i < e.cell.n; ++i) {
      for (std::size_t j = 0; j < e.cell.n; ++j) {
        adj[i][j] = e.cell.adjacency(i, j) != 0.0 ? 1 : 0;
      }
    }
    rec["adjacency"] = adj;
    rec["flops"] = e.flops;
    rec["accuracy"] = e.accuracy;
    out << rec.dump() << "\n";
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

Benchmark gen_synthetic(const SynthSpec& spec) {
  if (spec.n_cells < 2) throw SpecError("synthetic: n_cells must be >= 2");
  if (spec.n_nodes < 3) throw SpecError("synthetic: n_nodes must be >= 3");
  if (spec.vocab_size < 3) {
    throw SpecError("synthetic: vocab_size must be >= 3");
  }
  if (spec.noise_sigma < 0.0) {
    throw SpecError("synthetic: noise_sigma must be >= 0");
  }
  if (spec.coeffs.width <= 0.0) throw SpecError("synthetic: width must be > 0");

  std::vector<std::string> names = {"input", "output"};
  for (std::size_t j = 1; j + 2 <= spec.vocab_size; ++j) {
    names.push_back("op" + std::to_string(j));
  }
  const OpVocabulary vocab(names);
  const std::size_t n_ops = spec.vocab_size - 2;

  // per-operation cost and composition preference, by op ordinal
  auto op_cost = [](std::size_t ord) { return double(ord * ord + 2 * ord); };
  auto op_pref = [](std::size_t ord) { return double(ord % 3) - 1.0; };

  Rng rng(mix_seed(spec.seed, 1));
  std::vector<CellGraph> cells;
  std::vector<double> flops(spec.n_cells, 0.0);
  std::vector<double> comp(spec.n_cells, 0.0);
  cells.reserve(spec.n_cells);

  for (std::size_t c = 0; c < spec.n_cells; ++c) {
    const std::size_t n = 3 + rng.index(spec.n_nodes - 2);
    std::vector<std::size_t> ords(n, 0);  // middle-node op ordinals, 1-based
    std::vector<std::string> ops(n);
    ops.front() = "input";
    ops.back() = "output";
    for (std::size_t i = 1; i + 1 < n; ++i) {
      ords[i] = 1 + rng.index(n_ops);
      ops[i] = "op" + std::to_string(ords[i]);
    }

    Tensor adj = Tensor::matrix(n, n);
    for (std::size_t j = 1; j < n; ++j) {
      adj(rng.index(j), j) = 1.0;  // every node reachable from above
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      bool has_out = false;
      for (std::size_t j = i + 1; j < n; ++j) has_out |= adj(i, j) != 0.0;
      if (!has_out) adj(i, i + 1 + rng.index(n - 1 - i)) = 1.0;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (adj(i, j) == 0.0 && rng.uniform() < 0.25) adj(i, j) = 1.0;
      }
    }

    double cost = 0.0, pref = 0.0, edges = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      cost += op_cost(ords[i]);
      pref += op_pref(ords[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) edges += adj(i, j);
    }
    flops[c] = cost + edges;
    comp[c] = n > 2 ? pref / double(n - 2) : 0.0;
    cells.push_back(
        validate_cell(make_cell(std::move(adj),
                                encode_operations(ops, vocab)),
                      vocab));
  }

  const auto [min_it, max_it] = std::minmax_element(flops.begin(), flops.end());
  const double lo = *min_it, hi = *max_it;
  const double span = hi > lo ? hi - lo : 1.0;
  const SynthCoeffs& co = spec.coeffs;

  std::vector<double> accuracy(spec.n_cells, 0.0);
  for (std::size_t c = 0; c < spec.n_cells; ++c) {
    const double u = (flops[c] - lo) / span;
    const double z = (u - co.center) / co.width;
    double a = co.base + co.band * std::exp(-z * z) + co.slope * u +
               co.comp * comp[c] + rng.normal(0.0, spec.noise_sigma);
    accuracy[c] = std::clamp(a, 0.0, 1.0);
  }

  // nudge ties off the maximum until the optimum is unique
  for (;;) {
    const std::size_t best = std::size_t(
        std::max_element(accuracy.begin(), accuracy.end()) - accuracy.begin());
    if (accuracy[best] <= 0.0) {
      throw SpecError("synthetic: degenerate accuracy landscape");
    }
    std::size_t dup = 0;
    for (std::size_t c = 0; c < spec.n_cells; ++c) {
      if (c != best && accuracy[c] == accuracy[best]) {
        accuracy[c] -= 1e-9 * double(++dup);
        accuracy[c] = std::max(accuracy[c], 0.0);
      }
    }
    if (dup == 0) break;
  }

  std::vector<BenchmarkEntry> entries;
  entries.reserve(spec.n_cells);
  char id_buf[32];
  for (std::size_t c = 0; c < spec.n_cells; ++c) {
    std::snprintf(id_buf, sizeof(id_buf), "c%06zu", c);
    entries.push_back({id_buf, std::move(cells[c]), flops[c], accuracy[c]});
  }

  Benchmark bench;
  bench.vocab = vocab;
  bench.max_nodes = spec.n_nodes;
  bench.dataset_name = !spec.dataset_name.empty()
                           ? spec.dataset_name
                           : "synth-s" + std::to_string(spec.seed) + "-n" +
                                 std::to_string(spec.n_cells);
  bench.notes =
      "accuracy = clamp(base + band*exp(-((u-center)/width)^2) + slope*u + "
      "comp*pref + N(0,sigma), 0, 1); u = normalized flops";
  bench.space = make_search_space(std::move(entries));
  return bench;
}

}  // namespace ratsnas
