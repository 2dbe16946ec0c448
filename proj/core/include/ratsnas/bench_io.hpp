#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ratsnas/cell.hpp"

namespace ratsnas {

// A search space plus the metadata needed to interpret and persist it.
struct Benchmark {
  OpVocabulary vocab{std::vector<std::string>{"input", "output"}};
  std::size_t max_nodes = 2;
  std::string dataset_name;
  std::string notes;
  SearchSpace space;
};

// JSON Lines, UTF-8, LF: a header record {"record_type":"header",
// "format_version":1, "vocab":[...], "max_nodes":N, "dataset_name":...}
// followed by one cell record per line {"record_type":"cell", "id", "ops",
// "adjacency", "flops", "accuracy"}. Unknown fields are ignored. Loading is
// all-or-nothing: every cell is validated before a space is returned.
Benchmark load_benchmark(const std::string& path);
void save_benchmark(const std::string& path, const Benchmark& bench);

struct SynthCoeffs {
  double base = 0.35;
  double band = 0.35;    // height of the unimodal flops band
  double slope = 0.10;   // linear flops trend
  double comp = 0.05;    // operation-composition term
  double center = 0.625; // band peak, in normalized flops
  double width = 0.10;   // band width, in normalized flops
};

struct SynthSpec {
  std::size_t n_cells = 4096;
  std::size_t n_nodes = 7;     // per-cell node count varies in [3, n_nodes]
  std::size_t vocab_size = 7;  // includes "input" and "output"
  std::uint64_t seed = 0;
  double noise_sigma = 0.002;
  SynthCoeffs coeffs;
  std::string dataset_name;  // derived from seed and size when empty
};

// Seeded benchmark with accuracy unimodal in a FLOPs band plus a linear trend,
// a composition preference, and Gaussian noise; the global optimum is made
// unique by epsilon-perturbation. Pure function of the spec.
Benchmark gen_synthetic(const SynthSpec& spec);

}  // namespace ratsnas
