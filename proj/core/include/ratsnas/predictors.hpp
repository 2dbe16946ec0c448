#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ratsnas/cell.hpp"
#include "ratsnas/rng.hpp"
#include "ratsnas/tape.hpp"
#include "ratsnas/tensor.hpp"

namespace ratsnas {

enum class PredictorKind { kMlp, kGcn, kBiGcn, kRatsGcn };

PredictorKind predictor_kind_from_string(const std::string& s);
std::string to_string(PredictorKind kind);

struct PredictorConfig {
  PredictorKind kind = PredictorKind::kRatsGcn;
  std::size_t layers = 3;
  std::size_t hidden = 32;
  std::size_t vocab_size = 0;
  std::size_t max_nodes = 0;

  // Node features are the one-hot ops plus one dedicated pad column.
  std::size_t feature_dim() const { return vocab_size + 1; }
  std::size_t layer_input_dim(std::size_t layer) const {
    return layer == 0 ? feature_dim() : hidden;
  }
};

void validate_config(const PredictorConfig& config);

// Per-layer trail-rewiring parameters: Q/K/V projections, then two linear
// heads over concat(Q, K, V, A) producing per-trail offsets and strengths.
struct RatsParams {
  Tensor w_q = Tensor::matrix(0, 0);
  Tensor w_k = Tensor::matrix(0, 0);
  Tensor w_v = Tensor::matrix(0, 0);
  Tensor w_off = Tensor::matrix(0, 0);
  Tensor b_off = Tensor::vector({});
  Tensor w_str = Tensor::matrix(0, 0);
  Tensor b_str = Tensor::vector({});
};

struct PredictorParams {
  std::vector<Tensor> w;        // per layer, layer_input_dim x hidden
  std::vector<Tensor> w_rev;    // reverse-direction weights (kBiGcn only)
  std::vector<RatsParams> rats; // one per layer (kRatsGcn only)
  Tensor readout = Tensor::matrix(0, 0);  // hidden x 1, no bias
};

PredictorParams init_params(const PredictorConfig& config, Rng& rng);

// Flat tensor list in a fixed order so tapes and optimizers can treat the
// model as a parameter vector. unflatten is the exact inverse.
std::vector<Tensor> flatten_params(const PredictorConfig& config,
                                   const PredictorParams& params);
PredictorParams unflatten_params(const PredictorConfig& config,
                                 const std::vector<Tensor>& flat);

// Cell padded to max_nodes: pad rows are one-hot at the pad column, get no
// trails, and are masked out of pooling.
struct EncodedCell {
  Tensor x = Tensor::matrix(0, 0);  // max_nodes x feature_dim
  Tensor a = Tensor::matrix(0, 0);  // max_nodes x max_nodes
  std::vector<double> mask;         // 1 for real nodes, 0 for pad
};

EncodedCell encode_cell(const CellGraph& cell, const PredictorConfig& config);

// offset = sigmoid(E W_off + b_off), strength = sigmoid(E W_str + b_str) with
// E = concat(XW_q, XW_k, XW_v, A); returns clamp((A + offset) * strength)
// with every entry in [0, 1].
Tensor rats_adjacency(const Tensor& x, const Tensor& a, const RatsParams& p);

// Appends the full forward pass to `tape` and returns the 1x1 prediction
// node. param_ids must hold leaves in flatten_params order.
Tape::NodeId build_forward(Tape& tape, const PredictorConfig& config,
                           const std::vector<Tape::NodeId>& param_ids,
                           const EncodedCell& cell);

double forward(const PredictorConfig& config, const PredictorParams& params,
               const CellGraph& cell);

// Effective trail weights per layer: the rewired adjacency for kRatsGcn, the
// cell's own adjacency for the fixed-propagation kinds, full trails (all-ones
// off the diagonal over real nodes) for kMlp.
std::vector<Tensor> layer_adjacencies(const PredictorConfig& config,
                                      const PredictorParams& params,
                                      const CellGraph& cell);

struct TrainExample {
  CellGraph cell;
  double accuracy = 0.0;
};

struct TrainOptions {
  std::size_t epochs = 300;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  double stop_loss = 0.0;  // early exit once epoch loss drops below; 0 = off
};

struct TrainResult {
  PredictorParams params;
  std::vector<double> epoch_loss;
  double final_loss = 0.0;  // evaluated on the returned params
};

// Full-batch MSE on accuracy fractions, Adam, retraining deterministically
// from a seeded init.
TrainResult train_predictor(const PredictorConfig& config,
                            const std::vector<TrainExample>& pool,
                            const TrainOptions& options);

// scores[i] = forward(entries[i]); jobs > 1 splits entries across threads,
// result identical to the serial order.
std::vector<double> predict_all(const PredictorConfig& config,
                                const PredictorParams& params,
                                const SearchSpace& space,
                                std::size_t jobs = 1);

// Scores aligned with `indices` (entry indices into space.entries).
std::vector<double> predict_subset(const PredictorConfig& config,
                                   const PredictorParams& params,
                                   const SearchSpace& space,
                                   const std::vector<std::size_t>& indices);

void save_predictor(const std::string& path, const PredictorConfig& config,
                    const PredictorParams& params);
std::pair<PredictorConfig, PredictorParams> load_predictor(
    const std::string& path);

}  // namespace ratsnas
