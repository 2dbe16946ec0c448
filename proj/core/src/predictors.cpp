#include "ratsnas/predictors.hpp"

#include <cmath>
#include <fstream>
#include <thread>
#include <utility>

#include "json.hpp"
#include "ratsnas/errors.hpp"
#include "ratsnas/optim.hpp"

namespace ratsnas {

PredictorKind predictor_kind_from_string(const std::string& s) {
  if (s == "mlp") return PredictorKind::kMlp;
  if (s == "gcn") return PredictorKind::kGcn;
  if (s == "bi-gcn") return PredictorKind::kBiGcn;
  if (s == "rats-gcn") return PredictorKind::kRatsGcn;
  throw Error("unknown predictor kind '" + s + "'");
}

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::kMlp: return "mlp";
    case PredictorKind::kGcn: return "gcn";
    case PredictorKind::kBiGcn: return "bi-gcn";
    case PredictorKind::kRatsGcn: return "rats-gcn";
  }
  throw Error("unknown predictor kind");
}

void validate_config(const PredictorConfig& config) {
  if (config.layers < 1) throw Error("config: layers must be >= 1");
  if (config.hidden < 1) throw Error("config: hidden must be >= 1");
  if (config.vocab_size < 2) throw Error("config: vocabulary too small");
  if (config.max_nodes < 2) throw Error("config: max_nodes must be >= 2");
}

namespace {

std::size_t rats_embed_dim(const PredictorConfig& c) {
  return 3 * c.hidden + c.max_nodes;
}

// Positions of each parameter tensor in the flattened order. The order is
// load-bearing: init, flatten, unflatten, taping and serialization all walk
// it identically.
struct ParamIndex {
  std::vector<std::size_t> w;
  std::vector<std::size_t> w_rev;
  struct RatsIds {
    std::size_t w_q, w_k, w_v, w_off, b_off, w_str, b_str;
  };
  std::vector<RatsIds> rats;
  std::size_t readout = 0;
  std::size_t count = 0;
};

ParamIndex param_index(const PredictorConfig& c) {
  ParamIndex idx;
  std::size_t next = 0;
  for (std::size_t l = 0; l < c.layers; ++l) idx.w.push_back(next++);
  if (c.kind == PredictorKind::kBiGcn) {
    for (std::size_t l = 0; l < c.layers; ++l) idx.w_rev.push_back(next++);
  }
  if (c.kind == PredictorKind::kRatsGcn) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      ParamIndex::RatsIds r;
      r.w_q = next++;
      r.w_k = next++;
      r.w_v = next++;
      r.w_off = next++;
      r.b_off = next++;
      r.w_str = next++;
      r.b_str = next++;
      idx.rats.push_back(r);
    }
  }
  idx.readout = next++;
  idx.count = next;
  return idx;
}

std::vector<std::string> param_names(const PredictorConfig& c) {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < c.layers; ++l) {
    names.push_back("w." + std::to_string(l));
  }
  if (c.kind == PredictorKind::kBiGcn) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      names.push_back("w_rev." + std::to_string(l));
    }
  }
  if (c.kind == PredictorKind::kRatsGcn) {
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::string base = "rats." + std::to_string(l) + ".";
      for (const char* part :
           {"w_q", "w_k", "w_v", "w_off", "b_off", "w_str", "b_str"}) {
        names.push_back(base + part);
      }
    }
  }
  names.push_back("readout");
  return names;
}

void check_tensor_shape(const Tensor& t, std::size_t rows, std::size_t cols,
                        const char* name) {
  if (!t.is_matrix() || t.rows() != rows || t.cols() != cols) {
    throw ShapeError(std::string("params: ") + name + " has wrong shape");
  }
}

void check_bias_shape(const Tensor& t, std::size_t len, const char* name) {
  if (t.rank() != 1 || t.size() != len) {
    throw ShapeError(std::string("params: ") + name + " has wrong shape");
  }
}

}  // namespace

PredictorParams init_params(const PredictorConfig& config, Rng& rng) {
  validate_config(config);
  PredictorParams p;
  for (std::size_t l = 0; l < config.layers; ++l) {
    p.w.push_back(
        glorot_uniform(config.layer_input_dim(l), config.hidden, rng));
  }
  if (config.kind == PredictorKind::kBiGcn) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      p.w_rev.push_back(
          glorot_uniform(config.layer_input_dim(l), config.hidden, rng));
    }
  }
  if (config.kind == PredictorKind::kRatsGcn) {
    const std::size_t e = rats_embed_dim(config);
    const std::size_t n = config.max_nodes;
    for (std::size_t l = 0; l < config.layers; ++l) {
      RatsParams r;
      const std::size_t in = config.layer_input_dim(l);
      r.w_q = glorot_uniform(in, config.hidden, rng);
      r.w_k = glorot_uniform(in, config.hidden, rng);
      r.w_v = glorot_uniform(in, config.hidden, rng);
      r.w_off = glorot_uniform(e, n, rng);
      r.b_off = Tensor::vector(std::vector<double>(n, 0.0));
      r.w_str = glorot_uniform(e, n, rng);
      r.b_str = Tensor::vector(std::vector<double>(n, 0.0));
      p.rats.push_back(std::move(r));
    }
  }
  p.readout = glorot_uniform(config.hidden, 1, rng);
  return p;
}

std::vector<Tensor> flatten_params(const PredictorConfig& config,
                                   const PredictorParams& params) {
  const ParamIndex idx = param_index(config);
  std::vector<Tensor> flat;
  flat.reserve(idx.count);
  for (std::size_t l = 0; l < config.layers; ++l) flat.push_back(params.w[l]);
  if (config.kind == PredictorKind::kBiGcn) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      flat.push_back(params.w_rev[l]);
    }
  }
  if (config.kind == PredictorKind::kRatsGcn) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      const RatsParams& r = params.rats[l];
      flat.push_back(r.w_q);
      flat.push_back(r.w_k);
      flat.push_back(r.w_v);
      flat.push_back(r.w_off);
      flat.push_back(r.b_off);
      flat.push_back(r.w_str);
      flat.push_back(r.b_str);
    }
  }
  flat.push_back(params.readout);
  return flat;
}

PredictorParams unflatten_params(const PredictorConfig& config,
                                 const std::vector<Tensor>& flat) {
  validate_config(config);
  const ParamIndex idx = param_index(config);
  if (flat.size() != idx.count) {
    throw ShapeError("params: wrong tensor count for config");
  }
  PredictorParams p;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const Tensor& w = flat[idx.w[l]];
    check_tensor_shape(w, config.layer_input_dim(l), config.hidden, "w");
    p.w.push_back(w);
  }
  if (config.kind == PredictorKind::kBiGcn) {
    for (std::size_t l = 0; l < config.layers; ++l) {
      const Tensor& w = flat[idx.w_rev[l]];
      check_tensor_shape(w, config.layer_input_dim(l), config.hidden, "w_rev");
      p.w_rev.push_back(w);
    }
  }
  if (config.kind == PredictorKind::kRatsGcn) {
    const std::size_t e = rats_embed_dim(config);
    const std::size_t n = config.max_nodes;
    for (std::size_t l = 0; l < config.layers; ++l) {
      const ParamIndex::RatsIds& ids = idx.rats[l];
      RatsParams r;
      const std::size_t in = config.layer_input_dim(l);
      r.w_q = flat[ids.w_q];
      r.w_k = flat[ids.w_k];
      r.w_v = flat[ids.w_v];
      r.w_off = flat[ids.w_off];
      r.b_off = flat[ids.b_off];
      r.w_str = flat[ids.w_str];
      r.b_str = flat[ids.b_str];
      check_tensor_shape(r.w_q, in, config.hidden, "w_q");
      check_tensor_shape(r.w_k, in, config.hidden, "w_k");
      check_tensor_shape(r.w_v, in, config.hidden, "w_v");
      check_tensor_shape(r.w_off, e, n, "w_off");
      check_bias_shape(r.b_off, n, "b_off");
      check_tensor_shape(r.w_str, e, n, "w_str");
      check_bias_shape(r.b_str, n, "b_str");
      p.rats.push_back(std::move(r));
    }
  }
  p.readout = flat[idx.readout];
  check_tensor_shape(p.readout, config.hidden, 1, "readout");
  return p;
}

EncodedCell encode_cell(const CellGraph& cell, const PredictorConfig& config) {
  if (cell.n > config.max_nodes) {
    throw ShapeError("encode: cell has more nodes than max_nodes");
  }
  if (cell.ops.cols() != config.vocab_size) {
    throw ShapeError("encode: ops width != vocab_size");
  }
  const std::size_t n = config.max_nodes;
  EncodedCell enc;
  enc.x = Tensor::matrix(n, config.feature_dim());
  enc.a = Tensor::matrix(n, n);
  enc.mask.assign(n, 0.0);
  for (std::size_t i = 0; i < cell.n; ++i) {
    enc.mask[i] = 1.0;
    for (std::size_t j = 0; j < config.vocab_size; ++j) {
      enc.x(i, j) = cell.ops(i, j);
    }
    for (std::size_t j = 0; j < cell.n; ++j) {
      enc.a(i, j) = cell.adjacency(i, j);
    }
  }
  for (std::size_t i = cell.n; i < n; ++i) {
    enc.x(i, config.vocab_size) = 1.0;
  }
  return enc;
}

Tensor rats_adjacency(const Tensor& x, const Tensor& a, const RatsParams& p) {
  const Tensor q = matmul(x, p.w_q);
  const Tensor k = matmul(x, p.w_k);
  const Tensor v = matmul(x, p.w_v);
  const Tensor e = concat_cols({&q, &k, &v, &a});
  const Tensor off = sigmoid(add_rowvec(matmul(e, p.w_off), p.b_off));
  const Tensor str = sigmoid(add_rowvec(matmul(e, p.w_str), p.b_str));
  return clamp01(hadamard(add(a, off), str));
}

Tape::NodeId build_forward(Tape& tape, const PredictorConfig& config,
                           const std::vector<Tape::NodeId>& param_ids,
                           const EncodedCell& cell) {
  const ParamIndex idx = param_index(config);
  if (param_ids.size() != idx.count) {
    throw ShapeError("forward: wrong parameter count for config");
  }
  const Tape::NodeId a = tape.leaf(cell.a);
  Tape::NodeId h = tape.leaf(cell.x);

  switch (config.kind) {
    case PredictorKind::kMlp: {
      for (std::size_t l = 0; l < config.layers; ++l) {
        h = tape.relu(tape.matmul(h, param_ids[idx.w[l]]));
      }
      break;
    }
    case PredictorKind::kGcn: {
      const Tape::NodeId an = tape.row_normalize(a);
      for (std::size_t l = 0; l < config.layers; ++l) {
        h = tape.relu(tape.matmul(tape.matmul(an, h), param_ids[idx.w[l]]));
      }
      break;
    }
    case PredictorKind::kBiGcn: {
      const Tape::NodeId fwd = tape.row_normalize(a);
      const Tape::NodeId bwd = tape.row_normalize(tape.transpose(a));
      for (std::size_t l = 0; l < config.layers; ++l) {
        const Tape::NodeId hf =
            tape.matmul(tape.matmul(fwd, h), param_ids[idx.w[l]]);
        const Tape::NodeId hb =
            tape.matmul(tape.matmul(bwd, h), param_ids[idx.w_rev[l]]);
        h = tape.relu(tape.scale(tape.add(hf, hb), 0.5));
      }
      break;
    }
    case PredictorKind::kRatsGcn: {
      for (std::size_t l = 0; l < config.layers; ++l) {
        const ParamIndex::RatsIds& r = idx.rats[l];
        const Tape::NodeId q = tape.matmul(h, param_ids[r.w_q]);
        const Tape::NodeId k = tape.matmul(h, param_ids[r.w_k]);
        const Tape::NodeId v = tape.matmul(h, param_ids[r.w_v]);
        const Tape::NodeId e = tape.concat_cols({q, k, v, a});
        const Tape::NodeId off = tape.sigmoid(
            tape.add_rowvec(tape.matmul(e, param_ids[r.w_off]),
                            param_ids[r.b_off]));
        const Tape::NodeId str = tape.sigmoid(
            tape.add_rowvec(tape.matmul(e, param_ids[r.w_str]),
                            param_ids[r.b_str]));
        const Tape::NodeId rewired =
            tape.clamp01(tape.hadamard(tape.add(a, off), str));
        h = tape.relu(tape.matmul(tape.matmul(tape.row_normalize(rewired), h),
                                  param_ids[idx.w[l]]));
      }
      break;
    }
  }

  const Tape::NodeId pooled = tape.mean_rows(h, cell.mask);
  return tape.matmul(pooled, param_ids[idx.readout]);
}

double forward(const PredictorConfig& config, const PredictorParams& params,
               const CellGraph& cell) {
  Tape tape;
  std::vector<Tape::NodeId> ids;
  for (const Tensor& t : flatten_params(config, params)) {
    ids.push_back(tape.leaf(t));
  }
  return tape.value(build_forward(tape, config, ids, encode_cell(cell, config)))
      .item();
}

std::vector<Tensor> layer_adjacencies(const PredictorConfig& config,
                                      const PredictorParams& params,
                                      const CellGraph& cell) {
  const EncodedCell enc = encode_cell(cell, config);
  std::vector<Tensor> out;
  out.reserve(config.layers);
  if (config.kind == PredictorKind::kRatsGcn) {
    Tensor h = enc.x;
    for (std::size_t l = 0; l < config.layers; ++l) {
      Tensor rewired = rats_adjacency(h, enc.a, params.rats[l]);
      h = relu(matmul(matmul(row_normalize(rewired), h), params.w[l]));
      out.push_back(std::move(rewired));
    }
  } else if (config.kind == PredictorKind::kMlp) {
    // full trails: every operation feeds every other, weight 1
    Tensor full = Tensor::zeros_like(enc.a);
    for (std::size_t i = 0; i < cell.n; ++i) {
      for (std::size_t j = 0; j < cell.n; ++j) {
        if (i != j) full(i, j) = 1.0;
      }
    }
    for (std::size_t l = 0; l < config.layers; ++l) out.push_back(full);
  } else {
    // static trails: the cell's own adjacency
    for (std::size_t l = 0; l < config.layers; ++l) out.push_back(enc.a);
  }
  return out;
}

TrainResult train_predictor(const PredictorConfig& config,
                            const std::vector<TrainExample>& pool,
                            const TrainOptions& options) {
  validate_config(config);
  if (pool.empty()) throw EmptyPoolError("train: empty pool");
  std::vector<EncodedCell> encoded;
  std::vector<double> targets;
  encoded.reserve(pool.size());
  targets.reserve(pool.size());
  for (const TrainExample& ex : pool) {
    if (ex.accuracy < 0.0 || ex.accuracy > 1.0) {
      throw Error("train: accuracy outside [0, 1]");
    }
    encoded.push_back(encode_cell(ex.cell, config));
    targets.push_back(ex.accuracy);
  }
  const Tensor target_row = Tensor::matrix(1, targets.size(), targets);

  Rng rng(mix_seed(options.seed, 0));
  std::vector<Tensor> flat = flatten_params(config, init_params(config, rng));
  AdamState adam = make_adam(flat, options.lr);

  auto epoch_pass = [&](bool with_grad, std::vector<Tensor>* grads_out) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    ids.reserve(flat.size());
    for (const Tensor& t : flat) ids.push_back(tape.leaf(t, with_grad));
    std::vector<Tape::NodeId> preds;
    preds.reserve(encoded.size());
    for (const EncodedCell& enc : encoded) {
      preds.push_back(build_forward(tape, config, ids, enc));
    }
    const Tape::NodeId loss =
        tape.mse(tape.concat_cols(preds), tape.leaf(target_row));
    const double loss_value = tape.value(loss).item();
    if (with_grad) {
      const std::vector<Tensor> all = tape.backprop(loss);
      grads_out->clear();
      for (Tape::NodeId id : ids) grads_out->push_back(all[id]);
    }
    return loss_value;
  };

  TrainResult result;
  std::vector<Tensor> grads;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    const double loss = epoch_pass(true, &grads);
    result.epoch_loss.push_back(loss);
    adam_update(flat, grads, adam);
    if (options.stop_loss > 0.0 && loss < options.stop_loss) break;
  }
  result.final_loss = epoch_pass(false, nullptr);
  result.params = unflatten_params(config, flat);
  return result;
}

std::vector<double> predict_all(const PredictorConfig& config,
                                const PredictorParams& params,
                                const SearchSpace& space, std::size_t jobs) {
  validate_config(config);
  const std::vector<Tensor> flat = flatten_params(config, params);
  std::vector<double> scores(space.entries.size(), 0.0);

  auto worker = [&](std::size_t begin, std::size_t end) {
    Tape tape;
    std::vector<Tape::NodeId> ids;
    ids.reserve(flat.size());
    for (const Tensor& t : flat) ids.push_back(tape.leaf(t));
    const std::size_t mark = tape.size();
    for (std::size_t i = begin; i < end; ++i) {
      const EncodedCell enc = encode_cell(space.entries[i].cell, config);
      scores[i] = tape.value(build_forward(tape, config, ids, enc)).item();
      tape.truncate(mark);
    }
  };

  const std::size_t n = space.entries.size();
  if (jobs <= 1 || n < 2 * jobs) {
    worker(0, n);
    return scores;
  }
  std::vector<std::thread> threads;
  const std::size_t chunk = (n + jobs - 1) / jobs;
  for (std::size_t t = 0; t < jobs; ++t) {
    const std::size_t begin = t * chunk;
    if (begin >= n) break;
    threads.emplace_back(worker, begin, std::min(n, begin + chunk));
  }
  for (std::thread& th : threads) th.join();
  return scores;
}

std::vector<double> predict_subset(const PredictorConfig& config,
                                   const PredictorParams& params,
                                   const SearchSpace& space,
                                   const std::vector<std::size_t>& indices) {
  validate_config(config);
  const std::vector<Tensor> flat = flatten_params(config, params);
  Tape tape;
  std::vector<Tape::NodeId> ids;
  ids.reserve(flat.size());
  for (const Tensor& t : flat) ids.push_back(tape.leaf(t));
  const std::size_t mark = tape.size();
  std::vector<double> scores(indices.size(), 0.0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const EncodedCell enc =
        encode_cell(space.entries.at(indices[i]).cell, config);
    scores[i] = tape.value(build_forward(tape, config, ids, enc)).item();
    tape.truncate(mark);
  }
  return scores;
}

void save_predictor(const std::string& path, const PredictorConfig& config,
                    const PredictorParams& params) {
  validate_config(config);
  const std::vector<Tensor> flat = flatten_params(config, params);
  const std::vector<std::string> names = param_names(config);
  nlohmann::json j;
  j["format_version"] = 1;
  j["kind"] = to_string(config.kind);
  j["layers"] = config.layers;
  j["hidden"] = config.hidden;
  j["vocab_size"] = config.vocab_size;
  j["max_nodes"] = config.max_nodes;
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    nlohmann::json t;
    t["name"] = names[i];
    t["shape"] = flat[i].shape();
    t["data"] = flat[i].data();
    tensors.push_back(std::move(t));
  }
  j["tensors"] = std::move(tensors);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump() << "\n";
  if (!out) throw Error("write to '" + path + "' failed");
}

std::pair<PredictorConfig, PredictorParams> load_predictor(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("predictor file '" + path + "': " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1) {
      throw ValidationError("predictor file: unsupported format_version");
    }
    PredictorConfig config;
    config.kind = predictor_kind_from_string(j.at("kind").get<std::string>());
    config.layers = j.at("layers").get<std::size_t>();
    config.hidden = j.at("hidden").get<std::size_t>();
    config.vocab_size = j.at("vocab_size").get<std::size_t>();
    config.max_nodes = j.at("max_nodes").get<std::size_t>();
    validate_config(config);

    const std::vector<std::string> names = param_names(config);
    const nlohmann::json& tensors = j.at("tensors");
    if (!tensors.is_array() || tensors.size() != names.size()) {
      throw ValidationError("predictor file: wrong tensor count");
    }
    std::vector<Tensor> flat;
    flat.reserve(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      const nlohmann::json& t = tensors.at(i);
      if (t.at("name").get<std::string>() != names[i]) {
        throw ValidationError("predictor file: unexpected tensor '" +
                              t.at("name").get<std::string>() + "'");
      }
      flat.emplace_back(t.at("shape").get<std::vector<std::size_t>>(),
                        t.at("data").get<std::vector<double>>());
    }
    return {config, unflatten_params(config, flat)};
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("predictor file '" + path + "': " + e.what());
  }
}

}  // namespace ratsnas
