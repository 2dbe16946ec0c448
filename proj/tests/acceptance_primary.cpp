// Exit gate: each check prints one [Cn] PASS/FAIL line; the process exits
// nonzero if any check fails. Everything runs on synthetic data on one core.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <string>
#include <unordered_set>
#include <vector>

#include "ratsnas/bench_io.hpp"
#include "ratsnas/cell.hpp"
#include "ratsnas/metrics.hpp"
#include "ratsnas/predictors.hpp"
#include "ratsnas/rng.hpp"
#include "ratsnas/search.hpp"
#include "ratsnas/tape.hpp"

using namespace ratsnas;

namespace {

OpVocabulary vocab5() {
  return OpVocabulary({"input", "op1", "op2", "op3", "output"});
}

OpVocabulary vocab7() {
  return OpVocabulary({"input", "op1", "op2", "op3", "op4", "op5", "output"});
}

CellGraph random_cell(Rng& rng, std::size_t n, const OpVocabulary& vocab) {
  Tensor adj = Tensor::matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.5) adj(i, j) = 1.0;
  Tensor ops = Tensor::matrix(n, vocab.size());
  ops(0, vocab.input_index()) = 1.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    ops(i, 1 + rng.index(vocab.size() - 2)) = 1.0;
  ops(n - 1, vocab.output_index()) = 1.0;
  return validate_cell(make_cell(std::move(adj), std::move(ops)), vocab);
}

PredictorConfig config_for(PredictorKind kind, std::size_t vocab_size,
                           std::size_t max_nodes, std::size_t hidden,
                           std::size_t layers) {
  PredictorConfig c;
  c.kind = kind;
  c.layers = layers;
  c.hidden = hidden;
  c.vocab_size = vocab_size;
  c.max_nodes = max_nodes;
  return c;
}

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo,
                     double hi) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// keeps piecewise-linear ops away from their kinks so central differences
// stay two-sided
Tensor kink_free_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) {
    double x = rng.uniform(-1.5, 1.5);
    for (double kink : {0.0, 1.0})
      if (std::abs(x - kink) < 0.1) x = kink + (x < kink ? -0.1 : 0.1);
    v = x;
  }
  return t;
}

double median_of(std::vector<std::size_t> xs) {
  std::sort(xs.begin(), xs.end());
  return double(xs[xs.size() / 2]);
}

// ---------------------------------------------------------------------------

bool check_gradients() {
  double worst_prim = 0.0;
  bool ok = true;
  Rng rng(101);

  const auto prim = [&](const TapeFn& build, const std::vector<Tensor>& in) {
    const GradCheckReport rep = grad_check(build, in, 1e-6);
    ok = ok && rep.pass;
    worst_prim = std::max(worst_prim, rep.max_rel_error);
  };
  const auto to_loss = [](Tape& t, Tape::NodeId id) {
    return t.mse(id, t.leaf(Tensor::zeros_like(t.value(id))));
  };

  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.matmul(p[0], p[1]));
  }, {random_matrix(rng, 3, 4, -1, 1), random_matrix(rng, 4, 2, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.add(p[0], p[1]));
  }, {random_matrix(rng, 3, 3, -1, 1), random_matrix(rng, 3, 3, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.add_rowvec(p[0], p[1]));
  }, {random_matrix(rng, 3, 4, -1, 1),
      Tensor::vector({rng.uniform(-1, 1), rng.uniform(-1, 1),
                      rng.uniform(-1, 1), rng.uniform(-1, 1)})});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.hadamard(p[0], p[1]));
  }, {random_matrix(rng, 3, 3, -1, 1), random_matrix(rng, 3, 3, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.concat_cols({p[0], p[1], p[2]}));
  }, {random_matrix(rng, 3, 2, -1, 1), random_matrix(rng, 3, 3, -1, 1),
      random_matrix(rng, 3, 1, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.relu(p[0]));
  }, {kink_free_matrix(rng, 4, 4)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.sigmoid(p[0]));
  }, {random_matrix(rng, 4, 4, -3, 3)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.clamp01(p[0]));
  }, {kink_free_matrix(rng, 4, 4)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.mean_rows(p[0], {1.0, 0.0, 1.0}));
  }, {random_matrix(rng, 3, 5, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return t.mse(p[0], p[1]);
  }, {random_matrix(rng, 3, 3, -1, 1), random_matrix(rng, 3, 3, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.transpose(p[0]));
  }, {random_matrix(rng, 2, 5, -1, 1)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.row_normalize(p[0]));
  }, {random_matrix(rng, 4, 4, 0.2, 1.0)});
  prim([&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return to_loss(t, t.scale(p[0], 2.7));
  }, {random_matrix(rng, 3, 3, -1, 1)});

  if (!ok) {
    std::printf("[C1] FAIL primitive gradients, max rel error %.3e\n",
                worst_prim);
    return false;
  }

  const OpVocabulary vocab = vocab5();
  double worst_model = 0.0;
  std::size_t checks = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const CellGraph cell = random_cell(rng, 2 + rng.index(7), vocab);
    for (PredictorKind kind :
         {PredictorKind::kMlp, PredictorKind::kGcn, PredictorKind::kBiGcn,
          PredictorKind::kRatsGcn}) {
      const PredictorConfig config = config_for(kind, vocab.size(), 8, 6, 2);
      Rng init_rng(mix_seed(500, i));
      const PredictorParams params = init_params(config, init_rng);
      const EncodedCell enc = encode_cell(cell, config);
      const TapeFn build = [&](Tape& t, const std::vector<Tape::NodeId>& ids) {
        const Tape::NodeId pred = build_forward(t, config, ids, enc);
        return t.mse(pred, t.leaf(Tensor::matrix(1, 1, {0.37})));
      };
      const GradCheckReport rep =
          grad_check(build, flatten_params(config, params), 1e-4);
      ok = ok && rep.pass;
      worst_model = std::max(worst_model, rep.max_rel_error);
      ++checks;
    }
  }

  std::printf(
      "[C1] %s gradients: 13 primitives max rel error %.3e (tol 1e-6), "
      "%zu full-model checks max rel error %.3e (tol 1e-4)\n",
      ok ? "PASS" : "FAIL", worst_prim, checks, worst_model);
  return ok;
}

bool check_degeneracy() {
  const OpVocabulary vocab = vocab7();
  Rng rng(202);
  double worst_gcn = 0.0, worst_mlp = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const CellGraph cell = random_cell(rng, 2 + rng.index(6), vocab);
    const PredictorConfig rats =
        config_for(PredictorKind::kRatsGcn, vocab.size(), 7, 8, 3);
    Rng init_rng(mix_seed(600, i));
    PredictorParams p = init_params(rats, init_rng);

    PredictorConfig plain = rats;
    PredictorParams shared;
    shared.w = p.w;
    shared.readout = p.readout;

    // saturated heads: offset -> 0, strength -> 1, trails unchanged
    for (RatsParams& r : p.rats) {
      for (double& v : r.w_off.data()) v = 0.0;
      for (double& v : r.b_off.data()) v = -40.0;
      for (double& v : r.w_str.data()) v = 0.0;
      for (double& v : r.b_str.data()) v = 40.0;
    }
    plain.kind = PredictorKind::kGcn;
    worst_gcn = std::max(worst_gcn, std::abs(forward(rats, p, cell) -
                                             forward(plain, shared, cell)));

    // cut heads: strength -> 0, trails vanish, propagation collapses to
    // per-node updates
    for (RatsParams& r : p.rats)
      for (double& v : r.b_str.data()) v = -40.0;
    plain.kind = PredictorKind::kMlp;
    worst_mlp = std::max(worst_mlp, std::abs(forward(rats, p, cell) -
                                             forward(plain, shared, cell)));
  }
  const bool ok = worst_gcn < 1e-6 && worst_mlp < 1e-6;
  std::printf(
      "[C2] %s trail-module extremes over 100 cells: |rats-gcn| %.3e, "
      "|rats-mlp| %.3e (tol 1e-6)\n",
      ok ? "PASS" : "FAIL", worst_gcn, worst_mlp);
  return ok;
}

bool check_spearman() {
  Rng rng(303);
  double worst = 0.0;
  for (std::size_t trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    const double q = double(1 + rng.index(8));
    std::vector<double> pred(n), truth(n);
    for (std::size_t i = 0; i < n; ++i) {
      pred[i] = std::round(rng.uniform() * q) / q;
      truth[i] = std::round(rng.uniform() * q) / q;
    }
    pred[0] = -1.0;  // rules out constant vectors
    truth[0] = -1.0;

    // counting ranks: 1 + #smaller + half of the other equal entries
    const auto ranks = [](const std::vector<double>& v) {
      std::vector<double> r(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0.0, equal = 0.0;
        for (double other : v) {
          if (other < v[i]) less += 1.0;
          if (other == v[i]) equal += 1.0;
        }
        r[i] = less + 1.0 + (equal - 1.0) / 2.0;
      }
      return r;
    };
    const std::vector<double> ra = ranks(pred);
    const std::vector<double> rb = ranks(truth);
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sa += ra[i];
      sb += rb[i];
    }
    const double ma = sa / double(n), mb = sb / double(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cov += (ra[i] - ma) * (rb[i] - mb);
      va += (ra[i] - ma) * (ra[i] - ma);
      vb += (rb[i] - mb) * (rb[i] - mb);
    }
    const double expected = cov / std::sqrt(va * vb);
    worst = std::max(worst, std::abs(spearman(pred, truth) - expected));
  }
  const bool ok = worst < 1e-12;
  std::printf(
      "[C3] %s rank correlation vs counting oracle on 1000 tied vectors: "
      "max |diff| %.3e (tol 1e-12)\n",
      ok ? "PASS" : "FAIL", worst);
  return ok;
}

bool check_search_invariants() {
  Rng rng(404);
  bool ok = true;
  std::string why;
  for (std::size_t run = 0; run < 100 && ok; ++run) {
    SynthSpec spec;
    spec.n_cells = 48 + rng.index(193);
    spec.seed = run;
    const Benchmark bench = gen_synthetic(spec);
    const std::size_t n = bench.space.entries.size();

    P3sOptions opt;
    opt.k = 4 + rng.index(5);
    opt.seed = mix_seed(900, run);
    opt.config = config_for(PredictorKind::kRatsGcn, bench.vocab.size(),
                            bench.max_nodes, 4, 2);
    opt.train.epochs = 3;
    opt.train.lr = 5e-3;
    opt.fallback =
        run % 2 ? RefocusFallback::kLatterHalf : RefocusFallback::kKeep;
    const std::size_t budget =
        std::min(opt.k * (3 + rng.index(4)) + rng.index(opt.k), n);

    const SearchResult res = run_p3s(bench.space, opt, budget, false);

    if (res.samples_used != budget || res.history.size() != budget) {
      ok = false;
      why = "budget accounting";
      break;
    }
    std::unordered_set<std::string> seen;
    std::size_t used = 0, at = 0;
    for (std::size_t s = 0; s < res.steps.size(); ++s) {
      const StepRecord& rec = res.steps[s];
      if (rec.lo > rec.hi || rec.hi >= n) {
        ok = false;
        why = "interval bounds";
        break;
      }
      const std::size_t want =
          s == 0 ? opt.k : std::min(opt.k, budget - used);
      if (rec.sampled_ids.size() != want) {
        ok = false;
        why = "growth per step";
        break;
      }
      if (s > 0 && !rec.widened &&
          (rec.lo < res.steps[s - 1].lo || rec.hi > res.steps[s - 1].hi)) {
        ok = false;
        why = "interval grew without widening";
        break;
      }
      if (s > 0 && rec.best_so_far < res.steps[s - 1].best_so_far - 1e-15) {
        ok = false;
        why = "best regressed";
        break;
      }
      for (const std::string& id : rec.sampled_ids) {
        if (!seen.insert(id).second || res.history[at++] != id) {
          ok = false;
          why = "duplicate or reordered sample";
          break;
        }
      }
      used += rec.sampled_ids.size();
      if (!ok) break;
    }

    if (ok && run % 10 == 0) {
      const SearchResult replay = run_p3s(bench.space, opt, budget, false);
      bool same = replay.history == res.history &&
                  replay.steps.size() == res.steps.size();
      for (std::size_t s = 0; same && s < res.steps.size(); ++s) {
        const StepRecord &a = res.steps[s], &b = replay.steps[s];
        same = a.t == b.t && a.lo == b.lo && a.hi == b.hi &&
               a.widened == b.widened && a.sampled_ids == b.sampled_ids &&
               a.best_so_far == b.best_so_far;
      }
      if (!same) {
        ok = false;
        why = "replay diverged";
      }
    }
  }
  std::printf(
      "[C4] %s focus-interval invariants over 100 synthetic runs%s%s\n",
      ok ? "PASS" : "FAIL", ok ? "" : ": ", why.c_str());
  return ok;
}

bool check_sample_efficiency() {
  SynthSpec spec;
  const Benchmark bench = gen_synthetic(spec);
  const std::size_t n = bench.space.entries.size();

  std::vector<std::size_t> random_hits(501);
  for (std::size_t r = 0; r < random_hits.size(); ++r) {
    const SearchResult res = run_random_search(bench.space, r, n, true);
    random_hits[r] = samples_to_optimum(res.history, bench.space);
  }
  const double random_median = median_of(random_hits);

  P3sOptions opt;
  opt.k = 10;
  opt.config = config_for(PredictorKind::kRatsGcn, bench.vocab.size(),
                          bench.max_nodes, 8, 2);
  opt.train.epochs = 25;
  opt.train.lr = 3e-3;
  opt.train.stop_loss = 2e-4;
  std::vector<std::size_t> p3s_hits(31);
  for (std::size_t r = 0; r < p3s_hits.size(); ++r) {
    opt.seed = mix_seed(1000, r);
    const SearchResult res = run_p3s(bench.space, opt, 340, true);
    p3s_hits[r] = samples_to_optimum(res.history, bench.space);
  }
  const double p3s_median = median_of(p3s_hits);

  const bool ok = p3s_median < 1024.0 && std::abs(random_median - 2048.0) <= 120.0;
  std::printf(
      "[C5] %s optimum discovery on the %zu-cell benchmark: guided median "
      "%.0f of 31 runs (< 1024), uniform median %.0f of %zu runs "
      "(2048 +/- 120)\n",
      ok ? "PASS" : "FAIL", n, p3s_median, random_median, random_hits.size());
  return ok;
}

bool check_memorization() {
  const OpVocabulary vocab = vocab7();
  Rng rng(505);
  std::vector<TrainExample> pool;
  const double accs[5] = {0.12, 0.33, 0.51, 0.74, 0.92};
  while (pool.size() < 5) {
    const CellGraph cell = random_cell(rng, 4 + rng.index(4), vocab);
    bool dup = false;
    for (const TrainExample& e : pool)
      dup = dup || (e.cell.n == cell.n &&
                    e.cell.adjacency.data() == cell.adjacency.data() &&
                    e.cell.ops.data() == cell.ops.data());
    if (!dup) pool.push_back({cell, accs[pool.size()]});
  }

  bool ok = true;
  double worst = 0.0;
  for (PredictorKind kind :
       {PredictorKind::kMlp, PredictorKind::kGcn, PredictorKind::kBiGcn,
        PredictorKind::kRatsGcn}) {
    const PredictorConfig config = config_for(kind, vocab.size(), 7, 16, 2);
    TrainOptions topt;
    topt.epochs = 2000;
    topt.lr = 5e-3;
    topt.seed = 4;
    topt.stop_loss = 5e-5;
    const TrainResult res = train_predictor(config, pool, topt);
    worst = std::max(worst, res.final_loss);
    ok = ok && res.final_loss < 1e-4;
  }
  std::printf(
      "[C6] %s five-cell memorization for all kinds within 2000 epochs: "
      "worst MSE %.3e (tol 1e-4)\n",
      ok ? "PASS" : "FAIL", worst);
  return ok;
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  struct Check {
    const char* tag;
    bool (*fn)();
  };
  const Check checks[] = {
      {"C1", check_gradients},        {"C2", check_degeneracy},
      {"C3", check_spearman},         {"C4", check_search_invariants},
      {"C5", check_sample_efficiency}, {"C6", check_memorization},
  };
  int failures = 0;
  for (const Check& c : checks) {
    bool ok = false;
    const std::clock_t start = std::clock();
    try {
      ok = c.fn();
    } catch (const std::exception& e) {
      std::printf("[%s] FAIL threw: %s\n", c.tag, e.what());
    }
    std::printf("     %s took %.1fs\n", c.tag,
                double(std::clock() - start) / CLOCKS_PER_SEC);
    if (!ok) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
