#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "ratsnas/errors.hpp"
#include "ratsnas/optim.hpp"
#include "ratsnas/rng.hpp"
#include "ratsnas/tape.hpp"
#include "ratsnas/tensor.hpp"

using namespace ratsnas;

namespace {

Tensor random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// keeps every entry at least `margin` away from zero
Tensor away_from_zero(Tensor t, double margin) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double s = t[i] < 0.0 ? -1.0 : 1.0;
    t[i] = s * (margin + std::abs(t[i]));
  }
  return t;
}

// squared distance from zero as the scalar head for gradient checks
Tape::NodeId scalarize(Tape& tape, Tape::NodeId id) {
  return tape.mse(id, tape.leaf(Tensor::zeros_like(tape.value(id))));
}

}  // namespace

TEST_CASE("forward values match hand computation") {
  Tape tape;
  const Tape::NodeId x = tape.leaf(Tensor::vector({3.0}));
  CHECK(tape.value(tape.hadamard(x, x)).item() == doctest::Approx(9.0));

  const Tape::NodeId r = tape.relu(tape.leaf(Tensor::vector({-1.0, 2.0})));
  CHECK(tape.value(r)[0] == 0.0);
  CHECK(tape.value(r)[1] == 2.0);

  const Tape::NodeId s = tape.sigmoid(tape.leaf(Tensor::vector({0.0})));
  CHECK(tape.value(s).item() == doctest::Approx(0.5));
}

TEST_CASE("three-layer composition matches a straight-line reimplementation") {
  Rng rng(41);
  for (std::size_t trial = 0; trial < 20; ++trial) {
    const Tensor x = random_matrix(rng, 3, 4);
    const Tensor w1 = random_matrix(rng, 4, 6);
    const Tensor w2 = random_matrix(rng, 6, 2);
    const Tensor target = random_matrix(rng, 1, 2);
    const std::vector<double> mask{1.0, 0.0, 1.0};

    Tape tape;
    const Tape::NodeId h =
        tape.relu(tape.matmul(tape.leaf(x), tape.leaf(w1)));
    const Tape::NodeId p =
        tape.mean_rows(tape.matmul(h, tape.leaf(w2)), mask);
    const double got = tape.value(tape.mse(p, tape.leaf(target))).item();

    // same computation with raw loops
    double hrow[3][6];
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 6; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < 4; ++k) acc += x(i, k) * w1(k, j);
        hrow[i][j] = acc > 0.0 ? acc : 0.0;
      }
    double pooled[2] = {0.0, 0.0};
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t i = 0; i < 3; ++i) {
        if (mask[i] == 0.0) continue;
        double acc = 0.0;
        for (std::size_t k = 0; k < 6; ++k) acc += hrow[i][k] * w2(k, j);
        pooled[j] += acc;
      }
      pooled[j] /= 2.0;
    }
    double want = 0.0;
    for (std::size_t j = 0; j < 2; ++j) {
      const double d = pooled[j] - target(0, j);
      want += d * d;
    }
    want /= 2.0;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("derivative of x*x is 2x") {
  Tape tape;
  const Tape::NodeId x = tape.leaf(Tensor::vector({3.0}), true);
  const Tape::NodeId y = tape.hadamard(x, x);
  const std::vector<Tensor> grads = tape.backprop(y);
  CHECK(grads[x].item() == doctest::Approx(6.0));
}

TEST_CASE("backprop requires a scalar output") {
  Tape tape;
  const Tape::NodeId m = tape.leaf(Tensor::matrix(2, 2), true);
  const Tape::NodeId y = tape.add(m, m);
  CHECK_THROWS_AS(tape.backprop(y), NotScalarError);
}

TEST_CASE("kinked and clamped activations have zero gradient off the slope") {
  auto grad_through = [](auto apply, double at) {
    Tape tape;
    const Tape::NodeId x = tape.leaf(Tensor::vector({at}), true);
    return tape.backprop(apply(tape, x))[x].item();
  };
  auto relu_at = [&](double at) {
    return grad_through(
        [](Tape& t, Tape::NodeId x) { return t.relu(x); }, at);
  };
  auto clamp_at = [&](double at) {
    return grad_through(
        [](Tape& t, Tape::NodeId x) { return t.clamp01(x); }, at);
  };
  CHECK(relu_at(2.0) == 1.0);
  CHECK(relu_at(-1.0) == 0.0);
  CHECK(relu_at(0.0) == 0.0);
  CHECK(clamp_at(0.5) == 1.0);
  CHECK(clamp_at(-0.3) == 0.0);
  CHECK(clamp_at(1.5) == 0.0);
  CHECK(clamp_at(0.0) == 0.0);
  CHECK(clamp_at(1.0) == 0.0);
}

TEST_CASE("every primitive passes finite-difference checks away from kinks") {
  Rng rng(1234);
  const double tol = 1e-6;

  SUBCASE("matmul") {
    const std::vector<Tensor> params{random_matrix(rng, 3, 4),
                                     random_matrix(rng, 4, 2)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.matmul(p[0], p[1]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("add and scale") {
    const std::vector<Tensor> params{random_matrix(rng, 3, 3),
                                     random_matrix(rng, 3, 3)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.scale(t.add(p[0], p[1]), -1.7));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("add_rowvec") {
    const std::vector<Tensor> params{random_matrix(rng, 4, 3),
                                     Tensor::vector({0.3, -0.2, 0.9})};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.add_rowvec(p[0], p[1]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("hadamard") {
    const std::vector<Tensor> params{random_matrix(rng, 3, 5),
                                     random_matrix(rng, 3, 5)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.hadamard(p[0], p[1]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("concat_cols") {
    const std::vector<Tensor> params{random_matrix(rng, 3, 2),
                                     random_matrix(rng, 3, 4),
                                     random_matrix(rng, 3, 1)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.concat_cols({p[0], p[1], p[2]}));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("relu") {
    const std::vector<Tensor> params{
        away_from_zero(random_matrix(rng, 4, 4), 1e-3)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.relu(p[0]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("sigmoid") {
    const std::vector<Tensor> params{random_matrix(rng, 4, 4, -3.0, 3.0)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.sigmoid(p[0]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("clamp01 in the interior") {
    const std::vector<Tensor> params{random_matrix(rng, 4, 4, 0.05, 0.95)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.clamp01(p[0]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("mean_rows") {
    const std::vector<Tensor> params{random_matrix(rng, 5, 3)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.mean_rows(p[0]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("mean_rows with mask") {
    const std::vector<Tensor> params{random_matrix(rng, 5, 3)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(
              t, t.mean_rows(p[0], {1.0, 0.0, 1.0, 1.0, 0.0}));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("mse in both arguments") {
    const std::vector<Tensor> params{random_matrix(rng, 2, 3),
                                     random_matrix(rng, 2, 3)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return t.mse(p[0], p[1]);
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("transpose") {
    const std::vector<Tensor> params{random_matrix(rng, 3, 5)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.matmul(t.transpose(p[0]), p[0]));
        },
        params, tol);
    CHECK(report.pass);
  }
  SUBCASE("row_normalize") {
    const std::vector<Tensor> params{random_matrix(rng, 4, 4, 0.1, 2.0)};
    const auto report = grad_check(
        [](Tape& t, const std::vector<Tape::NodeId>& p) {
          return scalarize(t, t.row_normalize(p[0]));
        },
        params, tol);
    CHECK(report.pass);
  }
}

TEST_CASE("linear regression gradients match finite differences") {
  Rng rng(77);
  const Tensor x = random_matrix(rng, 4, 4);
  const Tensor target = random_matrix(rng, 4, 4);
  const std::vector<Tensor> params{random_matrix(rng, 4, 4)};
  const auto report = grad_check(
      [&](Tape& t, const std::vector<Tape::NodeId>& p) {
        return t.mse(t.matmul(t.leaf(x), p[0]), t.leaf(target));
      },
      params, 1e-6);
  CHECK(report.pass);
  CHECK(report.max_rel_error < 1e-6);
}

TEST_CASE("a corrupted adjoint is caught and located") {
  Rng rng(5150);
  const Tensor x = random_matrix(rng, 3, 3);
  const std::vector<Tensor> params{random_matrix(rng, 3, 3)};
  const TapeFn build = [&](Tape& t, const std::vector<Tape::NodeId>& p) {
    return t.mse(t.matmul(t.leaf(x), p[0]), t.leaf(Tensor::matrix(3, 3)));
  };

  Tape tape;
  const Tape::NodeId w = tape.leaf(params[0], true);
  std::vector<Tensor> analytic{tape.backprop(build(tape, {w}))[w]};
  const std::vector<Tensor> numeric = numeric_gradients(build, params);

  CHECK(compare_gradients(analytic, numeric, 1e-6).pass);

  analytic[0](1, 2) += 0.5;
  const GradCheckReport bad = compare_gradients(analytic, numeric, 1e-6);
  CHECK_FALSE(bad.pass);
  REQUIRE(bad.failures.size() > 0);
  CHECK(bad.failures[0].param == 0);
  CHECK(bad.failures[0].coord == 1 * 3 + 2);
  CHECK(bad.max_rel_error > 0.1);
}

TEST_CASE("backprop is deterministic and repeatable on one tape") {
  Rng rng(8);
  Tape tape;
  const Tape::NodeId w = tape.leaf(random_matrix(rng, 4, 4), true);
  const Tape::NodeId y = tape.mse(tape.relu(tape.matmul(w, w)),
                                  tape.leaf(Tensor::matrix(4, 4)));
  const std::vector<Tensor> first = tape.backprop(y);
  const std::vector<Tensor> second = tape.backprop(y);
  CHECK(first[w].data() == second[w].data());
}

TEST_CASE("truncate reuses parameter leaves across evaluations") {
  Rng rng(21);
  const Tensor w = random_matrix(rng, 4, 4);
  const Tensor x1 = random_matrix(rng, 2, 4);
  const Tensor x2 = random_matrix(rng, 2, 4);

  Tape tape;
  const Tape::NodeId wid = tape.leaf(w, true);
  const std::size_t mark = tape.size();

  const double first =
      tape.value(scalarize(tape, tape.matmul(tape.leaf(x1), wid))).item();
  tape.truncate(mark);
  CHECK(tape.size() == mark);
  const double second =
      tape.value(scalarize(tape, tape.matmul(tape.leaf(x2), wid))).item();

  Tape fresh;
  const double want =
      fresh.value(scalarize(fresh, fresh.matmul(fresh.leaf(x2),
                                                fresh.leaf(w, true))))
          .item();
  CHECK(second == want);
  CHECK(first != second);
}

TEST_CASE("adam leaves parameters alone when gradients vanish") {
  Rng rng(3);
  std::vector<Tensor> params{random_matrix(rng, 3, 3)};
  const std::vector<Tensor> before = params;
  std::vector<Tensor> grads{Tensor::zeros_like(params[0])};
  AdamState state = make_adam(params);
  adam_update(params, grads, state);
  adam_update(params, grads, state);
  CHECK(params[0].data() == before[0].data());
}

TEST_CASE("adam's first step moves by the learning rate") {
  std::vector<Tensor> params{Tensor::vector({1.0})};
  std::vector<Tensor> grads{Tensor::vector({1.0})};
  AdamState state = make_adam(params, 1e-3);
  adam_update(params, grads, state);
  CHECK(std::abs(params[0].item() - (1.0 - 1e-3)) < 1e-9);
}

TEST_CASE("adam drives a convex quadratic to the floor") {
  Rng rng(99);
  const Tensor c = random_matrix(rng, 1, 4);
  Tensor w0 = c;
  for (std::size_t i = 0; i < w0.size(); ++i)
    w0[i] += rng.uniform() < 0.5 ? 0.1 : -0.1;

  std::vector<Tensor> params{w0};
  AdamState state = make_adam(params, 0.01);
  double loss = 0.0;
  for (std::size_t step = 0; step < 200; ++step) {
    Tape tape;
    const Tape::NodeId w = tape.leaf(params[0], true);
    const Tape::NodeId out = tape.mse(w, tape.leaf(c));
    loss = tape.value(out).item();
    const std::vector<Tensor> grads{tape.backprop(out)[w]};
    adam_update(params, grads, state);
  }
  CHECK(loss < 1e-6);
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  std::vector<Tensor> params{Tensor::matrix(2, 2)};
  std::vector<Tensor> grads{Tensor::matrix(2, 3)};
  AdamState state = make_adam(params);
  CHECK_THROWS_AS(adam_update(params, grads, state), ShapeMismatchError);
}

TEST_CASE("glorot initialization is bounded, centered, and seeded") {
  Rng rng(17);
  const double bound = std::sqrt(6.0 / (50 + 50));
  const Tensor t = glorot_uniform(50, 50, rng);
  CHECK(t.rows() == 50);
  CHECK(t.cols() == 50);
  double mean = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    CHECK(std::abs(t[i]) <= bound);
    mean += t[i];
  }
  mean /= static_cast<double>(t.size());
  CHECK(std::abs(mean) < 0.015);

  Rng r1(123), r2(123);
  const Tensor a = glorot_uniform(4, 8, r1);
  const Tensor b = glorot_uniform(4, 8, r2);
  CHECK(a.data() == b.data());
}
