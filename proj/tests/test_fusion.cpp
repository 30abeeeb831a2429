#include <algorithm>
#include <random>

#include "dmfrl/errors.hpp"
#include "dmfrl/fusion.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace dmfrl;

namespace {

std::vector<PrimitiveLayer> random_primitives(std::size_t n, std::size_t in, std::size_t d,
                                              std::mt19937_64& rng) {
  std::vector<PrimitiveLayer> out;
  for (std::size_t i = 0; i < n; ++i) {
    MLP actor({in, d, d, 2}, Activation::relu, Activation::tanh, rng());
    out.push_back(extract_first_layer(actor, "p" + std::to_string(i)));
  }
  return out;
}

std::vector<Matrix> as_rows(const std::vector<oracle::Vec>& h) {
  std::vector<Matrix> out;
  for (const auto& v : h) out.push_back(Matrix::row_vector(v));
  return out;
}

}  // namespace

TEST_CASE("fuse_features hand example and zero linear path") {
  const std::vector<std::vector<double>> h{{1, 2}, {3, 4}, {5, 6}};
  const Matrix w(6, 2);
  const std::vector<double> b(2, 0.0);
  const auto f = fuse_features(std::span<const std::vector<double>>(h), w, b);
  CHECK(f == std::vector<double>{9, 12, 15, 48, 0, 0});
}

TEST_CASE("fuse_features n = 1 reduces to h || h || fc(h)") {
  std::mt19937_64 rng(1);
  const auto h = oracle::random_vec(4, rng);
  const Matrix w = oracle::random_matrix(4, 4, rng);
  const auto b = oracle::random_vec(4, rng);
  const std::vector<std::vector<double>> hs{h};
  const auto f = fuse_features(std::span<const std::vector<double>>(hs), w, b);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(f[j] == h[j]);
    CHECK(f[4 + j] == h[j]);
    double lin = b[j];
    for (std::size_t k = 0; k < 4; ++k) lin += h[k] * w(k, j);
    CHECK(f[8 + j] == doctest::Approx(lin).epsilon(1e-14));
  }
}

TEST_CASE("fuse_features matches the brute-force oracle") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 3, d = 8;
    std::vector<oracle::Vec> h;
    for (std::size_t i = 0; i < n; ++i) h.push_back(oracle::random_vec(d, rng));
    const Matrix w = oracle::random_matrix(n * d, d, rng);
    const auto b = oracle::random_vec(d, rng);
    const auto expected = oracle::fuse(h, std::vector<double>(w.data().begin(), w.data().end()), b);
    const Matrix got = fuse_features(as_rows(h), w, b);
    REQUIRE(got.cols() == 3 * d);
    for (std::size_t j = 0; j < 3 * d; ++j) CHECK(std::abs(got(0, j) - expected[j]) < 1e-12);
  }
}

TEST_CASE("fuse_features errors") {
  const std::vector<Matrix> h{Matrix(1, 2), Matrix(1, 3)};
  CHECK_THROWS_AS(fuse_features(h, Matrix(5, 2), std::vector<double>(2)), DimensionError);
  const std::vector<Matrix> ok{Matrix(1, 2), Matrix(1, 2)};
  CHECK_THROWS_AS(fuse_features(ok, Matrix(3, 2), std::vector<double>(2)), DimensionError);
  CHECK_THROWS_AS(fuse_features(ok, Matrix(4, 2), std::vector<double>(3)), DimensionError);
  CHECK_THROWS_AS(fuse_features(std::vector<Matrix>{}, Matrix(0, 0), {}), DimensionError);
}

TEST_CASE("permutation symmetry, annihilation, fc counterexample") {
  std::mt19937_64 rng(3);
  const std::size_t n = 3, d = 4;
  std::vector<oracle::Vec> h;
  for (std::size_t i = 0; i < n; ++i) h.push_back(oracle::random_vec(d, rng));
  const Matrix w = oracle::random_matrix(n * d, d, rng);
  const auto b = oracle::random_vec(d, rng);
  const Matrix base = fuse_features(as_rows(h), w, b);
  std::vector<std::size_t> perm{0, 1, 2};
  bool fc_changed = false;
  while (std::next_permutation(perm.begin(), perm.end())) {
    std::vector<oracle::Vec> hp;
    for (auto i : perm) hp.push_back(h[i]);
    const Matrix f = fuse_features(as_rows(hp), w, b);
    for (std::size_t j = 0; j < 2 * d; ++j)
      CHECK(f(0, j) == doctest::Approx(base(0, j)).epsilon(1e-14));
    for (std::size_t j = 2 * d; j < 3 * d; ++j) fc_changed |= std::abs(f(0, j) - base(0, j)) > 1e-9;
  }
  CHECK(fc_changed);

  h[1].assign(d, 0.0);
  const Matrix z = fuse_features(as_rows(h), w, b);
  for (std::size_t j = d; j < 2 * d; ++j) CHECK(z(0, j) == 0.0);
}

TEST_CASE("average stacking starts the linear path at the mean feature") {
  const Matrix w = average_stacking(3, 2);
  CHECK(w.rows() == 6);
  CHECK(w.cols() == 2);
  const std::vector<std::vector<double>> h{{1, 2}, {3, 4}, {5, 9}};
  const auto f = fuse_features(std::span<const std::vector<double>>(h), w, std::vector<double>(2));
  CHECK(f[4] == doctest::Approx(3.0));
  CHECK(f[5] == doctest::Approx(5.0));
}

TEST_CASE("extract_first_layer copies the first layer exactly") {
  std::mt19937_64 rng(4);
  MLP actor({15, 8, 8, 2}, Activation::relu, Activation::tanh, 5);
  const PrimitiveLayer p = extract_first_layer(actor, "ck");
  const PrimitiveLayer q = extract_first_layer(actor, "ck");
  CHECK(p == q);
  CHECK(p.source_id == "ck");
  const Matrix x = oracle::random_matrix(6, 15, rng);
  MLP first({15, 8}, {Activation::identity});
  first.layers()[0].weight = actor.layers()[0].weight;
  first.layers()[0].bias = actor.layers()[0].bias;
  CHECK(p.features(x, false) == first.predict(x));

  MLP no_hidden({15, 2}, Activation::relu, Activation::tanh, 1);
  CHECK_THROWS_AS(extract_first_layer(no_hidden, "x"), DimensionError);

  MLP other({13, 8, 2}, Activation::relu, Activation::tanh, 1);
  try {
    check_compatible(p, extract_first_layer(other, "y"));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("15") != std::string::npos);
    CHECK(msg.find("13") != std::string::npos);
  }
}

TEST_CASE("FusionPolicy construction and shapes") {
  std::mt19937_64 rng(5);
  FusionPolicy policy(random_primitives(3, 15, 16, rng), FusionOptions{}, 7);
  CHECK(policy.fc_weight().rows() == 48);
  CHECK(policy.fc_weight().cols() == 16);
  CHECK(policy.head().input_dim() == 48);
  CHECK(policy.head().output_dim() == 2);
  CHECK(policy.fc_weight() == average_stacking(3, 16));
  for (double v : policy.fc_bias()) CHECK(v == 0.0);

  FusionPolicy two(random_primitives(2, 15, 16, rng), FusionOptions{}, 7);
  CHECK(two.head().input_dim() == 48);

  CHECK_THROWS_AS(FusionPolicy(random_primitives(1, 15, 16, rng), FusionOptions{}, 1),
                  ArgumentError);
  auto mixed = random_primitives(2, 15, 16, rng);
  mixed.push_back(random_primitives(1, 15, 8, rng).front());
  CHECK_THROWS_AS(FusionPolicy(mixed, FusionOptions{}, 1), DimensionError);
}

TEST_CASE("forward composes extract, relu, fuse and head") {
  std::mt19937_64 rng(6);
  FusionPolicy policy(random_primitives(3, 15, 8, rng), FusionOptions{}, 9);
  const Matrix x = oracle::random_matrix(5, 15, rng);
  std::vector<Matrix> h;
  for (const auto& p : policy.primitives()) h.push_back(p.features(x, true));
  const Matrix fused = fuse_features(h, policy.fc_weight(), policy.fc_bias());
  const Matrix expected = policy.head().predict(fused);
  CHECK(policy.predict(x) == expected);
  CHECK(policy.forward(x) == expected);
  for (double v : expected.data()) CHECK(std::abs(v) <= 1.0);
  CHECK_THROWS_AS(policy.predict(Matrix(1, 14)), ArgumentError);
}

TEST_CASE("zero input with zero biases gives a zero action") {
  std::mt19937_64 rng(7);
  auto prims = random_primitives(2, 15, 4, rng);
  for (auto& p : prims) std::fill(p.bias.begin(), p.bias.end(), 0.0);
  MLP head({12, 6, 2}, Activation::relu, Activation::tanh, 3);
  for (auto& l : head.layers()) std::fill(l.bias.begin(), l.bias.end(), 0.0);
  FusionPolicy policy(prims, average_stacking(2, 4), std::vector<double>(4, 0.0), head,
                      FusionOptions{});
  const Matrix a = policy.predict(Matrix(1, 15));
  CHECK(a(0, 0) == 0.0);
  CHECK(a(0, 1) == 0.0);
}

TEST_CASE("backward: state error, zero grad, finite differences") {
  std::mt19937_64 rng(8);
  for (bool frozen : {true, false}) {
    for (bool post : {true, false}) {
      FusionOptions opts;
      opts.freeze_primitives = frozen;
      opts.post_activation = post;
      opts.head_hidden = 6;
      FusionPolicy policy(random_primitives(3, 5, 4, rng), opts, rng());
      // Random fc path so the check does not sit on the symmetric init.
      FusionPolicy perturbed(policy.primitives(), oracle::random_matrix(12, 4, rng),
                             oracle::random_vec(4, rng), policy.head(), opts);
      const Matrix x = oracle::random_matrix(4, 5, rng);
      const auto r = oracle::check_gradients(perturbed, x, oracle::random_matrix(4, 2, rng));
      CHECK(r.max_rel_error < 1e-4);
      const std::size_t trainable = 12 * 4 + 4 + perturbed.head().parameter_count();
      const std::size_t prim = 3 * (5 * 4 + 4);
      CHECK(r.checked == trainable + (frozen ? 0 : prim) + x.size());
    }
  }

  FusionPolicy fresh(random_primitives(2, 5, 4, rng), FusionOptions{}, 1);
  CHECK_THROWS_AS(fresh.backward(Matrix(1, 2)), StateError);
  fresh.forward(oracle::random_matrix(3, 5, rng));
  fresh.backward(Matrix(3, 2, 0.0));
  for (const auto& p : fresh.parameters()) {
    for (double g : p.grad) CHECK(g == 0.0);
  }
}

TEST_CASE("frozen primitives survive optimizer steps bit-identically") {
  std::mt19937_64 rng(9);
  FusionPolicy policy(random_primitives(3, 5, 4, rng), FusionOptions{}, 2);
  const auto before = policy.primitives();
  const auto head_before = policy.head().flat_parameters();
  Adam adam(1e-2);
  for (int i = 0; i < 100; ++i) {
    policy.zero_grad();
    policy.forward(oracle::random_matrix(8, 5, rng));
    policy.backward(oracle::random_matrix(8, 2, rng));
    adam.step(policy.parameters());
  }
  CHECK(policy.primitives() == before);
  CHECK(policy.head().flat_parameters() != head_before);
}

TEST_CASE("flat parameters and soft copy") {
  std::mt19937_64 rng(10);
  const auto prims = random_primitives(2, 5, 4, rng);
  FusionPolicy a(prims, FusionOptions{}, 1);
  FusionPolicy b(prims, FusionOptions{}, 2);
  CHECK(a.parameter_count() == a.flat_parameters().size());
  CHECK(a.same_architecture(b));
  copy_params(a, b, 1.0);
  CHECK(b.flat_parameters() == a.flat_parameters());
  FusionPolicy c(prims, FusionOptions{}, 3);
  c.set_flat_parameters(a.flat_parameters());
  CHECK(c.flat_parameters() == a.flat_parameters());
  FusionPolicy wide(random_primitives(2, 5, 6, rng), FusionOptions{}, 1);
  CHECK_THROWS_AS(copy_params(a, wide, 0.5), DimensionError);
}
