#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "mitosyn/core/error.hpp"
#include "mitosyn/core/random.hpp"
#include "mitosyn/nn/layers.hpp"
#include "mitosyn/nn/optim.hpp"
#include "mitosyn/nn/serialize.hpp"

using namespace mitosyn;
using namespace mitosyn::nn;

namespace {

Matrix rand_matrix(Index r, Index c, Rng& rng, float scale = 1.0f) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.normal()) * scale;
  return m;
}

// Compares autograd against central differences of sum(f(inputs) * W) for a fixed random W.
void gradcheck(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Matrix> inputs, std::uint64_t seed,
               double tol = 2e-2) {
  Rng rng(seed);
  std::vector<Var> vars;
  for (auto& m : inputs) vars.push_back(Var::parameter(m));
  const Var out = f(vars);
  const Matrix w = rand_matrix(out.rows(), out.cols(), rng);
  auto scalar = [&](const std::vector<Var>& vs) {
    return static_cast<double>(f(vs).value().cwiseProduct(w).sum());
  };
  sum_all(mul(out, Var(w))).backward();
  const float h = 1e-2f;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    ASSERT_TRUE(vars[k].has_grad()) << "input " << k;
    for (Index i = 0; i < inputs[k].size(); ++i) {
      auto plus = inputs, minus = inputs;
      plus[k].data()[i] += h;
      minus[k].data()[i] -= h;
      std::vector<Var> vp, vm;
      for (auto& m : plus) vp.emplace_back(m);
      for (auto& m : minus) vm.emplace_back(m);
      const double numeric = (scalar(vp) - scalar(vm)) / (2.0 * h);
      const double analytic = vars[k].grad().data()[i];
      ASSERT_NEAR(analytic, numeric, tol * std::max(1.0, std::abs(numeric))) << "input " << k << " elem " << i;
    }
  }
}

}  // namespace

TEST(Autograd, ElementwiseAndMatmul) {
  Rng rng(1);
  gradcheck([](const auto& v) { return matmul(v[0], v[1]); }, {rand_matrix(3, 4, rng), rand_matrix(4, 2, rng)}, 2);
  gradcheck([](const auto& v) { return mul(add(v[0], v[1]), sub(v[0], v[1])); },
            {rand_matrix(2, 3, rng), rand_matrix(2, 3, rng)}, 3);
  gradcheck([](const auto& v) { return scale(transpose(v[0]), 2.5f); }, {rand_matrix(2, 3, rng)}, 4);
  gradcheck([](const auto& v) { return add_row(mul_row(v[0], v[1]), v[2]); },
            {rand_matrix(4, 3, rng), rand_matrix(1, 3, rng), rand_matrix(1, 3, rng)}, 5);
}

TEST(Autograd, Activations) {
  Rng rng(6);
  // Keep relu inputs away from the kink.
  Matrix x = rand_matrix(3, 5, rng);
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x.data()[i]) < 0.1f) x.data()[i] = 0.5f;
  }
  gradcheck([](const auto& v) { return relu(v[0]); }, {x}, 7);
  gradcheck([](const auto& v) { return gelu(v[0]); }, {rand_matrix(3, 5, rng)}, 8);
  gradcheck([](const auto& v) { return silu(v[0]); }, {rand_matrix(3, 5, rng)}, 9);
  gradcheck([](const auto& v) { return tanh(v[0]); }, {rand_matrix(3, 5, rng)}, 10);
  gradcheck([](const auto& v) { return exp(v[0]); }, {rand_matrix(3, 5, rng, 0.5f)}, 11);
}

TEST(Autograd, Normalization) {
  Rng rng(12);
  gradcheck([](const auto& v) { return layer_norm(v[0]); }, {rand_matrix(3, 6, rng)}, 13);
  gradcheck([](const auto& v) { return softmax_rows(v[0]); }, {rand_matrix(3, 6, rng)}, 14);
}

TEST(Autograd, Reshaping) {
  Rng rng(15);
  gradcheck([](const auto& v) { return slice_rows(v[0], 1, 2); }, {rand_matrix(4, 3, rng)}, 16);
  gradcheck([](const auto& v) { return slice_cols(v[0], 1, 2); }, {rand_matrix(4, 3, rng)}, 17);
  gradcheck([](const auto& v) { return concat_rows({v[0], v[1]}); }, {rand_matrix(2, 3, rng), rand_matrix(1, 3, rng)},
            18);
  gradcheck([](const auto& v) { return concat_cols({v[0], v[1]}); }, {rand_matrix(2, 3, rng), rand_matrix(2, 1, rng)},
            19);
  gradcheck([](const auto& v) { return gather_rows(v[0], {2, 0, 2, 1}); }, {rand_matrix(3, 2, rng)}, 20);
  gradcheck([](const auto& v) { return group_mean(v[0], 3); }, {rand_matrix(6, 2, rng)}, 21);
  gradcheck([](const auto& v) { return reshape(v[0], 3, 4); }, {rand_matrix(2, 6, rng)}, 22);
  gradcheck([](const auto& v) { return permute(v[0], {5, 3, 1, 0, 2, 4}, 3, 2); }, {rand_matrix(2, 3, rng)}, 23);
  gradcheck([](const auto& v) { return add_tiled(v[0], v[1]); }, {rand_matrix(6, 2, rng), rand_matrix(3, 2, rng)}, 24);
  gradcheck([](const auto& v) { return add_grouped(v[0], v[1]); }, {rand_matrix(6, 2, rng), rand_matrix(2, 2, rng)},
            25);
}

TEST(Autograd, Reductions) {
  Rng rng(26);
  const Matrix target = rand_matrix(3, 3, rng);
  gradcheck([](const auto& v) { return mean_all(v[0]); }, {rand_matrix(3, 3, rng)}, 27);
  gradcheck([&](const auto& v) { return mse(v[0], target); }, {rand_matrix(3, 3, rng)}, 28);
  Var a(Matrix::Constant(2, 2, 3.0f));
  EXPECT_FLOAT_EQ(mse(a, Matrix::Constant(2, 2, 1.0f)).item(), 4.0f);
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  Var x = Var::parameter(Matrix::Constant(1, 1, 3.0f));
  sum_all(mul(x, x)).backward();
  EXPECT_FLOAT_EQ(x.grad()(0, 0), 6.0f);
  Var c(Matrix::Constant(1, 1, 2.0f));
  Var y = mul(c, c);
  EXPECT_EQ(y.node()->parents.size(), 0u);
}

TEST(Layers, TransformerBlockGradients) {
  Rng rng(30);
  TransformerBlock block(4, 2, 2, rng);
  gradcheck([&](const auto& v) { return block(v[0], 3); }, {rand_matrix(6, 4, rng)}, 31, 3e-2);
}

TEST(Layers, AttentionStaysWithinSequence) {
  Rng rng(32);
  TransformerBlock block(4, 2, 2, rng);
  Matrix x = rand_matrix(6, 4, rng);
  const Matrix first = block(Var(x), 3).value().topRows(3);
  x.bottomRows(3).setRandom();
  EXPECT_TRUE(block(Var(x), 3).value().topRows(3).isApprox(first));
}

TEST(Layers, LinearShapesAndSinusoid) {
  Rng rng(33);
  Linear lin(5, 3, rng);
  EXPECT_EQ(lin(Var(rand_matrix(4, 5, rng))).cols(), 3);
  const Matrix e = sinusoidal_embedding({0, 7}, 8);
  for (Index j = 0; j < 4; ++j) {
    EXPECT_FLOAT_EQ(e(0, j), 0.0f);
    EXPECT_FLOAT_EQ(e(0, j + 4), 1.0f);
    const double freq = std::pow(10000.0, -static_cast<double>(j) / 4.0);
    EXPECT_NEAR(e(1, j), std::sin(7.0 * freq), 1e-6);
    EXPECT_NEAR(e(1, j + 4), std::cos(7.0 * freq), 1e-6);
  }
}

TEST(Optim, AdamWMatchesReference) {
  const std::vector<double> grads = {0.5, -1.0, 2.0, 0.1};
  const double lr = 0.01, wd = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  Var p = Var::parameter(Matrix::Constant(1, 1, 1.0f));
  AdamW::Options opt;
  opt.weight_decay = wd;
  AdamW adam({{"p", p}}, opt);
  double w = 1.0, m = 0.0, v = 0.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    adam.zero_grad();
    p.node()->accumulate(Matrix::Constant(1, 1, static_cast<float>(grads[t - 1])));
    adam.step(lr);
    const double g = grads[t - 1];
    w -= lr * wd * w;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t)), vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
    EXPECT_NEAR(p.value()(0, 0), w, 1e-6) << "step " << t;
  }
}

TEST(Optim, NAdamMatchesReference) {
  const std::vector<double> grads = {0.3, 0.3, -0.7, 1.2, 0.0};
  const double lr = 0.02, b1 = 0.9, b2 = 0.999, eps = 1e-8, psi = 4e-3;
  Var p = Var::parameter(Matrix::Constant(1, 1, -0.5f));
  NAdam nadam({{"p", p}});
  double w = -0.5, m = 0.0, v = 0.0, prod = 1.0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    nadam.zero_grad();
    p.node()->accumulate(Matrix::Constant(1, 1, static_cast<float>(grads[t - 1])));
    nadam.step(lr);
    const double g = grads[t - 1];
    const double mu = b1 * (1 - 0.5 * std::pow(0.96, t * psi));
    const double mu1 = b1 * (1 - 0.5 * std::pow(0.96, (t + 1) * psi));
    prod *= mu;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double denom = std::sqrt(v / (1 - std::pow(b2, t))) + eps;
    w -= lr * (1 - mu) / (1 - prod) * g / denom + lr * mu1 / (1 - prod * mu1) * m / denom;
    EXPECT_NEAR(p.value()(0, 0), w, 1e-6) << "step " << t;
  }
}

TEST(Optim, NAdamMinimizesQuadratic) {
  Var p = Var::parameter(Matrix::Constant(1, 3, 4.0f));
  NAdam nadam({{"p", p}});
  for (int i = 0; i < 500; ++i) {
    nadam.zero_grad();
    mse(p, Matrix::Constant(1, 3, -1.0f)).backward();
    nadam.step(0.05);
  }
  EXPECT_NEAR(p.value()(0, 1), -1.0f, 1e-2);
}

TEST(Serialize, RoundTripIsExact) {
  Rng rng(40);
  Linear a(3, 2, rng), b(3, 2, rng);
  const auto j = params_to_json(a.parameters());
  load_params(nlohmann::json::parse(j.dump()), b.parameters());
  EXPECT_EQ(a.parameters()[0].second.value(), b.parameters()[0].second.value());
  EXPECT_EQ(a.parameters()[1].second.value(), b.parameters()[1].second.value());
  Linear c(3, 4, rng);
  EXPECT_ANY_THROW(load_params(j, c.parameters()));
  const Matrix odd = (Matrix(1, 2) << 0.1f, -3.4028235e38f).finished();
  EXPECT_EQ(matrix_from_json(nlohmann::json::parse(matrix_to_json(odd).dump())), odd);
}
