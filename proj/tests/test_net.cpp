#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "diffmia/ddim.hpp"
#include "diffmia/error.hpp"
#include "diffmia/net.hpp"
#include "diffmia/schedule.hpp"
#include "helpers.hpp"

using namespace diffmia;

namespace {

double act_scalar(Activation a, double z) {
  if (a == Activation::silu) return z / (1.0 + std::exp(-z));
  return std::tanh(z);
}

// Independent single-sample forward pass written with explicit loops, used
// as the duplicate code path for the loss-recompute oracle.
Eigen::VectorXd manual_forward(const DenoiserNet& net,
                               const Eigen::VectorXd& x, int t, int T) {
  const Eigen::VectorXd emb = timestep_embedding(t, T, net.cfg.embed_width);
  std::vector<double> h(static_cast<std::size_t>(x.size() + emb.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) h[i] = x[i];
  for (Eigen::Index i = 0; i < emb.size(); ++i) h[x.size() + i] = emb[i];

  for (int l = 0; l < net.n_layers(); ++l) {
    const auto& W = net.W[l];
    std::vector<double> z(static_cast<std::size_t>(W.cols()));
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      double acc = net.b[l][j];
      for (Eigen::Index i = 0; i < W.rows(); ++i) acc += h[i] * W(i, j);
      z[j] = (l + 1 < net.n_layers()) ? act_scalar(net.cfg.activation, acc)
                                      : acc;
    }
    h = std::move(z);
  }
  Eigen::VectorXd out(net.cfg.pixels);
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = h[i];
  return out;
}

}  // namespace

TEST_CASE("layer_dims concatenates pixels, embedding, hidden and output") {
  NetConfig cfg;
  CHECK(cfg.layer_dims() == std::vector<int>{80, 128, 128, 64});
  cfg.pixels = 4;
  cfg.embed_width = 0;
  cfg.hidden = {};
  CHECK(cfg.layer_dims() == std::vector<int>{4, 4});
}

TEST_CASE("make_net shapes, zero output layer and He-scaled hidden layers") {
  const DenoiserNet net = make_net(NetConfig{}, 1);
  REQUIRE(net.n_layers() == 3);
  CHECK(net.W[0].rows() == 80);
  CHECK(net.W[0].cols() == 128);
  CHECK(net.W[1].rows() == 128);
  CHECK(net.W[2].cols() == 64);
  CHECK(net.n_params() == 80u * 128 + 128 + 128u * 128 + 128 + 128u * 64 + 64);

  CHECK(net.W[2].isZero(0.0));
  for (int l = 0; l < 3; ++l) CHECK(net.b[l].isZero(0.0));
  CHECK(!net.W[0].isZero(0.0));

  // He init: entries of the first layer have variance ~ 2 / fan_in.
  const double var = net.W[0].array().square().mean();
  CHECK(var == doctest::Approx(2.0 / 80.0).epsilon(0.10));

  const DenoiserNet again = make_net(NetConfig{}, 1);
  CHECK((again.W[0].array() == net.W[0].array()).all());
  const DenoiserNet other = make_net(NetConfig{}, 2);
  CHECK(!(other.W[0].array() == net.W[0].array()).all());
}

TEST_CASE("make_net validates its configuration") {
  NetConfig cfg;
  cfg.pixels = 0;
  CHECK_THROWS_AS(make_net(cfg, 1), ConfigError);
  cfg.pixels = 4;
  cfg.embed_width = 3;
  CHECK_THROWS_AS(make_net(cfg, 1), ConfigError);
}

TEST_CASE("timestep embedding values follow the sinusoidal formula") {
  CHECK_THROWS_AS(timestep_embedding(1, 10, 3), ContractViolation);
  CHECK(timestep_embedding(5, 10, 0).size() == 0);

  const Eigen::VectorXd e0 = timestep_embedding(0, 100, 16);
  for (int k = 0; k < 8; ++k) {
    CHECK(e0[k] == 0.0);
    CHECK(e0[8 + k] == 1.0);
  }

  const Eigen::VectorXd e = timestep_embedding(7, 100, 4);
  const double base = 7.0 / 100.0 * 2.0 * std::numbers::pi * 10.0;
  CHECK(e[0] == doctest::Approx(std::sin(base)).epsilon(1e-12));
  CHECK(e[1] == doctest::Approx(std::sin(base / 1000.0)).epsilon(1e-12));
  CHECK(e[2] == doctest::Approx(std::cos(base)).epsilon(1e-12));
  CHECK(e[3] == doctest::Approx(std::cos(base / 1000.0)).epsilon(1e-12));

  for (Eigen::Index i = 0; i < e.size(); ++i) {
    CHECK(std::abs(e[i]) <= 1.0);
  }
}

TEST_CASE("freshly initialized and zeroed nets predict exactly zero") {
  const NoiseSchedule s = default_schedule(10);
  const DenoiserNet fresh = make_net(NetConfig{}, 3);
  const Eigen::VectorXd x = testutil::random_image(64, 4);
  CHECK(predict_eps(fresh, {x, 5}, s).isZero(0.0));

  const DenoiserNet zeroed = testutil::zero_net(9, 4, {7});
  CHECK(predict_eps(zeroed, {testutil::random_image(9, 5), 3}, s)
            .isZero(0.0));
}

TEST_CASE("one-pixel linear net is an affine map of its input") {
  DenoiserNet net = testutil::zero_net(1, 0, {});
  net.W[0](0, 0) = 0.7;
  net.b[0][0] = -0.3;
  const NoiseSchedule s = default_schedule(10);
  Eigen::VectorXd x(1);
  x[0] = 0.45;
  const Eigen::VectorXd out = predict_eps(net, {x, 2}, s);
  CHECK(out[0] == doctest::Approx(0.7 * 0.45 - 0.3).epsilon(1e-15));
}

TEST_CASE("repeated forward passes are bit-identical") {
  const DenoiserNet net = testutil::random_net(16, 4, {12, 8}, 6);
  const NoiseSchedule s = default_schedule(20);
  const Eigen::VectorXd x = testutil::random_image(16, 7);
  const Eigen::VectorXd a = predict_eps(net, {x, 11}, s);
  const Eigen::VectorXd b = predict_eps(net, {x, 11}, s);
  CHECK((a.array() == b.array()).all());
}

TEST_CASE("batched forward rows agree with single-sample passes") {
  const DenoiserNet net = testutil::random_net(9, 2, {6}, 8);
  const NoiseSchedule s = default_schedule(15);
  Eigen::MatrixXd X(3, 9);
  for (int i = 0; i < 3; ++i) {
    X.row(i) = testutil::random_image(9, 100 + i).transpose();
  }
  const BatchTrace tr = forward_batch(net, X, {1, 7, 15}, s.T);
  const std::vector<int> ts = {1, 7, 15};
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd single =
        predict_eps(net, {X.row(i).transpose(), ts[i]}, s);
    CHECK((tr.out.row(i).transpose() - single).lpNorm<Eigen::Infinity>() <=
          1e-12);
  }
}

TEST_CASE("training loss null and norm identities") {
  const NoiseSchedule s = default_schedule(10);
  const DenoiserNet zero = testutil::zero_net(6, 2, {5});
  const Eigen::VectorXd x0 = testutil::random_image(6, 9);

  CHECK(training_loss(zero, x0, 4, Eigen::VectorXd::Zero(6), s) == 0.0);

  const Eigen::VectorXd eps = testutil::random_vec(6, 10);
  CHECK(training_loss(zero, x0, 4, eps, s) == eps.squaredNorm());
}

TEST_CASE("training loss matches a looped re-implementation") {
  const NoiseSchedule s = default_schedule(25);
  for (const Activation act : {Activation::silu, Activation::tanh}) {
    const DenoiserNet net =
        testutil::random_net(8, 4, {7, 5}, 11 + (act == Activation::tanh), 0.4,
                             act);
    const Eigen::VectorXd x0 = testutil::random_image(8, 12);
    const Eigen::VectorXd eps = testutil::random_vec(8, 13);
    const int t = 9;

    const double ab = s.alpha_bar(t);
    const Eigen::VectorXd xt =
        std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
    const Eigen::VectorXd pred = manual_forward(net, xt, t, s.T);
    double expected = 0.0;
    for (Eigen::Index i = 0; i < eps.size(); ++i) {
      const double d = eps[i] - pred[i];
      expected += d * d;
    }

    const double got = training_loss(net, x0, t, eps, s);
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("fully zero configuration has exactly zero gradients") {
  const NoiseSchedule s = default_schedule(10);
  const DenoiserNet zero = testutil::zero_net(5, 2, {4});
  const GradientSet g = param_gradients(zero, Eigen::VectorXd::Zero(5), 3,
                                        Eigen::VectorXd::Zero(5), s);
  for (int l = 0; l < zero.n_layers(); ++l) {
    CHECK(g.dW[l].isZero(0.0));
    CHECK(g.db[l].isZero(0.0));
    CHECK(g.layer_norm(l) == 0.0);
  }
}

TEST_CASE("single-parameter chain rule by hand") {
  DenoiserNet net = testutil::zero_net(1, 0, {});
  net.W[0](0, 0) = 0.6;
  net.b[0][0] = 0.1;
  const NoiseSchedule s = default_schedule(10);
  Eigen::VectorXd x0(1), eps(1);
  x0[0] = -0.4;
  eps[0] = 0.9;
  const int t = 6;

  const double ab = s.alpha_bar(t);
  const double xt = std::sqrt(ab) * x0[0] + std::sqrt(1.0 - ab) * eps[0];
  const double pred = 0.6 * xt + 0.1;
  // loss = (eps - pred)^2, so dL/dw = 2 (pred - eps) xt, dL/db = 2 (pred - eps)
  const double dw = 2.0 * (pred - eps[0]) * xt;
  const double db = 2.0 * (pred - eps[0]);

  const GradientSet g = param_gradients(net, x0, t, eps, s);
  CHECK(g.dW[0](0, 0) == doctest::Approx(dw).epsilon(1e-12));
  CHECK(g.db[0][0] == doctest::Approx(db).epsilon(1e-12));
  CHECK(g.layer_norm(0) ==
        doctest::Approx(std::sqrt(dw * dw + db * db)).epsilon(1e-12));
}

TEST_CASE("reverse-mode gradients match central finite differences") {
  const NoiseSchedule s = default_schedule(20);
  struct Cfg {
    int pixels, embed;
    std::vector<int> hidden;
    Activation act;
  };
  const std::vector<Cfg> cfgs = {
      {4, 4, {6}, Activation::silu},
      {4, 0, {5, 3}, Activation::tanh},
  };
  int seed = 20;
  for (const auto& c : cfgs) {
    DenoiserNet net =
        testutil::random_net(c.pixels, c.embed, c.hidden, seed++, 0.5, c.act);
    const Eigen::VectorXd x0 = testutil::random_image(c.pixels, seed++);
    const Eigen::VectorXd eps = testutil::random_vec(c.pixels, seed++);
    const int t = 8;
    const GradientSet g = param_gradients(net, x0, t, eps, s);

    const double h = 1e-4;
    const auto check_param = [&](double* p, double analytic) {
      const double saved = *p;
      *p = saved + h;
      const double up = training_loss(net, x0, t, eps, s);
      *p = saved - h;
      const double dn = training_loss(net, x0, t, eps, s);
      *p = saved;
      const double fd = (up - dn) / (2.0 * h);
      const double denom = std::max(std::abs(analytic), 1e-8);
      CHECK(std::abs(fd - analytic) / denom <= 1e-4);
    };
    for (int l = 0; l < net.n_layers(); ++l) {
      for (Eigen::Index i = 0; i < net.W[l].size(); ++i) {
        check_param(net.W[l].data() + i, g.dW[l].data()[i]);
      }
      for (Eigen::Index i = 0; i < net.b[l].size(); ++i) {
        check_param(net.b[l].data() + i, g.db[l][i]);
      }
    }
  }
}

TEST_CASE("gradient set arithmetic") {
  const DenoiserNet net = testutil::random_net(3, 0, {4}, 30);
  const NoiseSchedule s = default_schedule(10);
  const Eigen::VectorXd x0 = testutil::random_image(3, 31);
  const Eigen::VectorXd eps = testutil::random_vec(3, 32);
  const GradientSet g = param_gradients(net, x0, 5, eps, s);

  GradientSet acc = zero_gradients(net);
  acc.add_scaled(g, 0.5);
  acc.add_scaled(g, 0.5);
  for (int l = 0; l < net.n_layers(); ++l) {
    CHECK((acc.dW[l] - g.dW[l]).lpNorm<Eigen::Infinity>() <= 1e-15);
  }
  acc.scale(0.0);
  CHECK(acc.layer_norm(0) == 0.0);
}

TEST_CASE("activation names round-trip") {
  CHECK(activation_name(Activation::silu) == "silu");
  CHECK(activation_name(Activation::tanh) == "tanh");
  CHECK(activation_from_name("silu") == Activation::silu);
  CHECK(activation_from_name("tanh") == Activation::tanh);
  CHECK_THROWS_AS(activation_from_name("relu"), ConfigError);
}

TEST_CASE("finite() detects poisoned parameters") {
  DenoiserNet net = testutil::random_net(3, 0, {4}, 33);
  CHECK(net.finite());
  net.W[0](1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(!net.finite());
}
