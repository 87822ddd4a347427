#include "diffmia/net.hpp"

#include <cmath>
#include <numbers>

#include "diffmia/ddim.hpp"
#include "diffmia/error.hpp"
#include "diffmia/rng.hpp"

namespace diffmia {

std::string activation_name(Activation a) {
  return a == Activation::silu ? "silu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "silu") return Activation::silu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation: " + name);
}

std::vector<int> NetConfig::layer_dims() const {
  std::vector<int> dims;
  dims.push_back(pixels + embed_width);
  for (int h : hidden) dims.push_back(h);
  dims.push_back(pixels);
  return dims;
}

std::size_t DenoiserNet::n_params() const {
  std::size_t n = 0;
  for (int l = 0; l < n_layers(); ++l) {
    n += static_cast<std::size_t>(W[l].size()) +
         static_cast<std::size_t>(b[l].size());
  }
  return n;
}

bool DenoiserNet::finite() const {
  for (int l = 0; l < n_layers(); ++l) {
    if (!W[l].allFinite() || !b[l].allFinite()) return false;
  }
  return true;
}

DenoiserNet make_net(const NetConfig& cfg, std::uint64_t seed) {
  if (cfg.pixels < 1) throw ConfigError("net: pixels must be >= 1");
  if (cfg.embed_width < 0 || cfg.embed_width % 2 != 0) {
    throw ConfigError("net: embed_width must be even and >= 0");
  }
  DenoiserNet net;
  net.cfg = cfg;
  const auto dims = cfg.layer_dims();
  const int L = static_cast<int>(dims.size()) - 1;
  RngStream rng(seed, stream_tag("net-init"), 0);
  for (int l = 0; l < L; ++l) {
    const int fin = dims[l], fout = dims[l + 1];
    Eigen::MatrixXd w(fin, fout);
    if (l == L - 1) {
      w.setZero();
    } else {
      const double scale = std::sqrt(2.0 / fin);
      for (int i = 0; i < fin; ++i) {
        for (int j = 0; j < fout; ++j) w(i, j) = scale * rng.gaussian();
      }
    }
    net.W.push_back(std::move(w));
    net.b.push_back(Eigen::VectorXd::Zero(fout));
  }
  return net;
}

Eigen::VectorXd timestep_embedding(double t, int T, int width) {
  require(width >= 0 && width % 2 == 0, "timestep_embedding: width must be even");
  Eigen::VectorXd e(width);
  if (width == 0) return e;
  const int half = width / 2;
  for (int k = 0; k < half; ++k) {
    const double freq =
        (half == 1) ? 1.0 : std::exp(-std::log(1000.0) * k / (half - 1));
    const double ang = (t / T) * freq * 2.0 * std::numbers::pi * 10.0;
    e[k] = std::sin(ang);
    e[half + k] = std::cos(ang);
  }
  return e;
}

namespace {

inline void apply_activation(Activation act, const Eigen::MatrixXd& z,
                             Eigen::MatrixXd& h, Eigen::MatrixXd& dh) {
  if (act == Activation::silu) {
    // silu(z) = z * sigmoid(z); silu'(z) = s * (1 + z * (1 - s))
    h = z.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); });
    dh = z.unaryExpr([](double v) {
      const double s = 1.0 / (1.0 + std::exp(-v));
      return s * (1.0 + v * (1.0 - s));
    });
  } else {
    h = z.array().tanh();
    dh = 1.0 - h.array().square();
  }
}

}  // namespace

BatchTrace forward_batch(const DenoiserNet& net, const Eigen::MatrixXd& X,
                         const std::vector<int>& t, int T) {
  const int n = static_cast<int>(X.rows());
  require(static_cast<int>(t.size()) == n, "forward_batch: t size mismatch");
  require(X.cols() == net.cfg.pixels, "forward_batch: pixel dim mismatch");

  BatchTrace tr;
  tr.input0.resize(n, net.cfg.pixels + net.cfg.embed_width);
  tr.input0.leftCols(net.cfg.pixels) = X;
  for (int i = 0; i < n; ++i) {
    tr.input0.row(i).rightCols(net.cfg.embed_width) =
        timestep_embedding(t[i], T, net.cfg.embed_width).transpose();
  }

  const int L = net.n_layers();
  const Eigen::MatrixXd* cur = &tr.input0;
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd z = (*cur * net.W[l]).rowwise() + net.b[l].transpose();
    if (l == L - 1) {
      tr.out = std::move(z);
    } else {
      Eigen::MatrixXd h, dh;
      apply_activation(net.cfg.activation, z, h, dh);
      tr.acts.push_back(std::move(h));
      tr.act_derivs.push_back(std::move(dh));
      cur = &tr.acts.back();
    }
  }
  return tr;
}

std::vector<Eigen::MatrixXd> backward_batch(const DenoiserNet& net,
                                            const BatchTrace& trace,
                                            const Eigen::MatrixXd& dout) {
  const int L = net.n_layers();
  std::vector<Eigen::MatrixXd> deltas(L);
  deltas[L - 1] = dout;
  for (int l = L - 2; l >= 0; --l) {
    deltas[l] = (deltas[l + 1] * net.W[l + 1].transpose())
                    .cwiseProduct(trace.act_derivs[l]);
  }
  return deltas;
}

double GradientSet::layer_norm(int l) const {
  return std::sqrt(dW[l].squaredNorm() + db[l].squaredNorm());
}

void GradientSet::scale(double c) {
  for (auto& m : dW) m *= c;
  for (auto& v : db) v *= c;
}

void GradientSet::add_scaled(const GradientSet& other, double c) {
  for (std::size_t l = 0; l < dW.size(); ++l) {
    dW[l] += c * other.dW[l];
    db[l] += c * other.db[l];
  }
}

GradientSet zero_gradients(const DenoiserNet& net) {
  GradientSet g;
  for (int l = 0; l < net.n_layers(); ++l) {
    g.dW.push_back(Eigen::MatrixXd::Zero(net.W[l].rows(), net.W[l].cols()));
    g.db.push_back(Eigen::VectorXd::Zero(net.b[l].size()));
  }
  return g;
}

GradientSet grads_from_trace(const DenoiserNet& net, const BatchTrace& trace,
                             const std::vector<Eigen::MatrixXd>& deltas) {
  GradientSet g;
  const int L = net.n_layers();
  for (int l = 0; l < L; ++l) {
    const Eigen::MatrixXd& in = (l == 0) ? trace.input0 : trace.acts[l - 1];
    g.dW.push_back(in.transpose() * deltas[l]);
    g.db.push_back(deltas[l].colwise().sum().transpose());
  }
  return g;
}

Eigen::VectorXd predict_eps(const DenoiserNet& net, const LatentState& x,
                            const NoiseSchedule& schedule) {
  require(x.values.allFinite(), "predict_eps: non-finite input");
  Eigen::MatrixXd X = x.values.transpose();
  const BatchTrace tr = forward_batch(net, X, {x.t}, schedule.T);
  return tr.out.row(0).transpose();
}

double training_loss(const DenoiserNet& net, const Eigen::VectorXd& x0, int t,
                     const Eigen::VectorXd& eps,
                     const NoiseSchedule& schedule) {
  const LatentState xt = forward_diffuse({x0, 0}, t, eps, schedule);
  const Eigen::VectorXd pred = predict_eps(net, xt, schedule);
  return (eps - pred).squaredNorm();
}

GradientSet param_gradients(const DenoiserNet& net, const Eigen::VectorXd& x0,
                            int t, const Eigen::VectorXd& eps,
                            const NoiseSchedule& schedule) {
  const LatentState xt = forward_diffuse({x0, 0}, t, eps, schedule);
  Eigen::MatrixXd X = xt.values.transpose();
  const BatchTrace tr = forward_batch(net, X, {t}, schedule.T);
  const Eigen::MatrixXd dout = 2.0 * (tr.out - eps.transpose());
  return grads_from_trace(net, tr, backward_batch(net, tr, dout));
}

}  // namespace diffmia
