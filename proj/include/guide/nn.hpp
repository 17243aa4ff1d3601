#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "guide/common.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace guide::nn {

enum class Activation : std::uint8_t { ReLU = 0, Tanh = 1, Identity = 2 };

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

class ShapeMismatch : public std::runtime_error {
 public:
  explicit ShapeMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

template <class S>
struct Layer {
  Mat<S> W;  // out x in
  Vec<S> b;  // out
  Activation act = Activation::Identity;
};

template <class S>
struct Mlp {
  std::vector<Layer<S>> layers;

  int input_width() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
  int output_width() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }

  // Glorot-uniform weights, zero bias.
  static Mlp dense(const std::vector<int>& widths, const std::vector<Activation>& acts, Rng& rng) {
    if (widths.size() < 2 || acts.size() != widths.size() - 1)
      throw ShapeMismatch("dense: widths/activations mismatch");
    Mlp net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      Layer<S> layer;
      const int in = widths[l], out = widths[l + 1];
      const double limit = std::sqrt(6.0 / (in + out));
      layer.W.resize(out, in);
      for (int j = 0; j < in; ++j)
        for (int i = 0; i < out; ++i)
          layer.W(i, j) = static_cast<S>(rng.uniform(-limit, limit));
      layer.b = Vec<S>::Zero(out);
      layer.act = acts[l];
      net.layers.push_back(std::move(layer));
    }
    return net;
  }
};

// Batch tape: columns are samples. z = pre-activations, a = post-activations.
template <class S>
struct Tape {
  Mat<S> input;
  std::vector<Mat<S>> z;
  std::vector<Mat<S>> a;
  const Mat<S>& output() const { return a.back(); }
};

template <class S>
struct Grads {
  std::vector<Mat<S>> dW;
  std::vector<Vec<S>> db;

  static Grads zeros_like(const Mlp<S>& net) {
    Grads g;
    for (const auto& l : net.layers) {
      g.dW.push_back(Mat<S>::Zero(l.W.rows(), l.W.cols()));
      g.db.push_back(Vec<S>::Zero(l.b.size()));
    }
    return g;
  }
  void set_zero() {
    for (auto& m : dW) m.setZero();
    for (auto& v : db) v.setZero();
  }
};

// Execution policy for the batch kernels. Both variants walk the batch in
// fixed-size column chunks and combine per-chunk partials in chunk order, so
// Serial and Parallel produce bit-identical results at any thread count.
enum class Exec { Serial, Parallel };

inline constexpr int kChunk = 64;

namespace detail {

template <class S>
inline void apply_activation(Activation act, const Mat<S>& z, Mat<S>& a) {
  switch (act) {
    case Activation::ReLU: a = z.cwiseMax(S(0)); break;
    case Activation::Tanh: a = z.array().tanh().matrix(); break;
    case Activation::Identity: a = z; break;
  }
}

template <class S>
inline void activation_grad(Activation act, const Mat<S>& z, const Mat<S>& a, Mat<S>& dz) {
  switch (act) {
    case Activation::ReLU:
      dz = (z.array() > S(0)).template cast<S>() * dz.array();
      break;
    case Activation::Tanh:
      dz = (S(1) - a.array().square()) * dz.array();
      break;
    case Activation::Identity: break;
  }
}

}  // namespace detail

template <class S>
void forward_batch(const Mlp<S>& net, const Mat<S>& X, Tape<S>& tape,
                   Exec exec = Exec::Serial) {
  if (net.layers.empty()) throw ShapeMismatch("forward_batch: empty network");
  if (X.rows() != net.input_width())
    throw ShapeMismatch("forward_batch: input width " + std::to_string(X.rows()) +
                        " != " + std::to_string(net.input_width()));
  const int n = static_cast<int>(X.cols());
  const std::size_t nl = net.layers.size();
  tape.input = X;
  tape.z.resize(nl);
  tape.a.resize(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    tape.z[l].resize(net.layers[l].W.rows(), n);
    tape.a[l].resize(net.layers[l].W.rows(), n);
  }
  const int chunks = (n + kChunk - 1) / kChunk;

#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && chunks > 1)
  for (int c = 0; c < chunks; ++c) {
    const int c0 = c * kChunk;
    const int cn = std::min(kChunk, n - c0);
    for (std::size_t l = 0; l < nl; ++l) {
      const auto& layer = net.layers[l];
      const auto& in = (l == 0) ? tape.input : tape.a[l - 1];
      auto zc = tape.z[l].middleCols(c0, cn);
      zc.noalias() = layer.W * in.middleCols(c0, cn);
      zc.colwise() += layer.b;
      Mat<S> ac;
      detail::apply_activation(layer.act, Mat<S>(zc), ac);
      tape.a[l].middleCols(c0, cn) = ac;
    }
  }
}

// Reverse pass. Accumulates parameter gradients into `grads` (caller zeroes
// them) and, when dX is non-null, writes the gradient w.r.t. the input.
template <class S>
void backward_batch(const Mlp<S>& net, const Tape<S>& tape, const Mat<S>& dY,
                    Grads<S>& grads, Mat<S>* dX = nullptr, Exec exec = Exec::Serial) {
  const std::size_t nl = net.layers.size();
  if (dY.rows() != net.output_width() || dY.cols() != tape.input.cols())
    throw ShapeMismatch("backward_batch: dY shape mismatch");
  const int n = static_cast<int>(dY.cols());
  const int chunks = (n + kChunk - 1) / kChunk;

  struct Partial {
    std::vector<Mat<S>> dW;
    std::vector<Vec<S>> db;
  };
  std::vector<Partial> parts(chunks);
  Mat<S> dXall;
  if (dX) dXall.resize(net.input_width(), n);

#pragma omp parallel for schedule(static) if (exec == Exec::Parallel && chunks > 1)
  for (int c = 0; c < chunks; ++c) {
    const int c0 = c * kChunk;
    const int cn = std::min(kChunk, n - c0);
    auto& part = parts[c];
    part.dW.resize(nl);
    part.db.resize(nl);
    Mat<S> delta = dY.middleCols(c0, cn);
    for (int l = static_cast<int>(nl) - 1; l >= 0; --l) {
      const auto& layer = net.layers[l];
      Mat<S> zc = tape.z[l].middleCols(c0, cn);
      Mat<S> ac = tape.a[l].middleCols(c0, cn);
      detail::activation_grad(layer.act, zc, ac, delta);
      const auto& in = (l == 0) ? tape.input : tape.a[l - 1];
      part.dW[l].noalias() = delta * in.middleCols(c0, cn).transpose();
      part.db[l] = delta.rowwise().sum();
      if (l > 0)
        delta = (layer.W.transpose() * delta).eval();
      else if (dX)
        dXall.middleCols(c0, cn).noalias() = layer.W.transpose() * delta;
    }
  }

  for (int c = 0; c < chunks; ++c)
    for (std::size_t l = 0; l < nl; ++l) {
      grads.dW[l] += parts[c].dW[l];
      grads.db[l] += parts[c].db[l];
    }
  if (dX) *dX = std::move(dXall);
}

// Single-sample convenience wrappers.
template <class S>
Vec<S> forward(const Mlp<S>& net, const Vec<S>& x, Tape<S>* tape = nullptr) {
  Tape<S> local;
  Tape<S>& t = tape ? *tape : local;
  forward_batch(net, Mat<S>(x), t);
  return t.output().col(0);
}

template <class S>
struct Adam {
  std::vector<Mat<S>> mW, vW;
  std::vector<Vec<S>> mb, vb;
  long t = 0;
  S lr = S(3e-4), beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);

  static Adam for_net(const Mlp<S>& net, S lr) {
    Adam a;
    a.lr = lr;
    for (const auto& l : net.layers) {
      a.mW.push_back(Mat<S>::Zero(l.W.rows(), l.W.cols()));
      a.vW.push_back(Mat<S>::Zero(l.W.rows(), l.W.cols()));
      a.mb.push_back(Vec<S>::Zero(l.b.size()));
      a.vb.push_back(Vec<S>::Zero(l.b.size()));
    }
    return a;
  }

  void step(Mlp<S>& net, const Grads<S>& g) {
    ++t;
    const S c1 = S(1) / (S(1) - std::pow(beta1, S(t)));
    const S c2 = S(1) / (S(1) - std::pow(beta2, S(t)));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      mW[l] = beta1 * mW[l] + (S(1) - beta1) * g.dW[l];
      vW[l] = (beta2 * vW[l].array() + (S(1) - beta2) * g.dW[l].array().square()).matrix();
      net.layers[l].W.array() -=
          lr * (mW[l].array() * c1) / ((vW[l].array() * c2).sqrt() + eps);
      mb[l] = beta1 * mb[l] + (S(1) - beta1) * g.db[l];
      vb[l] = (beta2 * vb[l].array() + (S(1) - beta2) * g.db[l].array().square()).matrix();
      net.layers[l].b.array() -=
          lr * (mb[l].array() * c1) / ((vb[l].array() * c2).sqrt() + eps);
    }
  }
};

template <class S>
struct AdamScalar {
  S m = 0, v = 0, lr = S(3e-4);
  long t = 0;
  S beta1 = S(0.9), beta2 = S(0.999), eps = S(1e-8);
  void step(S& p, S g) {
    ++t;
    m = beta1 * m + (S(1) - beta1) * g;
    v = beta2 * v + (S(1) - beta2) * g * g;
    const S mhat = m / (S(1) - std::pow(beta1, S(t)));
    const S vhat = v / (S(1) - std::pow(beta2, S(t)));
    p -= lr * mhat / (std::sqrt(vhat) + eps);
  }
};

inline constexpr double kLogSigMin = -5.0;
inline constexpr double kLogSigMax = 2.0;
inline constexpr double kTanhEps = 1e-6;

// Squashed-Gaussian head: a = tanh(mu + sigma*xi), xi ~ N(0,I), with the
// tanh change-of-variables correction folded into log_prob.
template <class S>
struct SquashedSample {
  Vec<S> action;
  Vec<S> xi;
  S log_prob;
};

template <class S>
SquashedSample<S> squashed_gaussian_sample(const Vec<S>& mu, const Vec<S>& log_sigma, Rng& rng) {
  const int d = static_cast<int>(mu.size());
  SquashedSample<S> out;
  out.action.resize(d);
  out.xi.resize(d);
  S logp = 0;
  for (int j = 0; j < d; ++j) {
    const S ls = std::clamp(log_sigma[j], S(kLogSigMin), S(kLogSigMax));
    const S sigma = std::exp(ls);
    const S xi = static_cast<S>(rng.normal());
    const S u = mu[j] + sigma * xi;
    const S a = std::tanh(u);
    out.xi[j] = xi;
    out.action[j] = a;
    logp += S(-0.5) * S(std::log(2.0 * kPi)) - ls - S(0.5) * xi * xi;
    logp -= std::log(S(1) - a * a + S(kTanhEps));
  }
  out.log_prob = logp;
  return out;
}

// ---- GNET checkpoint container -------------------------------------------
// magic "GNET", u16 version, kind string, entry count, then named f64
// matrices (rows, cols, row-major data, little-endian). MLPs serialize as
// "<name>.<i>.W" / "<name>.<i>.b" entries plus a "<name>.acts" code row.

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& m) : std::runtime_error(m) {}
};

struct Checkpoint {
  std::string kind;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> entries;

  void add(const std::string& name, const Eigen::MatrixXd& m) { entries.emplace_back(name, m); }
  const Eigen::MatrixXd& get(const std::string& name) const;
  bool has(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

template <class S>
void add_mlp(Checkpoint& ck, const std::string& name, const Mlp<S>& net) {
  Eigen::MatrixXd acts(1, net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    acts(0, l) = static_cast<double>(net.layers[l].act);
    ck.add(name + "." + std::to_string(l) + ".W", net.layers[l].W.template cast<double>());
    ck.add(name + "." + std::to_string(l) + ".b", net.layers[l].b.template cast<double>());
  }
  ck.add(name + ".acts", acts);
}

template <class S>
Mlp<S> get_mlp(const Checkpoint& ck, const std::string& name) {
  const Eigen::MatrixXd& acts = ck.get(name + ".acts");
  Mlp<S> net;
  for (int l = 0; l < acts.cols(); ++l) {
    Layer<S> layer;
    layer.W = ck.get(name + "." + std::to_string(l) + ".W").cast<S>();
    layer.b = Vec<S>(ck.get(name + "." + std::to_string(l) + ".b").cast<S>());
    layer.act = static_cast<Activation>(static_cast<int>(acts(0, l)));
    net.layers.push_back(std::move(layer));
  }
  return net;
}

}  // namespace guide::nn
