#include "mksgd/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace mksgd {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double act_eval(ActKind k, double v) {
  switch (k) {
    case ActKind::Tanh: return std::tanh(v);
    case ActKind::Softplus:
      return v > 30.0 ? v : std::log1p(std::exp(v));
    case ActKind::ReLU: return v > 0.0 ? v : 0.0;
  }
  return v;
}

double act_deriv(ActKind k, double v) {
  switch (k) {
    case ActKind::Tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case ActKind::Softplus:
      return 1.0 / (1.0 + std::exp(-v));
    case ActKind::ReLU: return v > 0.0 ? 1.0 : 0.0;
  }
  return 1.0;
}

const char* act_name(ActKind k) {
  switch (k) {
    case ActKind::Tanh: return "tanh";
    case ActKind::Softplus: return "softplus";
    case ActKind::ReLU: return "relu";
  }
  return "?";
}

}  // namespace

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Tensor4 forward(const Tensor4& x, bool train_mode, Exec exec) = 0;
  virtual Tensor4 backward(const Tensor4& dy, Exec exec) = 0;
  virtual std::string describe() const = 0;

  virtual int kernel_count() const { return 0; }
  virtual Matrix& kernel(int) { throw state_error("layer has no kernels"); }
  virtual const Matrix& kernel_grad(int) const {
    throw state_error("layer has no kernels");
  }
  virtual int kernel_rows() const { return 0; }
  virtual int kernel_cols() const { return 0; }

  virtual int aux_count() const { return 0; }
  virtual std::vector<double>& aux(int) {
    throw state_error("layer has no aux parameters");
  }
  virtual const std::vector<double>& aux_grad(int) const {
    throw state_error("layer has no aux parameters");
  }
};

namespace {

class Conv2DLayer final : public Layer {
 public:
  Conv2DLayer(ConvGeometry g, std::uint64_t seed) : g_(g) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const double scale =
        1.0 / std::sqrt(static_cast<double>(g_.in_c) * g_.kh * g_.kw);
    kernels_.resize(static_cast<size_t>(g_.out_c) * g_.in_c);
    for (auto& k : kernels_) {
      k.resize(g_.kh, g_.kw);
      for (int a = 0; a < g_.kh; ++a)
        for (int b = 0; b < g_.kw; ++b) k(a, b) = scale * gauss(rng);
    }
    bias_.assign(static_cast<size_t>(g_.out_c), 0.0);
  }

  LayerKind kind() const override { return LayerKind::Conv2D; }

  Tensor4 forward(const Tensor4& x, bool, Exec exec) override {
    x_ = x;
    Tensor4 y;
    conv2d_forward(x, kernels_, bias_, g_, y, exec);
    return y;
  }

  Tensor4 backward(const Tensor4& dy, Exec exec) override {
    conv2d_grad_params(x_, dy, g_, dk_, db_, exec);
    Tensor4 dx(x_.n, x_.c, x_.h, x_.w);
    conv2d_grad_input(dy, kernels_, g_, dx, exec);
    return dx;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "conv " << g_.kh << "x" << g_.kw << " " << g_.in_c << "->" << g_.out_c
       << " stride " << g_.stride << " pad " << g_.pad;
    return os.str();
  }

  int kernel_count() const override {
    return static_cast<int>(kernels_.size());
  }
  Matrix& kernel(int i) override { return kernels_.at(i); }
  const Matrix& kernel_grad(int i) const override { return dk_.at(i); }
  int kernel_rows() const override { return g_.kh; }
  int kernel_cols() const override { return g_.kw; }

  int aux_count() const override { return 1; }
  std::vector<double>& aux(int) override { return bias_; }
  const std::vector<double>& aux_grad(int) const override { return db_; }

 private:
  ConvGeometry g_;
  std::vector<Matrix> kernels_;
  std::vector<double> bias_;
  Tensor4 x_;
  std::vector<Matrix> dk_;
  std::vector<double> db_;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(int in_dim, int out_dim, std::uint64_t seed)
      : in_dim_(in_dim), out_dim_(out_dim) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
    weight_.resize(in_dim, out_dim);
    for (int i = 0; i < in_dim; ++i)
      for (int j = 0; j < out_dim; ++j) weight_(i, j) = scale * gauss(rng);
    bias_.assign(static_cast<size_t>(out_dim), 0.0);
  }

  LayerKind kind() const override { return LayerKind::Dense; }

  Tensor4 forward(const Tensor4& x, bool, Exec exec) override {
    x_ = x;
    Tensor4 y;
    dense_forward(x, weight_, bias_, y, exec);
    return y;
  }

  Tensor4 backward(const Tensor4& dy, Exec exec) override {
    Tensor4 dx(x_.n, x_.c, x_.h, x_.w);
    dense_grad(x_, dy, weight_, dx, dw_, db_, exec);
    return dx;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "dense " << in_dim_ << "->" << out_dim_;
    return os.str();
  }

  int kernel_count() const override { return 1; }
  Matrix& kernel(int) override { return weight_; }
  const Matrix& kernel_grad(int) const override { return dw_; }
  int kernel_rows() const override { return in_dim_; }
  int kernel_cols() const override { return out_dim_; }

  int aux_count() const override { return 1; }
  std::vector<double>& aux(int) override { return bias_; }
  const std::vector<double>& aux_grad(int) const override { return db_; }

 private:
  int in_dim_, out_dim_;
  Matrix weight_;
  std::vector<double> bias_;
  Tensor4 x_;
  Matrix dw_;
  std::vector<double> db_;
};

class ActivationLayer final : public Layer {
 public:
  explicit ActivationLayer(ActKind k) : act_(k) {}

  LayerKind kind() const override { return LayerKind::Activation; }

  Tensor4 forward(const Tensor4& x, bool, Exec) override {
    x_ = x;
    Tensor4 y = x;
    for (double& v : y.data) v = act_eval(act_, v);
    return y;
  }

  Tensor4 backward(const Tensor4& dy, Exec) override {
    Tensor4 dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] *= act_deriv(act_, x_.data[i]);
    }
    return dx;
  }

  std::string describe() const override { return act_name(act_); }

 private:
  ActKind act_;
  Tensor4 x_;
};

class MeanOnlyBNLayer final : public Layer {
 public:
  explicit MeanOnlyBNLayer(int channels)
      : channels_(channels),
        running_mean_(static_cast<size_t>(channels), 0.0),
        shift_(static_cast<size_t>(channels), 0.0) {}

  LayerKind kind() const override { return LayerKind::MeanOnlyBN; }

  Tensor4 forward(const Tensor4& x, bool train_mode, Exec) override {
    last_train_mode_ = train_mode;
    Tensor4 y = x;
    const int per_channel = x.n * x.h * x.w;
    for (int c = 0; c < channels_; ++c) {
      double mean = running_mean_[c];
      if (train_mode) {
        double acc = 0.0;
        for (int n = 0; n < x.n; ++n)
          for (int iy = 0; iy < x.h; ++iy)
            for (int ix = 0; ix < x.w; ++ix) acc += x.at(n, c, iy, ix);
        mean = acc / per_channel;
        running_mean_[c] = 0.9 * running_mean_[c] + 0.1 * mean;
      }
      for (int n = 0; n < x.n; ++n)
        for (int iy = 0; iy < x.h; ++iy)
          for (int ix = 0; ix < x.w; ++ix) {
            y.at(n, c, iy, ix) = x.at(n, c, iy, ix) - mean + shift_[c];
          }
    }
    return y;
  }

  Tensor4 backward(const Tensor4& dy, Exec) override {
    Tensor4 dx = dy;
    dshift_.assign(static_cast<size_t>(channels_), 0.0);
    const int per_channel = dy.n * dy.h * dy.w;
    for (int c = 0; c < channels_; ++c) {
      double acc = 0.0;
      for (int n = 0; n < dy.n; ++n)
        for (int iy = 0; iy < dy.h; ++iy)
          for (int ix = 0; ix < dy.w; ++ix) acc += dy.at(n, c, iy, ix);
      dshift_[c] = acc;
      // In train mode the subtracted mean depends on the batch itself.
      const double mean_dy = last_train_mode_ ? acc / per_channel : 0.0;
      for (int n = 0; n < dy.n; ++n)
        for (int iy = 0; iy < dy.h; ++iy)
          for (int ix = 0; ix < dy.w; ++ix) {
            dx.at(n, c, iy, ix) = dy.at(n, c, iy, ix) - mean_dy;
          }
    }
    return dx;
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "mean-only bn (" << channels_ << " ch)";
    return os.str();
  }

  int aux_count() const override { return 1; }
  std::vector<double>& aux(int) override { return shift_; }
  const std::vector<double>& aux_grad(int) const override { return dshift_; }

  std::vector<double>& running_mean() { return running_mean_; }

 private:
  int channels_;
  std::vector<double> running_mean_;
  std::vector<double> shift_;
  std::vector<double> dshift_;
  bool last_train_mode_ = true;
};

class FlattenLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Flatten; }

  Tensor4 forward(const Tensor4& x, bool, Exec) override {
    c_ = x.c;
    h_ = x.h;
    w_ = x.w;
    Tensor4 y = x;
    y.c = x.features();
    y.h = 1;
    y.w = 1;
    return y;
  }

  Tensor4 backward(const Tensor4& dy, Exec) override {
    Tensor4 dx = dy;
    dx.c = c_;
    dx.h = h_;
    dx.w = w_;
    return dx;
  }

  std::string describe() const override { return "flatten"; }

 private:
  int c_ = 0, h_ = 0, w_ = 0;
};

}  // namespace

Network::Network(int in_c, int in_h, int in_w, int num_classes,
                 const std::vector<LayerSpec>& specs, std::uint64_t init_seed)
    : in_c_(in_c), in_h_(in_h), in_w_(in_w), num_classes_(num_classes) {
  if (in_c < 1 || in_h < 1 || in_w < 1 || num_classes < 2) {
    throw config_error("network: bad input dims or class count");
  }
  int c = in_c, h = in_h, w = in_w;
  for (size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    switch (s.kind) {
      case LayerKind::Conv2D: {
        ConvGeometry g;
        g.in_c = c;
        g.out_c = s.out_channels;
        g.kh = s.kernel_h;
        g.kw = s.kernel_w;
        g.stride = s.stride;
        g.pad = s.pad;
        if (g.out_c < 1 || g.kh < 1 || g.kw < 1 || g.stride < 1 || g.pad < 0) {
          throw config_error("network: bad conv layer parameters");
        }
        const int oh = g.out_h(h), ow = g.out_w(w);
        if (oh < 1 || ow < 1) {
          std::ostringstream os;
          os << "network: conv layer " << i << " output would be " << oh << "x"
             << ow;
          throw config_error(os.str());
        }
        layers_.push_back(
            std::make_unique<Conv2DLayer>(g, mix_seed(init_seed, i)));
        c = g.out_c;
        h = oh;
        w = ow;
        break;
      }
      case LayerKind::Dense: {
        if (s.out_dim < 1) throw config_error("network: bad dense out_dim");
        layers_.push_back(std::make_unique<DenseLayer>(
            c * h * w, s.out_dim, mix_seed(init_seed, i)));
        c = s.out_dim;
        h = 1;
        w = 1;
        break;
      }
      case LayerKind::Activation:
        layers_.push_back(std::make_unique<ActivationLayer>(s.act));
        break;
      case LayerKind::MeanOnlyBN:
        layers_.push_back(std::make_unique<MeanOnlyBNLayer>(c));
        break;
      case LayerKind::Flatten:
        layers_.push_back(std::make_unique<FlattenLayer>());
        c = c * h * w;
        h = 1;
        w = 1;
        break;
    }
  }
  if (c * h * w != num_classes) {
    std::ostringstream os;
    os << "network: final feature count " << c * h * w
       << " does not match num_classes " << num_classes;
    throw config_error(os.str());
  }
  for (auto& l : layers_) {
    for (int k = 0; k < l->kernel_count(); ++k) {
      kernels_.push_back({l.get(), k});
      bindings_.emplace_back(std::nullopt);
    }
    for (int a = 0; a < l->aux_count(); ++a) aux_.emplace_back(l.get(), a);
  }
}

Network::~Network() = default;
Network::Network(Network&&) noexcept = default;
Network& Network::operator=(Network&&) noexcept = default;

void Network::check_finite(const Tensor4& t, size_t layer_index,
                           const char* stage) const {
  for (double v : t.data) {
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << stage << ": non-finite activation after layer " << layer_index
         << " (" << layers_[layer_index]->describe() << ")";
      throw numeric_error(os.str());
    }
  }
}

double Network::forward(const Batch& batch, Exec exec) {
  const Tensor4& x = batch.inputs;
  if (x.c != in_c_ || x.h != in_h_ || x.w != in_w_) {
    throw shape_error("forward: batch input dims do not match the network");
  }
  if (static_cast<int>(batch.labels.size()) != x.n || x.n < 1) {
    throw shape_error("forward: label count does not match batch size");
  }
  for (int y : batch.labels) {
    if (y < 0 || y >= num_classes_) {
      throw shape_error("forward: label out of range");
    }
  }
  Tensor4 cur = x;
  for (size_t i = 0; i < layers_.size(); ++i) {
    cur = layers_[i]->forward(cur, train_mode_, exec);
    check_finite(cur, i, "forward");
  }
  // softmax cross-entropy head
  const int n = cur.n, k = num_classes_;
  probs_.resize(n, k);
  double loss = 0.0;
  for (int s = 0; s < n; ++s) {
    double mx = cur.data[static_cast<size_t>(s) * k];
    for (int j = 1; j < k; ++j) {
      mx = std::max(mx, cur.data[static_cast<size_t>(s) * k + j]);
    }
    double z = 0.0;
    for (int j = 0; j < k; ++j) {
      const double e = std::exp(cur.data[static_cast<size_t>(s) * k + j] - mx);
      probs_(s, j) = e;
      z += e;
    }
    for (int j = 0; j < k; ++j) probs_(s, j) /= z;
    loss -= std::log(probs_(s, batch.labels[s]));
  }
  loss /= n;
  batch_labels_ = batch.labels;
  forward_cached_ = true;
  return loss;
}

void Network::backward(Exec exec) {
  if (!forward_cached_) {
    throw state_error("backward: no cached forward pass");
  }
  const int n = static_cast<int>(probs_.rows());
  Tensor4 delta(n, num_classes_, 1, 1);
  for (int s = 0; s < n; ++s) {
    for (int j = 0; j < num_classes_; ++j) {
      double d = probs_(s, j);
      if (j == batch_labels_[s]) d -= 1.0;
      delta.at(s, j, 0, 0) = d / n;
    }
  }
  for (size_t i = layers_.size(); i-- > 0;) {
    delta = layers_[i]->backward(delta, exec);
  }
  forward_cached_ = false;
}

Matrix Network::logits(const Tensor4& inputs, Exec exec) {
  // Evaluation pass: no BN statistics update, no gradient caches kept.
  Tensor4 cur = inputs;
  for (size_t i = 0; i < layers_.size(); ++i) {
    cur = layers_[i]->forward(cur, false, exec);
    check_finite(cur, i, "logits");
  }
  forward_cached_ = false;
  Matrix out(cur.n, num_classes_);
  for (int s = 0; s < cur.n; ++s) {
    for (int j = 0; j < num_classes_; ++j) {
      out(s, j) = cur.data[static_cast<size_t>(s) * num_classes_ + j];
    }
  }
  return out;
}

double Network::accuracy(const Batch& batch, Exec exec) {
  const Matrix scores = logits(batch.inputs, exec);
  int hits = 0;
  for (int s = 0; s < scores.rows(); ++s) {
    int arg = 0;
    for (int j = 1; j < num_classes_; ++j) {
      if (scores(s, j) > scores(s, arg)) arg = j;
    }
    if (arg == batch.labels[s]) ++hits;
  }
  return static_cast<double>(hits) / scores.rows();
}

int Network::kernel_count() const { return static_cast<int>(kernels_.size()); }

const Matrix& Network::kernel_value(int id) const {
  const KernelRef& r = kernels_.at(id);
  return r.layer->kernel(r.local);
}

void Network::set_kernel_value(int id, const Matrix& v) {
  const KernelRef& r = kernels_.at(id);
  Matrix& dst = r.layer->kernel(r.local);
  if (v.rows() != dst.rows() || v.cols() != dst.cols()) {
    throw shape_error("set_kernel_value: shape mismatch");
  }
  dst = v;
}

const Matrix& Network::kernel_gradient(int id) const {
  const KernelRef& r = kernels_.at(id);
  return r.layer->kernel_grad(r.local);
}

const std::optional<KernelBinding>& Network::binding(int id) const {
  return bindings_.at(id);
}

KernelPoint Network::kernel_point(int id) const {
  const auto& b = bindings_.at(id);
  if (!b) throw state_error("kernel_point: kernel is unconstrained");
  const Matrix& v = kernel_value(id);
  return {b->spec, b->transposed ? v.transpose() : v};
}

Matrix Network::oriented_gradient(int id) const {
  const auto& b = bindings_.at(id);
  const Matrix& g = kernel_gradient(id);
  if (b && b->transposed) return g.transpose();
  return g;
}

void Network::set_kernel_point(int id, const KernelPoint& p) {
  const auto& b = bindings_.at(id);
  if (!b) throw state_error("set_kernel_point: kernel is unconstrained");
  set_kernel_value(id, b->transposed ? p.value.transpose() : p.value);
}

int Network::aux_count() const { return static_cast<int>(aux_.size()); }

std::vector<double>& Network::aux_value(int i) {
  auto& [layer, local] = aux_.at(i);
  return layer->aux(local);
}

const std::vector<double>& Network::aux_gradient(int i) const {
  const auto& [layer, local] = aux_.at(i);
  return layer->aux_grad(local);
}

void Network::assign_manifolds(const ManifoldPolicy& policy,
                               std::uint64_t seed) {
  for (int id = 0; id < kernel_count(); ++id) {
    const KernelRef& r = kernels_[id];
    const LayerKind lk = r.layer->kind();
    const std::optional<ManifoldFamily> family =
        lk == LayerKind::Conv2D ? policy.conv : policy.dense;
    if (!family) {
      bindings_[id] = std::nullopt;
      continue;
    }
    int rows = r.layer->kernel_rows();
    int cols = r.layer->kernel_cols();
    bool transposed = false;
    if (lk == LayerKind::Dense &&
        (*family == ManifoldFamily::Stiefel ||
         *family == ManifoldFamily::SpecialOrthogonal) &&
        rows < cols) {
      std::swap(rows, cols);
      transposed = true;
      std::ostringstream os;
      os << "kernel " << id << ": dense " << cols << "x" << rows
         << " optimized as its transpose to satisfy rows >= cols";
      notes_.push_back(os.str());
    }
    ManifoldSpec spec(*family, rows, cols, policy.radius);
    spec.tolerance = policy.tolerance;
    bindings_[id] = KernelBinding{spec, transposed};
    set_kernel_point(id, random_point(spec, mix_seed(seed, id)));
  }
}

double Network::max_constraint_violation() const {
  double worst = 0.0;
  for (int id = 0; id < kernel_count(); ++id) {
    if (!bindings_[id]) continue;
    worst = std::max(worst, validate_point(kernel_point(id)).violation);
  }
  return worst;
}

std::vector<std::string> Network::describe() const {
  std::vector<std::string> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l->describe());
  return out;
}

}  // namespace mksgd
