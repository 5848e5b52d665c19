#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mksgd/conv_ops.hpp"
#include "mksgd/manifold.hpp"
#include "mksgd/tensor.hpp"
#include "mksgd/types.hpp"

namespace mksgd {

enum class LayerKind { Conv2D, Dense, Activation, MeanOnlyBN, Flatten };
enum class ActKind { Tanh, Softplus, ReLU };

struct LayerSpec {
  LayerKind kind = LayerKind::Activation;
  // Conv2D
  int out_channels = 0;
  int kernel_h = 3, kernel_w = 3;
  int stride = 1, pad = 0;
  // Dense
  int out_dim = 0;
  // Activation
  ActKind act = ActKind::Tanh;
};

struct Batch {
  Tensor4 inputs;           // N x C x H x W
  std::vector<int> labels;  // values in [0, num_classes)
};

/// One family (or none = unconstrained) per kernel-bearing layer kind.
struct ManifoldPolicy {
  std::optional<ManifoldFamily> conv;
  std::optional<ManifoldFamily> dense;
  double radius = 1.0;
  double tolerance = 1e-8;
};

struct KernelBinding {
  ManifoldSpec spec;
  bool transposed = false;  // dense kernel optimized as its transpose
};

class Layer;

/// Minimal differentiable network: cross-correlation, dense, smooth
/// activations, optional mean-only batch normalization, softmax
/// cross-entropy head. Every Conv2D (c,d) kernel slice and every dense
/// weight matrix is an independently addressable kernel that can carry a
/// manifold constraint.
class Network {
 public:
  Network(int in_c, int in_h, int in_w, int num_classes,
          const std::vector<LayerSpec>& specs, std::uint64_t init_seed);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  /// Mean softmax cross-entropy over the batch; caches activations.
  double forward(const Batch& batch, Exec exec = Exec::Serial);

  /// Exact reverse-mode gradients for every kernel and aux parameter.
  /// Requires a cached forward; consumes it.
  void backward(Exec exec = Exec::Serial);

  /// N x num_classes raw scores; runs in eval mode (no BN statistics
  /// update) and invalidates any cached forward pass.
  Matrix logits(const Tensor4& inputs, Exec exec = Exec::Serial);

  double accuracy(const Batch& batch, Exec exec = Exec::Serial);

  void set_train_mode(bool train) { train_mode_ = train; }

  // Kernel surface (global ids, layer order).
  int kernel_count() const;
  const Matrix& kernel_value(int id) const;
  void set_kernel_value(int id, const Matrix& v);
  const Matrix& kernel_gradient(int id) const;
  const std::optional<KernelBinding>& binding(int id) const;

  /// Manifold view of a kernel (transpose applied when bound that way).
  KernelPoint kernel_point(int id) const;
  Matrix oriented_gradient(int id) const;
  void set_kernel_point(int id, const KernelPoint& p);

  // Unconstrained vector parameters (biases, BN shifts).
  int aux_count() const;
  std::vector<double>& aux_value(int i);
  const std::vector<double>& aux_gradient(int i) const;

  /// Bind every Conv2D/Dense kernel to the policy's family and redraw the
  /// initial values on-manifold. Throws config_error on shape-incompatible
  /// assignments (e.g. Stiefel on a wide kernel).
  void assign_manifolds(const ManifoldPolicy& policy, std::uint64_t seed);

  double max_constraint_violation() const;

  int num_classes() const { return num_classes_; }
  const std::vector<std::string>& notes() const { return notes_; }
  std::vector<std::string> describe() const;

 private:
  struct KernelRef {
    Layer* layer;
    int local;
  };

  void check_finite(const Tensor4& t, size_t layer_index,
                    const char* stage) const;

  int in_c_, in_h_, in_w_, num_classes_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<KernelRef> kernels_;
  std::vector<std::optional<KernelBinding>> bindings_;
  std::vector<std::pair<Layer*, int>> aux_;
  std::vector<std::string> notes_;
  bool train_mode_ = true;

  // forward caches
  bool forward_cached_ = false;
  Matrix probs_;  // N x K
  std::vector<int> batch_labels_;
};

}  // namespace mksgd
