#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "volrob/common.hpp"

namespace volrob::ad {

/// Reverse-mode automatic differentiation over dense double tensors.
///
/// A Tape owns every node created through it, in construction order; backward
/// replays that order in reverse. All gradients are exact (no approximation),
/// and evaluation is deterministic: accumulation order is fixed by the
/// construction sequence, never by scheduling.
struct Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;  // sized on first touch
  bool requires_grad = false;
  std::function<void()> backprop;  // pushes this->grad into parents

  long numel() const {
    long n = 1;
    for (const int d : shape) n *= d;
    return n;
  }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

class Tape;

/// Lightweight handle; valid while its Tape is alive.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Node* node, Tape* tape) : node_(node), tape_(tape) {}

  Node* node() const { return node_; }
  Tape* tape() const { return tape_; }
  const std::vector<int>& shape() const { return node_->shape; }
  long numel() const { return node_->numel(); }
  const std::vector<double>& value() const { return node_->value; }
  const std::vector<double>& grad() const { return node_->grad; }
  bool defined() const { return node_ != nullptr; }

 private:
  Node* node_ = nullptr;
  Tape* tape_ = nullptr;
};

class Tape {
 public:
  Tensor leaf(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
  Tensor make(std::vector<int> shape, bool requires_grad);

  /// Seeds `root` (a scalar) with gradient 1 and replays the tape backward.
  void backward(const Tensor& root);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Elementwise.
Tensor add(Tensor a, Tensor b);
Tensor sub(Tensor a, Tensor b);
Tensor mul(Tensor a, Tensor b);
Tensor div(Tensor a, Tensor b);
Tensor scale(Tensor a, double s);
Tensor relu(Tensor a);
Tensor sigmoid(Tensor a);
Tensor sqrt(Tensor a);

// Linear algebra on (rows, cols) matrices.
Tensor matmul(Tensor a, Tensor b);
Tensor add_rowvec(Tensor m, Tensor v);      // m: (N,G), v: (G)
Tensor softmax_rows(Tensor m);              // per-row simplex

// Channel-major fields (C, N) with per-voxel class structure.
Tensor log_softmax_channels(Tensor z);                           // (C,N) -> (C,N)
Tensor exp(Tensor a);
Tensor select_channel(Tensor x, const std::vector<std::int32_t>& labels);  // (C,N) -> (N)
Tensor channel_sum(Tensor x);                                    // (C,N) -> (N)

// Reductions.
Tensor mean(Tensor a);
Tensor sum(Tensor a);

/// out[i] = x[index_map[i]]; index_map must be a bijection when used for
/// patchify/unpatchify so backward scatter never collides.
Tensor gather(Tensor x, const std::vector<long>& index_map, std::vector<int> out_shape);

/// 3D convolution, kernel 3x3x3, stride 1, zero padding 1.
/// x: (Cin,H,W,D), w: (Cout,Cin,3,3,3), b: (Cout) -> (Cout,H,W,D).
Tensor conv3d(Tensor x, Tensor w, Tensor b, int cin, int cout, Shape3 spatial);

/// Gated linear recurrence over rows: h[0] = (1-g[0])*u[0],
/// h[t] = g[t]*h[t-1] + (1-g[t])*u[t]. Exact BPTT backward.
Tensor gated_scan(Tensor gate, Tensor update);

/// Soft Dice loss over foreground channels (class 0 excluded):
/// 1 - mean_c (2*sum(p_c*g_c) + s) / (sum p_c + sum g_c + s).
Tensor soft_dice_loss(Tensor probs, const std::vector<std::int32_t>& labels, int num_classes,
                      double smoothing);

}  // namespace volrob::ad
