#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "vqseg/tensor.hpp"

namespace vqseg::ad {

class Graph;

// Handle to a node in a Graph. Cheap to copy; valid for the graph's lifetime.
struct Var {
  Graph* g = nullptr;
  int32_t id = -1;
  bool valid() const { return g != nullptr && id >= 0; }
};

using IndexMap = std::shared_ptr<const std::vector<int64_t>>;

// Define-by-run tape. Nodes are recorded in topological (creation) order;
// backward() walks them in reverse exactly once, accumulating gradients
// additively into every node that requires them. Single-threaded.
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}

  // Leaves.
  Var constant(Tensor value);            // never receives gradients
  Var param(const Tensor& value);        // gradient target while recording

  // Primitive ops. Shape violations throw DimensionError.
  Var conv1d_dilated(Var x, Var w, int64_t dilation);  // x:[ci,t] w:[co,ci,k]
  Var pointwise(Var x, Var w, Var b);                  // x:[ci,t] w:[co,ci] b:[co]
  Var relu(Var x);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var x, double c);
  Var sum(Var x);
  Var mse(Var a, Var b);
  // sum_i mask[i] * (a[i]-b[i])^2; null mask counts every element.
  Var masked_sqdiff_sum(Var a, Var b, std::shared_ptr<const Tensor> mask);
  // Inter-joint squared-distance MSE against a fixed target skeleton.
  // shat: [c,t,v]; frame_mask: per-t flags (empty = all frames real).
  Var spatial_recon(Var shat, std::shared_ptr<const Tensor> s,
                    std::vector<uint8_t> frame_mask);
  // out[i] = x[map[i]]; backward scatter-adds (duplicate indices accumulate).
  Var gather(Var x, IndexMap map, std::vector<int64_t> out_shape);
  Var concat(const std::vector<Var>& parts);  // flat 1-D concatenation
  Var stop_gradient(Var x);
  // Forward takes the quantized values, backward passes through to `pre`.
  Var straight_through(Var pre, Tensor quantized);

  void backward(Var loss);

  const Tensor& value(Var v) const;
  // Accumulated gradient; zero-shaped contribution reads as a zeros tensor.
  Tensor grad(Var v) const;
  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_live = false;
    std::function<void(Graph&, int32_t)> backprop;
  };

  int32_t new_node(Tensor value, bool requires_grad);
  Node& node(Var v);
  const Node& node(Var v) const;
  Tensor& grad_buf(int32_t id);
  void add_grad(int32_t id, const double* src, int64_t n);
  bool wants_grad(Var v) const;
  void check_owned(Var v) const;

  std::vector<Node> nodes_;
  bool recording_;
};

}  // namespace vqseg::ad
