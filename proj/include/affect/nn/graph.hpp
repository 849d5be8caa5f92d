#pragma once

#include "affect/nn/tensor.hpp"
#include "affect/util/rng.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace affect::nn {

// Define-by-run reverse-mode tape. Graphs are rebuilt per evaluation; leaves
// (parameters, inputs) persist and accumulate gradients across backward().

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Tensor value;
    Tensor grad; // lazily allocated, same shape as value
    std::vector<NodePtr> inputs;
    std::function<void(Node&)> backward_fn; // pulls from grad, pushes into inputs
    bool requires_grad = false;
    int mark = 0; // scratch for traversal

    Arr& grad_ref() {
        if (grad.data.size() == 0) grad = Tensor(value.shape);
        return grad.data;
    }
};

class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    static Var leaf(Tensor value, bool requires_grad) {
        auto n = std::make_shared<Node>();
        n->value = std::move(value);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }
    static Var constant(Tensor value) { return leaf(std::move(value), false); }
    static Var scalar(Scalar v) { return constant(Tensor::scalar(v)); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->value.shape; }
    Tensor& value() { return node_->value; }
    const Tensor& value() const { return node_->value; }
    Scalar scalar_value() const { return node_->value.value(); }
    const Tensor& grad() const { return node_->grad; }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    void clear_grad() {
        if (node_ && node_->grad.data.size() > 0) node_->grad.data.setZero();
    }
    NodePtr node() const { return node_; }

private:
    NodePtr node_;
};

// Runs reverse-mode accumulation from a scalar root (seeds d(root)/d(root)=1).
void backward(const Var& root);

// Generic op constructor: value plus backward closure over the inputs.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// First-order optimizer. beta2 == 0 is a supported configuration (the second
// moment then tracks the instantaneous squared gradient).
class Adam {
public:
    Adam(std::vector<Var> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step();       // applies the update and zeroes gradients
    void zero_grad();
    double lr;

private:
    std::vector<Var> params_;
    std::vector<Arr> m_, v_;
    double beta1_, beta2_, eps_;
    long t_ = 0;
};

// Named parameter collection shared by all trainable models.
class ParamStore {
public:
    Var add(const std::string& name, Tensor init) {
        Var v = Var::leaf(std::move(init), true);
        names_.push_back(name);
        params_.push_back(v);
        return v;
    }
    const std::vector<Var>& params() const { return params_; }
    const std::vector<std::string>& names() const { return names_; }
    Var by_name(const std::string& name) const;
    std::size_t size() const { return params_.size(); }

private:
    std::vector<std::string> names_;
    std::vector<Var> params_;
};

// He-style fan-in init
Tensor init_conv(int oc, int ic, int kh, int kw, Rng& rng);
Tensor init_linear(int out, int in, Rng& rng);

} // namespace affect::nn
