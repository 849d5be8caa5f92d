#include "affect/nn/graph.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace affect::nn {

Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    for (const auto& v : inputs) {
        if (!v.defined()) throw std::logic_error("make_op: undefined input");
        n->inputs.push_back(v.node());
        n->requires_grad = n->requires_grad || v.node()->requires_grad;
    }
    if (n->requires_grad) n->backward_fn = std::move(backward_fn);
    return Var(std::move(n));
}

void backward(const Var& root) {
    if (!root.defined()) throw std::logic_error("backward: undefined root");
    if (root.value().size() != 1) throw std::logic_error("backward: root must be scalar");
    if (!root.node()->requires_grad) return;

    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        bool descended = false;
        while (idx < node->inputs.size()) {
            Node* child = node->inputs[idx++].get();
            if (child->requires_grad && !visited.count(child)) {
                visited.insert(child);
                stack.emplace_back(child, 0);
                descended = true;
                break;
            }
        }
        if (descended) continue;
        order.push_back(node);
        stack.pop_back();
    }

    root.node()->grad_ref()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.data.size() > 0) n->backward_fn(*n);
    }
}

Adam::Adam(std::vector<Var> params, double lr_, double beta1, double beta2, double eps)
    : lr(lr_), params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.push_back(Arr::Zero(p.value().size()));
        v_.push_back(Arr::Zero(p.value().size()));
    }
}

void Adam::zero_grad() {
    for (auto& p : params_) p.clear_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Node* n = params_[i].node().get();
        if (n->grad.data.size() == 0) continue; // parameter unused this step
        const Arr& g = n->grad.data;
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.square();
        const Arr mhat = m_[i] / bc1;
        // with beta2 == 0 this reduces to |g|, a sign-style update
        const Arr vhat = v_[i] / (bc2 > 0 ? bc2 : 1.0);
        n->value.data -= lr * mhat / (vhat.sqrt() + eps_);
        n->grad.data.setZero();
    }
}

Var ParamStore::by_name(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return params_[i];
    throw std::runtime_error("param store: no parameter named " + name);
}

Tensor init_conv(int oc, int ic, int kh, int kw, Rng& rng) {
    Tensor t(Shape{oc, ic, kh, kw});
    const double scale = std::sqrt(2.0 / (static_cast<double>(ic) * kh * kw));
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = scale * rng.normal();
    return t;
}

Tensor init_linear(int out, int in, Rng& rng) {
    Tensor t(Shape{out, in, 1, 1});
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = scale * rng.normal();
    return t;
}

} // namespace affect::nn
