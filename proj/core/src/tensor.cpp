#include "hint/tensor.hpp"

#include "hint/errors.hpp"
#include "hint/rng.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace hint {

namespace {

std::size_t numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 0) throw ShapeError("negative dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

thread_local bool g_grad_enabled = true;

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.s_ = std::make_shared<TensorStorage>();
    t.s_->value.assign(numel(shape), 0.0);
    t.s_->shape = std::move(shape);
    t.s_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.s_->value.begin(), t.s_->value.end(), v);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> value,
                         bool requires_grad) {
    if (numel(shape) != value.size()) {
        throw ShapeError("from_data: value count does not match shape");
    }
    Tensor t;
    t.s_ = std::make_shared<TensorStorage>();
    t.s_->shape = std::move(shape);
    t.s_->value = std::move(value);
    t.s_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return from_data({1}, {v}, requires_grad);
}

Tensor Tensor::randn(std::vector<int> shape, Rng& rng, double stddev,
                     bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& x : t.s_->value) x = rng.normal() * stddev;
    return t;
}

const std::vector<int>& Tensor::shape() const {
    if (!s_) throw ContractError("shape() on undefined tensor");
    return s_->shape;
}

int Tensor::ndim() const { return static_cast<int>(shape().size()); }

int Tensor::dim(int i) const {
    const auto& sh = shape();
    if (i < 0 || i >= static_cast<int>(sh.size())) {
        throw ShapeError("dim index out of range for " + shape_str());
    }
    return sh[static_cast<std::size_t>(i)];
}

std::size_t Tensor::size() const {
    if (!s_) return 0;
    return s_->value.size();
}

std::string Tensor::shape_str() const {
    if (!s_) return "<undefined>";
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s_->shape.size(); ++i) {
        if (i) os << "x";
        os << s_->shape[i];
    }
    os << "]";
    return os.str();
}

double* Tensor::data() {
    if (!s_) throw ContractError("data() on undefined tensor");
    return s_->value.data();
}

const double* Tensor::data() const {
    if (!s_) throw ContractError("data() on undefined tensor");
    return s_->value.data();
}

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("item() expects a scalar, got " + shape_str());
    }
    return s_->value[0];
}

double Tensor::at(std::initializer_list<int> idx) const {
    const auto& sh = shape();
    if (idx.size() != sh.size()) {
        throw ShapeError("at(): index rank mismatch for " + shape_str());
    }
    std::size_t off = 0;
    std::size_t i = 0;
    for (int v : idx) {
        if (v < 0 || v >= sh[i]) {
            throw ShapeError("at(): index out of range for " + shape_str());
        }
        off = off * static_cast<std::size_t>(sh[i]) + static_cast<std::size_t>(v);
        ++i;
    }
    return s_->value[off];
}

bool Tensor::requires_grad() const { return s_ && s_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
    if (!s_) throw ContractError("set_requires_grad on undefined tensor");
    s_->requires_grad = v;
}

bool Tensor::has_grad() const { return s_ && !s_->grad.empty(); }

double* Tensor::grad() {
    if (!has_grad()) throw ContractError("grad() before gradient allocation");
    return s_->grad.data();
}

const double* Tensor::grad() const {
    if (!has_grad()) throw ContractError("grad() before gradient allocation");
    return s_->grad.data();
}

Tensor Tensor::grad_tensor() const {
    if (!has_grad()) throw ContractError("grad_tensor() before gradient allocation");
    return Tensor::from_data(s_->shape, s_->grad);
}

void Tensor::ensure_grad() {
    if (!s_) throw ContractError("ensure_grad on undefined tensor");
    if (s_->grad.empty()) s_->grad.assign(s_->value.size(), 0.0);
}

void Tensor::zero_grad() {
    if (!s_) return;
    std::fill(s_->grad.begin(), s_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    if (!s_) return Tensor();
    return Tensor::from_data(s_->shape, s_->value);
}

void attach_node(Tensor& out, const char* name, std::vector<Tensor> inputs,
                 std::function<void(Tensor&)> backprop) {
    if (!g_grad_enabled) return;
    bool any = false;
    for (const auto& t : inputs) {
        if (t.requires_grad()) { any = true; break; }
    }
    if (!any) return;
    auto node = std::make_shared<OpNode>();
    node->name = name;
    node->inputs = std::move(inputs);
    node->backprop = std::move(backprop);
    out.storage()->requires_grad = true;
    out.storage()->producer = std::move(node);
}

std::vector<Tensor> topo_order(const Tensor& root) {
    std::vector<Tensor> order;
    std::unordered_set<const TensorStorage*> visited;
    // Iterative post-order DFS; the explicit stack keeps deep graphs safe.
    struct Frame {
        Tensor t;
        std::size_t next_input = 0;
    };
    std::vector<Frame> stack;
    if (!root.defined()) return order;
    stack.push_back({root});
    visited.insert(root.storage().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        OpNode* node = f.t.storage()->producer.get();
        std::size_t nin = node ? node->inputs.size() : 0;
        if (f.next_input < nin) {
            Tensor in = node->inputs[f.next_input++];
            if (in.defined() && in.requires_grad() &&
                !visited.count(in.storage().get())) {
                visited.insert(in.storage().get());
                stack.push_back({in});
            }
        } else {
            order.push_back(f.t);
            stack.pop_back();
        }
    }
    return order;
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw ContractError("backward: undefined loss");
    if (loss.size() != 1) {
        throw ContractError("backward: loss must be scalar, got " + loss.shape_str());
    }
    if (!loss.requires_grad()) {
        throw ContractError("backward: loss does not require grad");
    }
    std::vector<Tensor> order = topo_order(loss);
    Tensor seed = loss;
    seed.ensure_grad();
    seed.grad()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorStorage* st = it->storage().get();
        if (!st->producer) continue;
        if (st->grad.empty()) continue; // no gradient flowed here
        for (auto& in : st->producer->inputs) {
            if (in.requires_grad()) in.ensure_grad();
        }
        st->producer->backprop(*it);
    }
}

} // namespace hint
