#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace hint {

class Rng;
class Tensor;

// One recorded operation on the tape. `backprop` reads the output's gradient
// and accumulates into the gradients of `inputs` (only those that require
// grad will have storage allocated by the backward driver).
struct OpNode {
    const char* name;
    std::vector<Tensor> inputs;
    std::function<void(Tensor& out)> backprop;
};

struct TensorStorage {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad; // empty until needed
    bool requires_grad = false;
    std::shared_ptr<OpNode> producer;
};

// Value-semantic handle over shared storage. Copies alias the same buffer,
// which is what lets parameters live both in a model struct and on the tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> value,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor randn(std::vector<int> shape, Rng& rng, double stddev,
                        bool requires_grad = false);

    bool defined() const { return static_cast<bool>(s_); }
    const std::vector<int>& shape() const;
    int ndim() const;
    int dim(int i) const;
    std::size_t size() const;
    int rows() const { return dim(0); }
    int cols() const { return dim(1); }
    std::string shape_str() const;

    double* data();
    const double* data() const;
    double item() const;
    double at(std::initializer_list<int> idx) const;

    bool requires_grad() const;
    void set_requires_grad(bool v);
    bool has_grad() const;
    double* grad();
    const double* grad() const;
    Tensor grad_tensor() const; // copy of the gradient as a plain tensor
    void ensure_grad();
    void zero_grad();

    // Value copy detached from the tape.
    Tensor detach() const;

    const std::shared_ptr<TensorStorage>& storage() const { return s_; }
    bool same_storage(const Tensor& other) const { return s_ == other.s_; }

private:
    std::shared_ptr<TensorStorage> s_;
};

// Thread-local gradient mode. Ops record tape nodes only when enabled.
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Reverse-mode sweep from a scalar loss. Seeds d(loss)/d(loss) = 1 and visits
// recorded nodes in reverse topological order exactly once. Gradients
// accumulate (+=) into whatever is already present, so callers zero grads
// between steps.
void backward(const Tensor& loss);

// Tensors on the tape reachable from `root`, inputs before outputs.
// Exposed for tests that audit traversal order.
std::vector<Tensor> topo_order(const Tensor& root);

// Helper used by op implementations: mark `out` as produced by `name` over
// `inputs` with the given pullback. No-op when grad mode is off or no input
// requires grad.
void attach_node(Tensor& out, const char* name, std::vector<Tensor> inputs,
                 std::function<void(Tensor&)> backprop);

} // namespace hint
