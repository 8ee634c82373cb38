#include "hint/ops.hpp"

#include "hint/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

namespace hint {

namespace {

std::atomic<std::int64_t> g_mac_count{0};

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
    }
}

void check_2d(const char* op, const Tensor& a) {
    if (a.ndim() != 2) {
        throw ShapeError(std::string(op) + ": expected 2-D tensor, got " +
                         a.shape_str());
    }
}

} // namespace

MacCounter::MacCounter() : start_(g_mac_count.load()) {}
MacCounter::~MacCounter() = default;
std::int64_t MacCounter::count() const { return g_mac_count.load() - start_; }
std::int64_t mac_count_raw() { return g_mac_count.load(); }

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
    attach_node(out, "add", {a, b}, [](Tensor& o) {
        auto& node = *o.storage()->producer;
        const double* g = o.grad();
        std::size_t n = o.size();
        for (auto& in : node.inputs) {
            if (!in.requires_grad()) continue;
            double* gi = in.grad();
            for (std::size_t i = 0; i < n; ++i) gi[i] += g[i];
        }
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
    attach_node(out, "mul", {a, b}, [](Tensor& o) {
        auto& node = *o.storage()->producer;
        Tensor a = node.inputs[0];
        Tensor b = node.inputs[1];
        const double* g = o.grad();
        std::size_t n = o.size();
        if (a.requires_grad()) {
            double* ga = a.grad();
            const double* pb = b.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
        }
        if (b.requires_grad()) {
            double* gb = b.grad();
            const double* pa = a.data();
            for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
        }
    });
    return out;
}

Tensor scale(const Tensor& a, double c) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * c;
    attach_node(out, "scale", {a}, [c](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        const double* g = o.grad();
        double* ga = a.grad();
        std::size_t n = o.size();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * c;
    });
    return out;
}

namespace {

// out[m x q] += A[m x p] * B[p x q]; ikj order so the inner loop is
// contiguous in both B and out.
void matmul_into(double* out, const double* a, const double* b, int m, int p, int q) {
    for (int i = 0; i < m; ++i) {
        double* orow = out + static_cast<std::size_t>(i) * q;
        const double* arow = a + static_cast<std::size_t>(i) * p;
        for (int k = 0; k < p; ++k) {
            double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b + static_cast<std::size_t>(k) * q;
            for (int j = 0; j < q; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x q] += A[p x m]^T * B[p x q]
void matmul_at_b_into(double* out, const double* a, const double* b, int m, int p, int q) {
    for (int k = 0; k < p; ++k) {
        const double* arow = a + static_cast<std::size_t>(k) * m;
        const double* brow = b + static_cast<std::size_t>(k) * q;
        for (int i = 0; i < m; ++i) {
            double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out + static_cast<std::size_t>(i) * q;
            for (int j = 0; j < q; ++j) orow[j] += av * brow[j];
        }
    }
}

// out[m x q] += A[m x p] * B[q x p]^T
void matmul_a_bt_into(double* out, const double* a, const double* b, int m, int p, int q) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * p;
        double* orow = out + static_cast<std::size_t>(i) * q;
        for (int j = 0; j < q; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * p;
            double acc = 0.0;
            for (int k = 0; k < p; ++k) acc += arow[k] * brow[k];
            orow[j] += acc;
        }
    }
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d("matmul", a);
    check_2d("matmul", b);
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: lhs " + a.shape_str() + " incompatible with rhs " +
                         b.shape_str());
    }
    int m = a.rows(), p = a.cols(), q = b.cols();
    g_mac_count.fetch_add(static_cast<std::int64_t>(m) * p * q,
                          std::memory_order_relaxed);
    Tensor out = Tensor::zeros({m, q});
    matmul_into(out.data(), a.data(), b.data(), m, p, q);
    attach_node(out, "matmul", {a, b}, [m, p, q](Tensor& o) {
        auto& node = *o.storage()->producer;
        Tensor a = node.inputs[0];
        Tensor b = node.inputs[1];
        const double* g = o.grad();
        if (a.requires_grad()) {
            // dA += dC * B^T
            matmul_a_bt_into(a.grad(), g, b.data(), m, q, p);
        }
        if (b.requires_grad()) {
            // dB += A^T * dC
            matmul_at_b_into(b.grad(), a.data(), g, p, m, q);
        }
    });
    return out;
}

Tensor transpose(const Tensor& a) {
    check_2d("transpose", a);
    int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({n, m});
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            po[static_cast<std::size_t>(j) * m + i] = pa[static_cast<std::size_t>(i) * n + j];
    attach_node(out, "transpose", {a}, [m, n](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        const double* g = o.grad();
        double* ga = a.grad();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i)
                ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
    });
    return out;
}

namespace {

inline double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); }
inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846);
}

} // namespace

Tensor gelu(const Tensor& a) {
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    double* po = out.data();
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * norm_cdf(pa[i]);
    attach_node(out, "gelu", {a}, [](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        const double* g = o.grad();
        const double* pa = a.data();
        double* ga = a.grad();
        std::size_t n = o.size();
        for (std::size_t i = 0; i < n; ++i) {
            double x = pa[i];
            ga[i] += g[i] * (norm_cdf(x) + x * norm_pdf(x));
        }
    });
    return out;
}

namespace {

// Shared rowwise softmax kernel; max-subtraction keeps exp in range for
// magnitudes up to around 700 either way, far beyond anything the model sees.
void softmax_rows_kernel(double* out, const double* in, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* x = in + static_cast<std::size_t>(i) * cols;
        double* y = out + static_cast<std::size_t>(i) * cols;
        double mx = x[0];
        for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < cols; ++j) {
            y[j] = std::exp(x[j] - mx);
            sum += y[j];
        }
        double inv = 1.0 / sum;
        for (int j = 0; j < cols; ++j) y[j] *= inv;
    }
}

void softmax_backward_rows(double* ga, const double* g, const double* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        const double* gr = g + static_cast<std::size_t>(i) * cols;
        const double* yr = y + static_cast<std::size_t>(i) * cols;
        double* gar = ga + static_cast<std::size_t>(i) * cols;
        double dot = 0.0;
        for (int j = 0; j < cols; ++j) dot += gr[j] * yr[j];
        for (int j = 0; j < cols; ++j) gar[j] += yr[j] * (gr[j] - dot);
    }
}

Tensor softmax_impl(const Tensor& a, int rows, int cols) {
    Tensor out = Tensor::zeros(a.shape());
    softmax_rows_kernel(out.data(), a.data(), rows, cols);
    attach_node(out, "softmax", {a}, [rows, cols](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        softmax_backward_rows(a.grad(), o.grad(), o.data(), rows, cols);
    });
    return out;
}

} // namespace

Tensor softmax_rows(const Tensor& a) {
    check_2d("softmax_rows", a);
    return softmax_impl(a, a.rows(), a.cols());
}

Tensor softmax_vec(const Tensor& a) {
    if (a.ndim() != 1) {
        throw ShapeError("softmax_vec: expected 1-D tensor, got " + a.shape_str());
    }
    return softmax_impl(a, 1, a.dim(0));
}

Tensor rmsnorm(const Tensor& x, const Tensor& gain) {
    check_2d("rmsnorm", x);
    if (gain.ndim() != 1 || gain.dim(0) != x.cols()) {
        throw ShapeError("rmsnorm: gain " + gain.shape_str() + " does not match " +
                         x.shape_str());
    }
    int rows = x.rows(), cols = x.cols();
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    const double* pg = gain.data();
    double* po = out.data();
    std::vector<double> inv(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i) {
        const double* xr = px + static_cast<std::size_t>(i) * cols;
        double ms = 0.0;
        for (int j = 0; j < cols; ++j) ms += xr[j] * xr[j];
        ms /= cols;
        double r = 1.0 / std::sqrt(ms + rmsnorm_eps);
        inv[static_cast<std::size_t>(i)] = r;
        double* orow = po + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) orow[j] = xr[j] * r * pg[j];
    }
    attach_node(out, "rmsnorm", {x, gain}, [rows, cols, inv](Tensor& o) {
        auto& node = *o.storage()->producer;
        Tensor x = node.inputs[0];
        Tensor gain = node.inputs[1];
        const double* g = o.grad();
        const double* px = x.data();
        const double* pg = gain.data();
        for (int i = 0; i < rows; ++i) {
            const double* gr = g + static_cast<std::size_t>(i) * cols;
            const double* xr = px + static_cast<std::size_t>(i) * cols;
            double r = inv[static_cast<std::size_t>(i)];
            if (x.requires_grad()) {
                double s = 0.0;
                for (int j = 0; j < cols; ++j) s += gr[j] * pg[j] * xr[j];
                s *= r * r * r / cols;
                double* gx = x.grad() + static_cast<std::size_t>(i) * cols;
                for (int j = 0; j < cols; ++j) gx[j] += r * pg[j] * gr[j] - s * xr[j];
            }
            if (gain.requires_grad()) {
                double* gg = gain.grad();
                for (int j = 0; j < cols; ++j) gg[j] += gr[j] * xr[j] * r;
            }
        }
    });
    return out;
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
    check_2d("embedding_lookup", table);
    int v = table.rows(), d = table.cols();
    int n = static_cast<int>(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= v) {
            throw ShapeError("embedding_lookup: id " + std::to_string(id) +
                             " out of range for table " + table.shape_str());
        }
    }
    Tensor out = Tensor::zeros({n, d});
    const double* pt = table.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i) {
        const double* row = pt + static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]) * d;
        std::copy(row, row + d, po + static_cast<std::size_t>(i) * d);
    }
    std::vector<int> idv(ids.begin(), ids.end());
    attach_node(out, "embedding", {table}, [idv, d](Tensor& o) {
        Tensor table = o.storage()->producer->inputs[0];
        if (!table.requires_grad()) return;
        const double* g = o.grad();
        double* gt = table.grad();
        for (std::size_t i = 0; i < idv.size(); ++i) {
            double* trow = gt + static_cast<std::size_t>(idv[i]) * d;
            const double* grow = g + i * d;
            for (int j = 0; j < d; ++j) trow[j] += grow[j];
        }
    });
    return out;
}

Tensor slice_rows(const Tensor& a, int r0, int n) {
    check_2d("slice_rows", a);
    if (r0 < 0 || n < 0 || r0 + n > a.rows()) {
        throw ShapeError("slice_rows: range [" + std::to_string(r0) + ", " +
                         std::to_string(r0 + n) + ") out of bounds for " + a.shape_str());
    }
    int c = a.cols();
    Tensor out = Tensor::zeros({n, c});
    const double* pa = a.data() + static_cast<std::size_t>(r0) * c;
    std::copy(pa, pa + static_cast<std::size_t>(n) * c, out.data());
    attach_node(out, "slice_rows", {a}, [r0, n, c](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        const double* g = o.grad();
        double* ga = a.grad() + static_cast<std::size_t>(r0) * c;
        for (std::size_t i = 0; i < static_cast<std::size_t>(n) * c; ++i) ga[i] += g[i];
    });
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int n) {
    check_2d("slice_cols", a);
    if (c0 < 0 || n < 0 || c0 + n > a.cols()) {
        throw ShapeError("slice_cols: range [" + std::to_string(c0) + ", " +
                         std::to_string(c0 + n) + ") out of bounds for " + a.shape_str());
    }
    int rows = a.rows(), cols = a.cols();
    Tensor out = Tensor::zeros({rows, n});
    const double* pa = a.data();
    double* po = out.data();
    for (int i = 0; i < rows; ++i) {
        const double* src = pa + static_cast<std::size_t>(i) * cols + c0;
        std::copy(src, src + n, po + static_cast<std::size_t>(i) * n);
    }
    attach_node(out, "slice_cols", {a}, [c0, n, rows, cols](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        const double* g = o.grad();
        double* ga = a.grad();
        for (int i = 0; i < rows; ++i) {
            double* dst = ga + static_cast<std::size_t>(i) * cols + c0;
            const double* src = g + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) dst[j] += src[j];
        }
    });
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no parts");
    int cols = parts[0].cols();
    int rows = 0;
    for (const auto& p : parts) {
        check_2d("concat_rows", p);
        if (p.cols() != cols) {
            throw ShapeError("concat_rows: column mismatch " + parts[0].shape_str() +
                             " vs " + p.shape_str());
        }
        rows += p.rows();
    }
    Tensor out = Tensor::zeros({rows, cols});
    double* po = out.data();
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.size(), po);
        po += p.size();
    }
    attach_node(out, "concat_rows", parts, [](Tensor& o) {
        auto& node = *o.storage()->producer;
        const double* g = o.grad();
        std::size_t off = 0;
        for (auto& in : node.inputs) {
            std::size_t n = in.size();
            if (in.requires_grad()) {
                double* gi = in.grad();
                for (std::size_t i = 0; i < n; ++i) gi[i] += g[off + i];
            }
            off += n;
        }
    });
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no parts");
    int rows = parts[0].rows();
    int cols = 0;
    for (const auto& p : parts) {
        check_2d("concat_cols", p);
        if (p.rows() != rows) {
            throw ShapeError("concat_cols: row mismatch " + parts[0].shape_str() +
                             " vs " + p.shape_str());
        }
        cols += p.cols();
    }
    Tensor out = Tensor::zeros({rows, cols});
    double* po = out.data();
    int c0 = 0;
    for (const auto& p : parts) {
        int pc = p.cols();
        const double* pp = p.data();
        for (int i = 0; i < rows; ++i) {
            std::copy(pp + static_cast<std::size_t>(i) * pc,
                      pp + static_cast<std::size_t>(i + 1) * pc,
                      po + static_cast<std::size_t>(i) * cols + c0);
        }
        c0 += pc;
    }
    attach_node(out, "concat_cols", parts, [rows, cols](Tensor& o) {
        auto& node = *o.storage()->producer;
        const double* g = o.grad();
        int c0 = 0;
        for (auto& in : node.inputs) {
            int pc = in.cols();
            if (in.requires_grad()) {
                double* gi = in.grad();
                for (int i = 0; i < rows; ++i) {
                    const double* src = g + static_cast<std::size_t>(i) * cols + c0;
                    double* dst = gi + static_cast<std::size_t>(i) * pc;
                    for (int j = 0; j < pc; ++j) dst[j] += src[j];
                }
            }
            c0 += pc;
        }
    });
    return out;
}

Tensor sum_all(const Tensor& a) {
    double s = 0.0;
    const double* pa = a.data();
    std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) s += pa[i];
    Tensor out = Tensor::scalar(s);
    attach_node(out, "sum_all", {a}, [](Tensor& o) {
        Tensor a = o.storage()->producer->inputs[0];
        if (!a.requires_grad()) return;
        double g = o.grad()[0];
        double* ga = a.grad();
        std::size_t n = a.size();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
    return out;
}

Tensor mean_all(const Tensor& a) {
    if (a.size() == 0) throw ShapeError("mean_all: empty tensor");
    return scale(sum_all(a), 1.0 / static_cast<double>(a.size()));
}

Tensor cross_entropy_mean(const Tensor& logits, std::span<const int> targets) {
    check_2d("cross_entropy_mean", logits);
    int n = logits.rows(), v = logits.cols();
    if (static_cast<int>(targets.size()) != n) {
        throw ShapeError("cross_entropy_mean: " + std::to_string(targets.size()) +
                         " targets for logits " + logits.shape_str());
    }
    for (int t : targets) {
        if (t < 0 || t >= v) {
            throw ShapeError("cross_entropy_mean: target id " + std::to_string(t) +
                             " out of range for " + logits.shape_str());
        }
    }
    const double* px = logits.data();
    // Cache the row softmax for the backward pass.
    std::vector<double> probs(logits.size());
    softmax_rows_kernel(probs.data(), px, n, v);
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* x = px + static_cast<std::size_t>(i) * v;
        double mx = x[0];
        for (int j = 1; j < v; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (int j = 0; j < v; ++j) sum += std::exp(x[j] - mx);
        double lse = mx + std::log(sum);
        loss += lse - x[targets[static_cast<std::size_t>(i)]];
    }
    loss /= n;
    Tensor out = Tensor::scalar(loss);
    std::vector<int> tv(targets.begin(), targets.end());
    attach_node(out, "cross_entropy", {logits}, [tv, n, v, probs](Tensor& o) {
        Tensor logits = o.storage()->producer->inputs[0];
        if (!logits.requires_grad()) return;
        double g = o.grad()[0] / n;
        double* gl = logits.grad();
        for (int i = 0; i < n; ++i) {
            const double* pr = probs.data() + static_cast<std::size_t>(i) * v;
            double* gr = gl + static_cast<std::size_t>(i) * v;
            for (int j = 0; j < v; ++j) gr[j] += g * pr[j];
            gr[tv[static_cast<std::size_t>(i)]] -= g;
        }
    });
    return out;
}

} // namespace hint
