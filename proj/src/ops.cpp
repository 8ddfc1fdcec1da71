#include "mtt/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mtt/errors.hpp"
#include "mtt/kernels.hpp"

namespace mtt {

namespace {

constexpr double kMaskPenalty = -1e30;

void check_finite(const Tensor& t, const char* op) {
    for (double v : t.values()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw ShapeError(std::string(op) + " requires a rank-2 tensor, got " + t.shape_str());
    }
}

bool grad_flows(const Tensor& out, Tape* tape) { return tape != nullptr && out.requires_grad(); }

}  // namespace

Mask Mask::all_visible(int rows, int cols) {
    return Mask{rows, cols, std::vector<uint8_t>(static_cast<size_t>(rows) * cols, 1)};
}

Mask Mask::causal(int t) {
    Mask m{t, t, std::vector<uint8_t>(static_cast<size_t>(t) * t, 0)};
    for (int i = 0; i < t; ++i) {
        for (int j = 0; j <= i; ++j) m.keep[static_cast<size_t>(i) * t + j] = 1;
    }
    return m;
}

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul dimension mismatch: " + a.shape_str() + " x " + b.shape_str());
    }
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
    kernels::matmul(a.values().data(), b.values().data(), out.values_mut().data(), m, k, n);
    check_finite(out, "matmul");

    if (grad_flows(out, tape)) {
        tape->record([a, b, out, m, k, n]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty()) return;
            if (a.requires_grad()) {
                // dA = dC * B^T
                std::vector<double> bt(static_cast<size_t>(n) * k);
                for (int p = 0; p < k; ++p) {
                    for (int j = 0; j < n; ++j) {
                        bt[static_cast<size_t>(j) * k + p] = b(p, j);
                    }
                }
                std::vector<double> da(static_cast<size_t>(m) * k);
                kernels::matmul(dc.data(), bt.data(), da.data(), m, n, k);
                accumulate_grad(a, da);
            }
            if (b.requires_grad()) {
                // dB = A^T * dC
                std::vector<double> at(static_cast<size_t>(k) * m);
                for (int i = 0; i < m; ++i) {
                    for (int p = 0; p < k; ++p) {
                        at[static_cast<size_t>(p) * m + i] = a(i, p);
                    }
                }
                std::vector<double> db(static_cast<size_t>(k) * n);
                kernels::matmul(at.data(), dc.data(), db.data(), k, m, n);
                accumulate_grad(b, db);
            }
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    const bool same_shape = a.shape() == b.shape();
    const bool broadcast_b = a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.cols();
    const bool broadcast_a = b.rank() == 2 && a.rank() == 1 && a.shape()[0] == b.cols();
    if (!same_shape && !broadcast_b && !broadcast_a) {
        throw ShapeError("add shape mismatch: " + a.shape_str() + " + " + b.shape_str());
    }
    if (broadcast_a) return add(b, a, tape);  // normalise to (matrix, row vector)

    Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
    auto ov = out.values_mut();
    const auto av = a.values();
    const auto bv = b.values();
    if (same_shape) {
        for (int64_t i = 0; i < a.size(); ++i) ov[i] = av[i] + bv[i];
    } else {
        const int n = a.cols();
        for (int i = 0; i < a.rows(); ++i) {
            for (int j = 0; j < n; ++j) {
                ov[static_cast<int64_t>(i) * n + j] = av[static_cast<int64_t>(i) * n + j] + bv[j];
            }
        }
    }
    check_finite(out, "add");

    if (grad_flows(out, tape)) {
        tape->record([a, b, out, same_shape]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty()) return;
            if (a.requires_grad()) accumulate_grad(a, dc);
            if (b.requires_grad()) {
                if (same_shape) {
                    accumulate_grad(b, dc);
                } else {
                    const int n = a.cols();
                    std::vector<double> db(static_cast<size_t>(n), 0.0);
                    for (int i = 0; i < a.rows(); ++i) {
                        for (int j = 0; j < n; ++j) db[j] += dc[static_cast<size_t>(i) * n + j];
                    }
                    accumulate_grad(b, db);
                }
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s, Tape* tape) {
    Tensor out = Tensor::zeros(a.shape(), a.requires_grad());
    auto ov = out.values_mut();
    const auto av = a.values();
    for (int64_t i = 0; i < a.size(); ++i) ov[i] = av[i] * s;
    check_finite(out, "scale");

    if (grad_flows(out, tape)) {
        tape->record([a, out, s]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty() || !a.requires_grad()) return;
            std::vector<double> da(dc.size());
            for (size_t i = 0; i < dc.size(); ++i) da[i] = dc[i] * s;
            accumulate_grad(a, da);
        });
    }
    return out;
}

Tensor transpose(const Tensor& a, Tape* tape) {
    require_rank2(a, "transpose");
    const int m = a.rows(), n = a.cols();
    Tensor out = Tensor::zeros({n, m}, a.requires_grad());
    auto ov = out.values_mut();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) ov[static_cast<int64_t>(j) * m + i] = a(i, j);
    }

    if (grad_flows(out, tape)) {
        tape->record([a, out, m, n]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty() || !a.requires_grad()) return;
            std::vector<double> da(static_cast<size_t>(m) * n);
            for (int j = 0; j < n; ++j) {
                for (int i = 0; i < m; ++i) {
                    da[static_cast<size_t>(i) * n + j] = dc[static_cast<size_t>(j) * m + i];
                }
            }
            accumulate_grad(a, da);
        });
    }
    return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b, Tape* tape) {
    if (a.rank() != b.rank() || a.rank() > 2) {
        throw ShapeError("concat shape mismatch: " + a.shape_str() + " ++ " + b.shape_str());
    }
    Tensor out;
    if (a.rank() == 1) {
        const int p = a.shape()[0], q = b.shape()[0];
        out = Tensor::zeros({p + q}, a.requires_grad() || b.requires_grad());
        auto ov = out.values_mut();
        for (int i = 0; i < p; ++i) ov[i] = a(i);
        for (int i = 0; i < q; ++i) ov[p + i] = b(i);
    } else {
        if (a.rows() != b.rows()) {
            throw ShapeError("concat shape mismatch: " + a.shape_str() + " ++ " + b.shape_str());
        }
        const int m = a.rows(), p = a.cols(), q = b.cols();
        out = Tensor::zeros({m, p + q}, a.requires_grad() || b.requires_grad());
        auto ov = out.values_mut();
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < p; ++j) ov[static_cast<int64_t>(i) * (p + q) + j] = a(i, j);
            for (int j = 0; j < q; ++j) ov[static_cast<int64_t>(i) * (p + q) + p + j] = b(i, j);
        }
    }

    if (grad_flows(out, tape)) {
        tape->record([a, b, out]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty()) return;
            const bool rank1 = a.rank() == 1;
            const int m = rank1 ? 1 : a.rows();
            const int p = rank1 ? a.shape()[0] : a.cols();
            const int q = rank1 ? b.shape()[0] : b.cols();
            if (a.requires_grad()) {
                std::vector<double> da(static_cast<size_t>(m) * p);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < p; ++j) {
                        da[static_cast<size_t>(i) * p + j] = dc[static_cast<size_t>(i) * (p + q) + j];
                    }
                }
                accumulate_grad(a, da);
            }
            if (b.requires_grad()) {
                std::vector<double> db(static_cast<size_t>(m) * q);
                for (int i = 0; i < m; ++i) {
                    for (int j = 0; j < q; ++j) {
                        db[static_cast<size_t>(i) * q + j] =
                            dc[static_cast<size_t>(i) * (p + q) + p + j];
                    }
                }
                accumulate_grad(b, db);
            }
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, int begin, int end, Tape* tape) {
    if (a.rank() > 2) throw ShapeError("slice_rows requires rank 1 or 2, got " + a.shape_str());
    const int m = a.shape()[0];
    if (begin < 0 || end > m || begin >= end) {
        throw ShapeError("slice_rows range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for " + a.shape_str());
    }
    const int n = a.rank() == 2 ? a.cols() : 1;
    const int rows_out = end - begin;
    Tensor out = a.rank() == 2 ? Tensor::zeros({rows_out, n}, a.requires_grad())
                               : Tensor::zeros({rows_out}, a.requires_grad());
    auto ov = out.values_mut();
    const auto av = a.values();
    for (int64_t i = 0; i < static_cast<int64_t>(rows_out) * n; ++i) {
        ov[i] = av[static_cast<int64_t>(begin) * n + i];
    }

    if (grad_flows(out, tape)) {
        tape->record([a, out, begin, n]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty() || !a.requires_grad()) return;
            std::vector<double> da(a.values().size(), 0.0);
            for (size_t i = 0; i < dc.size(); ++i) {
                da[static_cast<size_t>(begin) * n + i] = dc[i];
            }
            accumulate_grad(a, da);
        });
    }
    return out;
}

Tensor mean_reduce(const Tensor& a, Tape* tape) {
    const double inv = 1.0 / static_cast<double>(a.size());
    double sum = 0.0;
    for (double v : a.values()) sum += v;
    Tensor out = Tensor::from_values({1}, {sum * inv}, a.requires_grad());
    check_finite(out, "mean_reduce");

    if (grad_flows(out, tape)) {
        tape->record([a, out, inv]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty() || !a.requires_grad()) return;
            std::vector<double> da(a.values().size(), dc[0] * inv);
            accumulate_grad(a, da);
        });
    }
    return out;
}

Tensor softmax_rows(const Tensor& x, const Mask* mask, Tape* tape) {
    require_rank2(x, "softmax_rows");
    const int m = x.rows(), n = x.cols();
    if (mask && (mask->rows != m || mask->cols != n)) {
        throw ShapeError("softmax mask shape [" + std::to_string(mask->rows) + "x" +
                         std::to_string(mask->cols) + "] does not match scores " + x.shape_str());
    }

    Tensor out = Tensor::zeros({m, n}, x.requires_grad());
    auto ov = out.values_mut();
    for (int i = 0; i < m; ++i) {
        int kept = 0;
        double row_max = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j) {
            const bool keep = !mask || mask->at(i, j);
            const double s = x(i, j) + (keep ? 0.0 : kMaskPenalty);
            if (keep) ++kept;
            if (s > row_max) row_max = s;
        }
        if (kept == 0) {
            throw MaskError("softmax row " + std::to_string(i) + " is fully masked");
        }
        double denom = 0.0;
        for (int j = 0; j < n; ++j) {
            const bool keep = !mask || mask->at(i, j);
            const double s = x(i, j) + (keep ? 0.0 : kMaskPenalty);
            const double e = std::exp(s - row_max);
            ov[static_cast<int64_t>(i) * n + j] = e;
            denom += e;
        }
        for (int j = 0; j < n; ++j) {
            const bool keep = !mask || mask->at(i, j);
            auto& y = ov[static_cast<int64_t>(i) * n + j];
            y = keep ? y / denom : 0.0;  // masked outputs exactly 0
        }
    }
    check_finite(out, "softmax_rows");

    if (grad_flows(out, tape)) {
        tape->record([x, out, m, n]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty() || !x.requires_grad()) return;
            std::vector<double> dx(static_cast<size_t>(m) * n);
            for (int i = 0; i < m; ++i) {
                double dot = 0.0;
                for (int j = 0; j < n; ++j) {
                    const size_t idx = static_cast<size_t>(i) * n + j;
                    dot += dc[idx] * out.impl()->values[idx];
                }
                for (int j = 0; j < n; ++j) {
                    const size_t idx = static_cast<size_t>(i) * n + j;
                    dx[idx] = out.impl()->values[idx] * (dc[idx] - dot);
                }
            }
            accumulate_grad(x, dx);
        });
    }
    return out;
}

Tensor leaky_relu(const Tensor& x, double slope, Tape* tape) {
    if (!(slope > 0.0 && slope < 1.0)) {
        throw ValidationError("leaky_relu slope must be in (0, 1), got " + std::to_string(slope));
    }
    Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
    auto ov = out.values_mut();
    const auto xv = x.values();
    for (int64_t i = 0; i < x.size(); ++i) ov[i] = xv[i] >= 0.0 ? xv[i] : slope * xv[i];
    check_finite(out, "leaky_relu");

    if (grad_flows(out, tape)) {
        tape->record([x, out, slope]() {
            const auto& dc = out.impl()->grad;
            if (dc.empty() || !x.requires_grad()) return;
            const auto xv = x.values();
            std::vector<double> dx(dc.size());
            for (size_t i = 0; i < dc.size(); ++i) {
                dx[i] = dc[i] * (xv[i] >= 0.0 ? 1.0 : slope);
            }
            accumulate_grad(x, dx);
        });
    }
    return out;
}

double finite_difference_check(const ScalarFn& f, const Tensor& x, double eps) {
    if (eps <= 0.0) throw ValidationError("finite_difference_check eps must be positive");

    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    probe.clear_grad();
    Tape tape;
    Tensor loss = f(probe, &tape);
    if (loss.size() != 1) throw ValidationError("finite_difference_check needs a scalar function");
    tape.backward(loss);
    std::vector<double> analytic(probe.values().size(), 0.0);
    if (probe.has_grad()) {
        analytic.assign(probe.grad().begin(), probe.grad().end());
    }

    double max_err = 0.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        Tensor hi = x.clone();
        hi.values_mut()[i] += eps;
        Tensor lo = x.clone();
        lo.values_mut()[i] -= eps;
        const double fhi = f(hi, nullptr).item();
        const double flo = f(lo, nullptr).item();
        if (!std::isfinite(fhi) || !std::isfinite(flo)) {
            throw NumericError("finite_difference_check: function non-finite at probe point");
        }
        const double fd = (fhi - flo) / (2.0 * eps);
        const double err = std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i]));
        if (err > max_err) max_err = err;
    }
    return max_err;
}

}  // namespace mtt
