#include "item/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace item::kernels {

namespace detail {

// Per-element routines shared by the parallel and serial entry points.
// Keeping the accumulation order identical in both is what makes the
// outputs bit-exact across backends and thread counts.

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline void forward_row(const double* xr, const double* w, const double* b,
                        int in_dim, int out_dim, double* yr) {
    for (int j = 0; j < out_dim; ++j) {
        yr[j] = b[j] + dot(xr, w + static_cast<size_t>(j) * in_dim, in_dim);
    }
}

inline void backward_input_row(const double* dyr, const double* w,
                               int out_dim, int in_dim, double* dxr) {
    for (int i = 0; i < in_dim; ++i) dxr[i] = 0.0;
    for (int j = 0; j < out_dim; ++j) {
        const double c = dyr[j];
        const double* wj = w + static_cast<size_t>(j) * in_dim;
        for (int i = 0; i < in_dim; ++i) dxr[i] += c * wj[i];
    }
}

// gradient of one output unit: row j of dW plus db[j]
inline void backward_params_unit(const double* x, const double* dy, int n,
                                 int in_dim, int out_dim, int j,
                                 double* dwj, double* dbj) {
    for (int i = 0; i < in_dim; ++i) dwj[i] = 0.0;
    double bj = 0.0;
    for (int r = 0; r < n; ++r) {
        const double c = dy[static_cast<size_t>(r) * out_dim + j];
        bj += c;
        const double* xr = x + static_cast<size_t>(r) * in_dim;
        for (int i = 0; i < in_dim; ++i) dwj[i] += c * xr[i];
    }
    *dbj = bj;
}

inline void softmax_row(const double* lr, int k, double* pr) {
    double m = lr[0];
    for (int j = 1; j < k; ++j) m = std::max(m, lr[j]);
    double s = 0.0;
    for (int j = 0; j < k; ++j) {
        pr[j] = std::exp(lr[j] - m);
        s += pr[j];
    }
    const double inv = 1.0 / s;
    for (int j = 0; j < k; ++j) pr[j] *= inv;
}

inline double logsumexp_row(const double* lr, int k) {
    double m = lr[0];
    for (int j = 1; j < k; ++j) m = std::max(m, lr[j]);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += std::exp(lr[j] - m);
    return m + std::log(s);
}

} // namespace detail

void linear_forward(const double* x, int n, int in_dim,
                    const double* w, const double* b, int out_dim, double* y) {
#pragma omp parallel for schedule(static) if (n >= 32)
    for (int r = 0; r < n; ++r) {
        detail::forward_row(x + static_cast<size_t>(r) * in_dim, w, b, in_dim, out_dim,
                            y + static_cast<size_t>(r) * out_dim);
    }
}

void linear_backward_input(const double* dy, int n, int out_dim,
                           const double* w, int in_dim, double* dx) {
#pragma omp parallel for schedule(static) if (n >= 32)
    for (int r = 0; r < n; ++r) {
        detail::backward_input_row(dy + static_cast<size_t>(r) * out_dim, w, out_dim, in_dim,
                                   dx + static_cast<size_t>(r) * in_dim);
    }
}

void linear_backward_params(const double* x, const double* dy, int n,
                            int in_dim, int out_dim, double* dw, double* db) {
#pragma omp parallel for schedule(static) if (out_dim >= 16)
    for (int j = 0; j < out_dim; ++j) {
        detail::backward_params_unit(x, dy, n, in_dim, out_dim, j,
                                     dw + static_cast<size_t>(j) * in_dim, db + j);
    }
}

void relu_forward(const double* z, size_t count, double* a) {
    const long long c = static_cast<long long>(count);
#pragma omp parallel for schedule(static) if (c >= 4096)
    for (long long i = 0; i < c; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward(const double* z, const double* da, size_t count, double* dz) {
    const long long c = static_cast<long long>(count);
#pragma omp parallel for schedule(static) if (c >= 4096)
    for (long long i = 0; i < c; ++i) dz[i] = z[i] > 0.0 ? da[i] : 0.0;
}

void softmax_rows(const double* logits, int n, int k, double* p) {
#pragma omp parallel for schedule(static) if (n >= 32)
    for (int r = 0; r < n; ++r) {
        detail::softmax_row(logits + static_cast<size_t>(r) * k, k, p + static_cast<size_t>(r) * k);
    }
}

void ce_loss_rows(const double* logits, int n, int k, const int* targets, double* loss) {
#pragma omp parallel for schedule(static) if (n >= 32)
    for (int r = 0; r < n; ++r) {
        const double* lr = logits + static_cast<size_t>(r) * k;
        loss[r] = detail::logsumexp_row(lr, k) - lr[targets[r]];
    }
}

void mixed_ce_loss_rows(const double* logits, int n, int k,
                        const int* labels_a, const int* labels_b,
                        const double* gamma, double* loss) {
#pragma omp parallel for schedule(static) if (n >= 32)
    for (int r = 0; r < n; ++r) {
        const double* lr = logits + static_cast<size_t>(r) * k;
        const double lse = detail::logsumexp_row(lr, k);
        loss[r] = gamma[r] * (lse - lr[labels_a[r]]) + (1.0 - gamma[r]) * (lse - lr[labels_b[r]]);
    }
}

namespace serial {

void linear_forward(const double* x, int n, int in_dim,
                    const double* w, const double* b, int out_dim, double* y) {
    for (int r = 0; r < n; ++r) {
        detail::forward_row(x + static_cast<size_t>(r) * in_dim, w, b, in_dim, out_dim,
                            y + static_cast<size_t>(r) * out_dim);
    }
}

void linear_backward_input(const double* dy, int n, int out_dim,
                           const double* w, int in_dim, double* dx) {
    for (int r = 0; r < n; ++r) {
        detail::backward_input_row(dy + static_cast<size_t>(r) * out_dim, w, out_dim, in_dim,
                                   dx + static_cast<size_t>(r) * in_dim);
    }
}

void linear_backward_params(const double* x, const double* dy, int n,
                            int in_dim, int out_dim, double* dw, double* db) {
    for (int j = 0; j < out_dim; ++j) {
        detail::backward_params_unit(x, dy, n, in_dim, out_dim, j,
                                     dw + static_cast<size_t>(j) * in_dim, db + j);
    }
}

void relu_forward(const double* z, size_t count, double* a) {
    for (size_t i = 0; i < count; ++i) a[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward(const double* z, const double* da, size_t count, double* dz) {
    for (size_t i = 0; i < count; ++i) dz[i] = z[i] > 0.0 ? da[i] : 0.0;
}

void softmax_rows(const double* logits, int n, int k, double* p) {
    for (int r = 0; r < n; ++r) {
        detail::softmax_row(logits + static_cast<size_t>(r) * k, k, p + static_cast<size_t>(r) * k);
    }
}

void ce_loss_rows(const double* logits, int n, int k, const int* targets, double* loss) {
    for (int r = 0; r < n; ++r) {
        const double* lr = logits + static_cast<size_t>(r) * k;
        loss[r] = detail::logsumexp_row(lr, k) - lr[targets[r]];
    }
}

void mixed_ce_loss_rows(const double* logits, int n, int k,
                        const int* labels_a, const int* labels_b,
                        const double* gamma, double* loss) {
    for (int r = 0; r < n; ++r) {
        const double* lr = logits + static_cast<size_t>(r) * k;
        const double lse = detail::logsumexp_row(lr, k);
        loss[r] = gamma[r] * (lse - lr[labels_a[r]]) + (1.0 - gamma[r]) * (lse - lr[labels_b[r]]);
    }
}

} // namespace serial

} // namespace item::kernels
