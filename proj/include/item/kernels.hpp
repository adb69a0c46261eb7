#pragma once

#include <cstddef>

namespace item::kernels {

// Dense math kernels used by the network and the dataset-wide passes.
// The default entry points are OpenMP-parallel over independent output
// elements; every element is computed with a fixed operation order, so
// results are bit-identical for any thread count, including one.
//
// kernels::serial holds the plain-loop reference implementations. Tests
// assert bitwise agreement between the two; tools/bench_kernels times them.

// Y = X * W^T + b        X: n x in, W: out x in, b: out, Y: n x out
void linear_forward(const double* x, int n, int in_dim,
                    const double* w, const double* b, int out_dim, double* y);

// dX = dY * W            dY: n x out, W: out x in, dX: n x in
void linear_backward_input(const double* dy, int n, int out_dim,
                           const double* w, int in_dim, double* dx);

// dW = dY^T * X, db = column sums of dY
void linear_backward_params(const double* x, const double* dy, int n,
                            int in_dim, int out_dim, double* dw, double* db);

void relu_forward(const double* z, size_t count, double* a);

// dZ = dA where z > 0, else 0
void relu_backward(const double* z, const double* da, size_t count, double* dz);

// row-wise softmax with max-shift; p may alias logits
void softmax_rows(const double* logits, int n, int k, double* p);

// loss[r] = logsumexp(row r) - logits[r, target[r]]
void ce_loss_rows(const double* logits, int n, int k, const int* targets, double* loss);

// loss[r] = gamma[r] * ce(row, a[r]) + (1 - gamma[r]) * ce(row, b[r])
void mixed_ce_loss_rows(const double* logits, int n, int k,
                        const int* labels_a, const int* labels_b,
                        const double* gamma, double* loss);

namespace serial {

void linear_forward(const double* x, int n, int in_dim,
                    const double* w, const double* b, int out_dim, double* y);
void linear_backward_input(const double* dy, int n, int out_dim,
                           const double* w, int in_dim, double* dx);
void linear_backward_params(const double* x, const double* dy, int n,
                            int in_dim, int out_dim, double* dw, double* db);
void relu_forward(const double* z, size_t count, double* a);
void relu_backward(const double* z, const double* da, size_t count, double* dz);
void softmax_rows(const double* logits, int n, int k, double* p);
void ce_loss_rows(const double* logits, int n, int k, const int* targets, double* loss);
void mixed_ce_loss_rows(const double* logits, int n, int k,
                        const int* labels_a, const int* labels_b,
                        const double* gamma, double* loss);

} // namespace serial

} // namespace item::kernels
