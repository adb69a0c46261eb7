#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "item/matrix.hpp"

namespace item {

struct DenseLayer {
    Matrix w;              // out x in
    std::vector<double> b; // out
    bool relu = false;

    int in_dim() const { return w.cols; }
    int out_dim() const { return w.rows; }
};

// Weight/bias pair shaped like a DenseLayer; used for gradients and for
// optimizer velocity buffers.
struct LayerBuf {
    Matrix w;
    std::vector<double> b;

    LayerBuf() = default;
    explicit LayerBuf(const DenseLayer& like)
        : w(like.w.rows, like.w.cols), b(like.b.size(), 0.0) {}
};

// Shared relu trunk plus (m+1) interchangeable linear heads mapping the
// trunk width to class logits. heads[0..m] are deliberately symmetric:
// which one acts as the classifier on a given iteration is the caller's
// random draw, not a property of the network.
struct MultiHeadNet {
    std::vector<DenseLayer> trunk;
    std::vector<DenseLayer> heads; // size m+1, identity activation
    int input_dim = 0;
    int class_count = 0;
    int expert_count = 0; // m

    int head_count() const { return static_cast<int>(heads.size()); }
    int trunk_out_dim() const { return trunk.empty() ? input_dim : trunk.back().out_dim(); }
    size_t parameter_count() const;
    size_t head_parameter_count() const; // parameters of ONE head
    bool all_finite() const;
};

// Glorot-uniform weights, zero biases. trunk_widths lists the hidden layer
// widths after the input (may be empty for a linear model).
MultiHeadNet make_net(int input_dim, const std::vector<int>& trunk_widths, int class_count,
                      int expert_count, uint64_t init_seed);

// Activations of the final trunk layer for a batch (the features all heads
// share). Equals x itself when the trunk is empty.
Matrix trunk_output(const MultiHeadNet& net, const Matrix& x);

// Logits under one head, n x K.
Matrix forward(const MultiHeadNet& net, const Matrix& x, int head_index);

// Logits under every head from a single trunk pass.
std::vector<Matrix> forward_all_heads(const MultiHeadNet& net, const Matrix& x);

// Head-averaged softmax (n x K) and its per-row argmax with ties broken by
// the lowest class index.
Matrix ensemble_softmax(const MultiHeadNet& net, const Matrix& x);
std::vector<int> ensemble_predict(const MultiHeadNet& net, const Matrix& x);

// MixUp target: loss is gamma * CE(label_a) + (1-gamma) * CE(label_b).
struct MixedTarget {
    int label_a = 0;
    int label_b = 0;
    double gamma = 1.0;
};

double ce_loss(const std::vector<double>& logits, int target);
double mix_ce_loss(const std::vector<double>& logits, const MixedTarget& target);

// SGD with momentum and decoupled-from-nothing weight decay folded into the
// gradient (g = grad + wd*p; v = mu*v + g; p -= lr*v), one velocity slot per
// layer. The learning rate is lr * decay^(milestones passed).
struct SgdOptimizer {
    double lr = 0.01;
    double momentum = 0.0;
    double weight_decay = 0.0;
    std::vector<int> lr_milestones; // epochs at which the rate steps down
    double lr_decay = 0.1;

    int epoch = 0;
    uint64_t steps = 0;
    std::vector<LayerBuf> trunk_vel;
    std::vector<LayerBuf> head_vel;

    SgdOptimizer() = default;
    SgdOptimizer(const MultiHeadNet& net, double lr_, double momentum_, double weight_decay_,
                 std::vector<int> milestones, double decay);

    double current_lr() const;
    void apply(DenseLayer& layer, LayerBuf& vel, const LayerBuf& grad);
};

// One SGD step on the mean mixed-CE loss of the batch. Gradients flow
// through the trunk and through heads[head_index] only; every other head's
// parameters and velocities are untouched. Returns the batch loss. Throws
// TrainingDiverged if the loss or any updated parameter is non-finite.
double backward_step(MultiHeadNet& net, SgdOptimizer& opt, const Matrix& x,
                     const std::vector<MixedTarget>& targets, int head_index);

// Plain-CE convenience wrapper (label_b = label_a, gamma = 1).
double backward_step(MultiHeadNet& net, SgdOptimizer& opt, const Matrix& x,
                     const std::vector<int>& targets, int head_index);

struct Checkpoint {
    MultiHeadNet net;
    SgdOptimizer opt;
};

// Binary format: magic + version header, little-endian integers, IEEE
// doubles via their bit pattern. Round-trips bit-exactly.
void save_checkpoint(const MultiHeadNet& net, const SgdOptimizer& opt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace item
