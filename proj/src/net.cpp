#include "item/net.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "item/errors.hpp"
#include "item/kernels.hpp"
#include "item/rng.hpp"

namespace item {

namespace {

Matrix linear(const Matrix& x, const DenseLayer& l) {
    Matrix y(x.rows, l.out_dim());
    kernels::linear_forward(x.data.data(), x.rows, x.cols, l.w.data.data(), l.b.data(),
                            l.out_dim(), y.data.data());
    return y;
}

void check_input(const MultiHeadNet& net, const Matrix& x) {
    if (x.cols != net.input_dim)
        throw ValidationError("x", "input width " + std::to_string(x.cols) + " does not match net input " +
                                       std::to_string(net.input_dim));
}

void check_head(const MultiHeadNet& net, int head_index) {
    if (head_index < 0 || head_index >= net.head_count())
        throw ValidationError("head_index", "head index out of range");
}

} // namespace

size_t MultiHeadNet::parameter_count() const {
    size_t n = 0;
    for (const auto& l : trunk) n += l.w.size() + l.b.size();
    for (const auto& l : heads) n += l.w.size() + l.b.size();
    return n;
}

size_t MultiHeadNet::head_parameter_count() const {
    if (heads.empty()) return 0;
    return heads[0].w.size() + heads[0].b.size();
}

bool MultiHeadNet::all_finite() const {
    auto ok = [](const DenseLayer& l) {
        for (double v : l.w.data)
            if (!std::isfinite(v)) return false;
        for (double v : l.b)
            if (!std::isfinite(v)) return false;
        return true;
    };
    for (const auto& l : trunk)
        if (!ok(l)) return false;
    for (const auto& l : heads)
        if (!ok(l)) return false;
    return true;
}

MultiHeadNet make_net(int input_dim, const std::vector<int>& trunk_widths, int class_count,
                      int expert_count, uint64_t init_seed) {
    if (input_dim < 1) throw ValidationError("input_dim", "must be at least 1");
    if (class_count < 2) throw ValidationError("class_count", "need at least 2 classes");
    if (expert_count < 0) throw ValidationError("expert_count", "expert count must not be negative");
    for (int w : trunk_widths)
        if (w < 1) throw ValidationError("trunk_widths", "layer widths must be positive");

    RandomStream rng(init_seed);
    auto glorot = [&rng](int out, int in, bool relu) {
        DenseLayer l;
        l.w = Matrix(out, in);
        l.b.assign(static_cast<size_t>(out), 0.0);
        l.relu = relu;
        const double limit = std::sqrt(6.0 / (in + out));
        for (double& v : l.w.data) v = (2.0 * rng.uniform01() - 1.0) * limit;
        return l;
    };

    MultiHeadNet net;
    net.input_dim = input_dim;
    net.class_count = class_count;
    net.expert_count = expert_count;
    int prev = input_dim;
    for (int w : trunk_widths) {
        net.trunk.push_back(glorot(w, prev, true));
        prev = w;
    }
    for (int h = 0; h <= expert_count; ++h) net.heads.push_back(glorot(class_count, prev, false));
    return net;
}

Matrix trunk_output(const MultiHeadNet& net, const Matrix& x) {
    check_input(net, x);
    Matrix cur = x;
    for (const auto& l : net.trunk) {
        Matrix y = linear(cur, l);
        if (l.relu) kernels::relu_forward(y.data.data(), y.size(), y.data.data());
        cur = std::move(y);
    }
    return cur;
}

Matrix forward(const MultiHeadNet& net, const Matrix& x, int head_index) {
    check_head(net, head_index);
    const Matrix t = trunk_output(net, x);
    return linear(t, net.heads[static_cast<size_t>(head_index)]);
}

std::vector<Matrix> forward_all_heads(const MultiHeadNet& net, const Matrix& x) {
    const Matrix t = trunk_output(net, x);
    std::vector<Matrix> out;
    out.reserve(net.heads.size());
    for (const auto& h : net.heads) out.push_back(linear(t, h));
    return out;
}

Matrix ensemble_softmax(const MultiHeadNet& net, const Matrix& x) {
    const auto logits = forward_all_heads(net, x);
    Matrix mean(x.rows, net.class_count);
    Matrix p(x.rows, net.class_count);
    for (const auto& lg : logits) {
        kernels::softmax_rows(lg.data.data(), lg.rows, lg.cols, p.data.data());
        for (size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += p.data[i];
    }
    const double inv = 1.0 / static_cast<double>(logits.size());
    for (double& v : mean.data) v *= inv;
    return mean;
}

std::vector<int> ensemble_predict(const MultiHeadNet& net, const Matrix& x) {
    const Matrix p = ensemble_softmax(net, x);
    std::vector<int> pred(static_cast<size_t>(p.rows));
    for (int r = 0; r < p.rows; ++r) {
        const double* row = p.row(r);
        int best = 0;
        for (int j = 1; j < p.cols; ++j)
            if (row[j] > row[best]) best = j; // strict: ties keep the lowest index
        pred[static_cast<size_t>(r)] = best;
    }
    return pred;
}

double ce_loss(const std::vector<double>& logits, int target) {
    const int k = static_cast<int>(logits.size());
    if (target < 0 || target >= k) throw ValidationError("target", "class index out of range");
    double loss = 0.0;
    kernels::serial::ce_loss_rows(logits.data(), 1, k, &target, &loss);
    return loss;
}

double mix_ce_loss(const std::vector<double>& logits, const MixedTarget& target) {
    const int k = static_cast<int>(logits.size());
    if (target.label_a < 0 || target.label_a >= k)
        throw ValidationError("label_a", "class index out of range");
    if (target.label_b < 0 || target.label_b >= k)
        throw ValidationError("label_b", "class index out of range");
    if (!(target.gamma >= 0.0 && target.gamma <= 1.0))
        throw ValidationError("gamma", "mixup coefficient must lie in [0,1]");
    double loss = 0.0;
    kernels::serial::mixed_ce_loss_rows(logits.data(), 1, k, &target.label_a, &target.label_b,
                                        &target.gamma, &loss);
    return loss;
}

SgdOptimizer::SgdOptimizer(const MultiHeadNet& net, double lr_, double momentum_,
                           double weight_decay_, std::vector<int> milestones, double decay)
    : lr(lr_),
      momentum(momentum_),
      weight_decay(weight_decay_),
      lr_milestones(std::move(milestones)),
      lr_decay(decay) {
    if (!(lr >= 0.0)) throw ValidationError("lr", "learning rate must not be negative");
    for (const auto& l : net.trunk) trunk_vel.emplace_back(l);
    for (const auto& l : net.heads) head_vel.emplace_back(l);
}

double SgdOptimizer::current_lr() const {
    double mult = 1.0;
    for (int m : lr_milestones)
        if (epoch >= m) mult *= lr_decay;
    return lr * mult;
}

void SgdOptimizer::apply(DenseLayer& layer, LayerBuf& vel, const LayerBuf& grad) {
    if (vel.w.rows != layer.w.rows || vel.w.cols != layer.w.cols || vel.b.size() != layer.b.size())
        throw ValidationError("velocity", "buffer shape does not match layer");
    const double rate = current_lr();
    for (size_t i = 0; i < layer.w.data.size(); ++i) {
        const double g = grad.w.data[i] + weight_decay * layer.w.data[i];
        vel.w.data[i] = momentum * vel.w.data[i] + g;
        layer.w.data[i] -= rate * vel.w.data[i];
    }
    for (size_t i = 0; i < layer.b.size(); ++i) {
        const double g = grad.b[i] + weight_decay * layer.b[i];
        vel.b[i] = momentum * vel.b[i] + g;
        layer.b[i] -= rate * vel.b[i];
    }
}

double backward_step(MultiHeadNet& net, SgdOptimizer& opt, const Matrix& x,
                     const std::vector<MixedTarget>& targets, int head_index) {
    check_input(net, x);
    check_head(net, head_index);
    const int n = x.rows;
    if (static_cast<int>(targets.size()) != n)
        throw ValidationError("targets", "target count does not match batch rows");
    const int k = net.class_count;
    std::vector<int> la(static_cast<size_t>(n)), lb(static_cast<size_t>(n));
    std::vector<double> gm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const MixedTarget& t = targets[static_cast<size_t>(i)];
        if (t.label_a < 0 || t.label_a >= k) throw ValidationError("label_a", "class index out of range");
        if (t.label_b < 0 || t.label_b >= k) throw ValidationError("label_b", "class index out of range");
        if (!(t.gamma >= 0.0 && t.gamma <= 1.0))
            throw ValidationError("gamma", "mixup coefficient must lie in [0,1]");
        la[static_cast<size_t>(i)] = t.label_a;
        lb[static_cast<size_t>(i)] = t.label_b;
        gm[static_cast<size_t>(i)] = t.gamma;
    }

    // forward, keeping pre-activations for the relu backward
    const int depth = static_cast<int>(net.trunk.size());
    std::vector<Matrix> pre(static_cast<size_t>(depth));
    std::vector<Matrix> act(static_cast<size_t>(depth));
    const Matrix* cur = &x;
    for (int l = 0; l < depth; ++l) {
        pre[static_cast<size_t>(l)] = linear(*cur, net.trunk[static_cast<size_t>(l)]);
        act[static_cast<size_t>(l)] = pre[static_cast<size_t>(l)];
        if (net.trunk[static_cast<size_t>(l)].relu) {
            Matrix& a = act[static_cast<size_t>(l)];
            kernels::relu_forward(a.data.data(), a.size(), a.data.data());
        }
        cur = &act[static_cast<size_t>(l)];
    }
    const Matrix& tout = *cur;
    const DenseLayer& head = net.heads[static_cast<size_t>(head_index)];
    const Matrix logits = linear(tout, head);

    std::vector<double> row_loss(static_cast<size_t>(n));
    kernels::mixed_ce_loss_rows(logits.data.data(), n, k, la.data(), lb.data(), gm.data(),
                                row_loss.data());
    double loss = 0.0;
    for (double v : row_loss) loss += v;
    loss /= n;
    if (!std::isfinite(loss)) throw TrainingDiverged("non-finite batch loss");

    // d(mean loss)/d(logits) = (softmax - mixed one-hot) / n
    Matrix dlogits(n, k);
    kernels::softmax_rows(logits.data.data(), n, k, dlogits.data.data());
    const double invn = 1.0 / n;
    for (int r = 0; r < n; ++r) {
        double* dr = dlogits.row(r);
        for (int j = 0; j < k; ++j) dr[j] *= invn;
        dr[la[static_cast<size_t>(r)]] -= gm[static_cast<size_t>(r)] * invn;
        dr[lb[static_cast<size_t>(r)]] -= (1.0 - gm[static_cast<size_t>(r)]) * invn;
    }

    LayerBuf head_grad(head);
    kernels::linear_backward_params(tout.data.data(), dlogits.data.data(), n, head.in_dim(),
                                    head.out_dim(), head_grad.w.data.data(), head_grad.b.data());
    Matrix dcur(n, head.in_dim());
    kernels::linear_backward_input(dlogits.data.data(), n, head.out_dim(), head.w.data.data(),
                                   head.in_dim(), dcur.data.data());

    std::vector<LayerBuf> trunk_grads;
    trunk_grads.reserve(static_cast<size_t>(depth));
    for (int l = 0; l < depth; ++l)
        trunk_grads.emplace_back(net.trunk[static_cast<size_t>(l)]);
    for (int l = depth - 1; l >= 0; --l) {
        const DenseLayer& layer = net.trunk[static_cast<size_t>(l)];
        Matrix dz(n, layer.out_dim());
        if (layer.relu) {
            kernels::relu_backward(pre[static_cast<size_t>(l)].data.data(), dcur.data.data(),
                                   dz.size(), dz.data.data());
        } else {
            dz = dcur;
        }
        const Matrix& in = l == 0 ? x : act[static_cast<size_t>(l) - 1];
        LayerBuf& g = trunk_grads[static_cast<size_t>(l)];
        kernels::linear_backward_params(in.data.data(), dz.data.data(), n, layer.in_dim(),
                                        layer.out_dim(), g.w.data.data(), g.b.data());
        if (l > 0) {
            dcur = Matrix(n, layer.in_dim());
            kernels::linear_backward_input(dz.data.data(), n, layer.out_dim(), layer.w.data.data(),
                                           layer.in_dim(), dcur.data.data());
        }
    }

    for (int l = 0; l < depth; ++l)
        opt.apply(net.trunk[static_cast<size_t>(l)], opt.trunk_vel[static_cast<size_t>(l)],
                  trunk_grads[static_cast<size_t>(l)]);
    opt.apply(net.heads[static_cast<size_t>(head_index)],
              opt.head_vel[static_cast<size_t>(head_index)], head_grad);
    ++opt.steps;
    if (!net.all_finite()) throw TrainingDiverged("non-finite parameter after update");
    return loss;
}

double backward_step(MultiHeadNet& net, SgdOptimizer& opt, const Matrix& x,
                     const std::vector<int>& targets, int head_index) {
    std::vector<MixedTarget> mixed(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) mixed[i] = {targets[i], targets[i], 1.0};
    return backward_step(net, opt, x, mixed, head_index);
}

namespace {

constexpr char kMagic[8] = {'I', 'T', 'E', 'M', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kMaxDim = 1u << 20; // sanity bound on stored dimensions

void put_u32(std::string& s, uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<uint64_t>(v)); }

void put_layer(std::string& s, const DenseLayer& l) {
    put_u32(s, static_cast<uint32_t>(l.out_dim()));
    put_u32(s, static_cast<uint32_t>(l.in_dim()));
    put_u32(s, l.relu ? 1 : 0);
}

void put_buf(std::string& s, const Matrix& w, const std::vector<double>& b) {
    for (double v : w.data) put_f64(s, v);
    for (double v : b) put_f64(s, v);
}

struct ByteReader {
    const std::string& bytes;
    const std::string& path;
    size_t pos = 0;

    void need(size_t n) {
        if (pos + n > bytes.size()) throw ParseError(path, 0, "truncated checkpoint");
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes[pos + static_cast<size_t>(i)]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes[pos + static_cast<size_t>(i)]))
                 << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    uint32_t dim() {
        const uint32_t v = u32();
        if (v == 0 || v > kMaxDim) throw ParseError(path, 0, "implausible dimension in checkpoint");
        return v;
    }
    void read_buf(Matrix& w, std::vector<double>& b) {
        for (double& v : w.data) v = f64();
        for (double& v : b) v = f64();
    }
};

} // namespace

void save_checkpoint(const MultiHeadNet& net, const SgdOptimizer& opt, const std::string& path) {
    std::string s;
    s.append(kMagic, sizeof(kMagic));
    put_u32(s, kVersion);
    put_u32(s, static_cast<uint32_t>(net.input_dim));
    put_u32(s, static_cast<uint32_t>(net.class_count));
    put_u32(s, static_cast<uint32_t>(net.expert_count));
    put_u32(s, static_cast<uint32_t>(net.trunk.size()));
    for (const auto& l : net.trunk) put_layer(s, l);
    put_u32(s, static_cast<uint32_t>(net.heads.size()));
    for (const auto& l : net.heads) put_layer(s, l);
    for (const auto& l : net.trunk) put_buf(s, l.w, l.b);
    for (const auto& l : net.heads) put_buf(s, l.w, l.b);

    put_f64(s, opt.lr);
    put_f64(s, opt.momentum);
    put_f64(s, opt.weight_decay);
    put_f64(s, opt.lr_decay);
    put_u32(s, static_cast<uint32_t>(opt.lr_milestones.size()));
    for (int m : opt.lr_milestones) put_u32(s, static_cast<uint32_t>(m));
    put_u32(s, static_cast<uint32_t>(opt.epoch));
    put_u64(s, opt.steps);
    for (const auto& v : opt.trunk_vel) put_buf(s, v.w, v.b);
    for (const auto& v : opt.head_vel) put_buf(s, v.w, v.b);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open for writing");
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!f) throw ParseError(path, 0, "write failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ParseError(path, 0, "cannot open file");
    std::stringstream buf;
    buf << f.rdbuf();
    const std::string bytes = buf.str();

    ByteReader r{bytes, path};
    r.need(sizeof(kMagic));
    if (bytes.compare(0, sizeof(kMagic), kMagic, sizeof(kMagic)) != 0)
        throw ParseError(path, 0, "not a checkpoint file");
    r.pos = sizeof(kMagic);
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw ParseError(path, 0, "unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    MultiHeadNet& net = ck.net;
    net.input_dim = static_cast<int>(r.dim());
    net.class_count = static_cast<int>(r.dim());
    net.expert_count = static_cast<int>(r.dim());
    const uint32_t trunk_count = r.u32();
    if (trunk_count > 64) throw ParseError(path, 0, "implausible trunk depth");
    auto read_layer = [&r]() {
        DenseLayer l;
        const int out = static_cast<int>(r.dim());
        const int in = static_cast<int>(r.dim());
        l.w = Matrix(out, in);
        l.b.assign(static_cast<size_t>(out), 0.0);
        l.relu = r.u32() != 0;
        return l;
    };
    for (uint32_t i = 0; i < trunk_count; ++i) net.trunk.push_back(read_layer());
    const uint32_t head_count = r.u32();
    if (head_count != static_cast<uint32_t>(net.expert_count) + 1)
        throw ParseError(path, 0, "head count does not match expert count");
    for (uint32_t i = 0; i < head_count; ++i) net.heads.push_back(read_layer());
    for (auto& l : net.trunk) r.read_buf(l.w, l.b);
    for (auto& l : net.heads) r.read_buf(l.w, l.b);

    SgdOptimizer& opt = ck.opt;
    opt.lr = r.f64();
    opt.momentum = r.f64();
    opt.weight_decay = r.f64();
    opt.lr_decay = r.f64();
    const uint32_t n_miles = r.u32();
    if (n_miles > 4096) throw ParseError(path, 0, "implausible milestone count");
    for (uint32_t i = 0; i < n_miles; ++i)
        opt.lr_milestones.push_back(static_cast<int>(r.u32()));
    opt.epoch = static_cast<int>(r.u32());
    opt.steps = r.u64();
    for (const auto& l : net.trunk) opt.trunk_vel.emplace_back(l);
    for (const auto& l : net.heads) opt.head_vel.emplace_back(l);
    for (auto& v : opt.trunk_vel) r.read_buf(v.w, v.b);
    for (auto& v : opt.head_vel) r.read_buf(v.w, v.b);

    if (r.pos != bytes.size()) throw ParseError(path, 0, "trailing bytes after checkpoint payload");
    return ck;
}

} // namespace item
