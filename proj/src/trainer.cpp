#include "item/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "item/errors.hpp"
#include "item/log.hpp"
#include "item/sampling.hpp"
#include "item/selection.hpp"

namespace item {

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<int>& idx) {
    Matrix out(static_cast<int>(idx.size()), src.cols);
    for (size_t r = 0; r < idx.size(); ++r) {
        const double* s = src.row(idx[r]);
        std::copy(s, s + src.cols, out.row(static_cast<int>(r)));
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (size_t r = 0; r < idx.size(); ++r) out[r] = labels[static_cast<size_t>(idx[r])];
    return out;
}

long count_selected(const std::vector<uint8_t>& flags) {
    long c = 0;
    for (uint8_t f : flags) c += f;
    return c;
}

} // namespace

EvalResult evaluate(const MultiHeadNet& net, const Matrix& features,
                    const std::vector<int>& labels, int class_count) {
    if (static_cast<int>(labels.size()) != features.rows)
        throw ValidationError("labels", "label count does not match feature rows");
    const auto pred = ensemble_predict(net, features);
    std::vector<long> correct(static_cast<size_t>(class_count), 0);
    std::vector<long> total(static_cast<size_t>(class_count), 0);
    long hits = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        const size_t c = static_cast<size_t>(labels[i]);
        ++total[c];
        if (pred[i] == labels[i]) {
            ++correct[c];
            ++hits;
        }
    }
    EvalResult r;
    r.accuracy = labels.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(labels.size());
    r.per_class.assign(static_cast<size_t>(class_count), 0.0);
    for (int c = 0; c < class_count; ++c) {
        const size_t k = static_cast<size_t>(c);
        if (total[k] > 0) r.per_class[k] = static_cast<double>(correct[k]) / static_cast<double>(total[k]);
    }
    return r;
}

std::vector<long> warmup(MultiHeadNet& net, SgdOptimizer& opt, const TrainView& view,
                         int warmup_epochs, int batch_size, int first_epoch,
                         RandomStream& head_rng, RandomStream& shuffle_rng,
                         std::vector<std::string>* events) {
    std::vector<long> tally(static_cast<size_t>(net.head_count()), 0);
    const int n = view.size();
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (int t = 0; t < warmup_epochs; ++t) {
        opt.epoch = first_epoch + t;
        const int h = static_cast<int>(head_rng.uniform_below(static_cast<uint64_t>(net.head_count())));
        ++tally[static_cast<size_t>(h)];
        if (events)
            events->push_back("warmup " + std::to_string(t) + " head=" + std::to_string(h));
        shuffle_rng.shuffle(order);
        for (int start = 0; start < n; start += batch_size) {
            const int end = std::min(n, start + batch_size);
            const std::vector<int> idx(order.begin() + start, order.begin() + end);
            backward_step(net, opt, gather_rows(view.features, idx),
                          gather_labels(view.noisy_labels, idx), h);
        }
    }
    return tally;
}

RunResult run_training(const RunConfig& config) {
    config.validate();
    RunResult result;

    // ---- data ----
    BlobSpec blob;
    blob.class_count = config.blob_classes;
    blob.sizes = config.blob_sizes;
    blob.dim = config.blob_dim;
    blob.separation = config.blob_separation;
    blob.stddev = config.blob_stddev;
    blob.seed = split_seed(config.seed, "data");

    if (config.source == DataSource::blob) {
        result.train_set = generate_blobs(blob);
        if (config.noise_ratio > 0.0) {
            NoiseSpec noise;
            noise.kind = config.noise_kind;
            noise.ratio = config.noise_ratio;
            noise.seed = split_seed(config.seed, "noise");
            result.train_set = inject_noise(result.train_set, noise);
        }
    } else {
        result.train_set = load_csv(config.csv_path, config.blob_classes);
        if (result.train_set.dim() != config.blob_dim)
            throw ConfigError("data.dim", "csv has " + std::to_string(result.train_set.dim()) +
                                              " features but config declares " +
                                              std::to_string(config.blob_dim));
    }
    // held-out test set: same centers, fresh points, balanced classes
    BlobSpec test_spec = blob;
    test_spec.sizes.assign(static_cast<size_t>(blob.class_count), config.test_per_class);
    result.test_set = sample_blobs(test_spec, place_centers(test_spec),
                                   split_seed(blob.seed, "blob.points.test"));
    result.train_dataset_hash = dataset_hash(result.train_set);

    const LabeledDataset& train = result.train_set;
    const TrainView view{train.features, train.noisy_labels, train.class_count};
    const int n = train.size();
    const int k = train.class_count;
    const int b = config.batch_size;

    // ---- model ----
    const int experts = config.mode == Mode::baseline_single_head ? 0 : config.experts;
    result.net = make_net(train.dim(), config.trunk_widths, k, experts,
                          split_seed(config.seed, "init"));
    MultiHeadNet& net = result.net;
    result.opt = SgdOptimizer(net, config.lr, config.momentum, config.weight_decay,
                              config.lr_milestones, config.lr_decay);
    SgdOptimizer& opt = result.opt;
    const uint64_t heads = static_cast<uint64_t>(net.head_count());

    // ---- named streams off the master seed ----
    RandomStream head_rng(split_seed(config.seed, "head_draw"));
    RandomStream v_rng(split_seed(config.seed, "sampler_v"));
    RandomStream vt_rng(split_seed(config.seed, "sampler_vtilde"));
    RandomStream mix_rng(split_seed(config.seed, "mixup"));
    RandomStream warm_rng(split_seed(config.seed, "warmup_shuffle"));
    RandomStream ssl_rng(split_seed(config.seed, "ssl_draw"));
    RandomStream jitter_rng(split_seed(config.seed, "ssl_jitter"));

    MetricsLog& log = result.log;
    log.class_count = k;
    log.head_count = net.head_count();
    result.head_tally.assign(static_cast<size_t>(net.head_count()), 0);

    MixupOptions mix_opts;
    mix_opts.alpha = config.alpha;
    mix_opts.per_batch = config.mixup_per_batch;
    mix_opts.forced_gamma = config.force_gamma;

    log::info("run mode=" + mode_name(config.mode) + " seed=" + std::to_string(config.seed) +
              " n=" + std::to_string(n) + " classes=" + std::to_string(k));

    int cur_epoch = 0;
    int cur_iter = -1;
    try {
        const auto wt = warmup(net, opt, view, config.warmup_epochs, b, 0, head_rng, warm_rng,
                               &log.events);
        for (size_t h = 0; h < wt.size(); ++h) result.head_tally[h] += wt[h];

        SelectionState state(n, config.fluctuation_window);
        std::vector<int> all_pool(static_cast<size_t>(n));
        std::iota(all_pool.begin(), all_pool.end(), 0);

        for (int e = config.warmup_epochs; e < config.epochs; ++e) {
            cur_epoch = e;
            cur_iter = -1;
            opt.epoch = e;
            EpochMetrics em;
            em.epoch = e;
            em.head_draws.assign(heads, 0);
            double loss_sum = 0.0;
            long loss_steps = 0;

            // -- selection (Criterion over the expert heads, once per epoch) --
            std::vector<uint8_t> selected;
            bool fallback = false;
            if (config.mode == Mode::baseline_ce) {
                selected.assign(static_cast<size_t>(n), 1);
                log.events.push_back("epoch " + std::to_string(e) +
                                     " select skipped count=" + std::to_string(n));
            } else {
                int excluded = -1;
                if (config.mode != Mode::baseline_single_head)
                    excluded = static_cast<int>(head_rng.uniform_below(heads));
                const auto losses =
                    compute_expert_losses(net, view.features, view.noisy_labels, excluded);
                switch (config.criterion) {
                    case Criterion::small_loss: {
                        const double kf = keep_fraction_schedule(
                            e - config.warmup_epochs, config.effective_noise_rate(),
                            config.ramp_epochs);
                        selected = select_small_loss(losses, kf);
                        break;
                    }
                    case Criterion::gmm: {
                        const Gmm2 g = fit_gmm2(losses);
                        selected = select_gmm(losses, g, config.gmm_threshold);
                        break;
                    }
                    case Criterion::fluctuation: {
                        update_history(state, net, view.features);
                        bool short_history = false;
                        selected = select_fluctuation(state, view.noisy_labels, &short_history);
                        fallback = short_history;
                        break;
                    }
                }
                long count = count_selected(selected);
                if (count == 0) {
                    // nothing survived the criterion; train this epoch like warmup
                    std::fill(selected.begin(), selected.end(), uint8_t{1});
                    count = n;
                    fallback = true;
                }
                state.selected = selected;
                state.expert_loss = losses;
                log.events.push_back(
                    "epoch " + std::to_string(e) + " select criterion=" +
                    criterion_name(config.criterion) + " exclude=" +
                    (excluded >= 0 ? std::to_string(excluded) : std::string("none")) +
                    " count=" + std::to_string(count) + (fallback ? " fallback" : ""));
            }
            em.selection_fallback = fallback;

            std::vector<int> selected_pool;
            std::vector<int> unselected_pool;
            for (int i = 0; i < n; ++i) {
                if (selected[static_cast<size_t>(i)]) selected_pool.push_back(i);
                else unselected_pool.push_back(i);
            }
            const long sel_count = static_cast<long>(selected_pool.size());

            // -- per-class weights and the dual samplers (Eqs. 5-6) --
            std::vector<double> v_weights = class_weights(selected, view.noisy_labels, k);
            std::vector<double> s_raw(static_cast<size_t>(k), 0.0);
            std::vector<double> vtilde(static_cast<size_t>(k), 0.0);
            DrawWeights dw_v, dw_t;
            const bool weighted_mode = config.mode == Mode::item || config.mode == Mode::item_ssl ||
                                       config.mode == Mode::no_mixup;
            if (weighted_mode) {
                const ClassWeights cw = reverse_weights(v_weights, config.beta);
                s_raw = cw.reversed_raw;
                vtilde = config.force_vtilde_equal_v ? v_weights : cw.reversed;
                dw_v = per_sample_draw_weights(selected, view.noisy_labels, v_weights);
                dw_t = per_sample_draw_weights(selected, view.noisy_labels, vtilde);
                log.events.push_back("epoch " + std::to_string(e) + " weights");
            }

            const bool ssl_active = config.mode == Mode::item_ssl && !unselected_pool.empty();
            if (config.mode == Mode::item_ssl && unselected_pool.empty())
                log.events.push_back("epoch " + std::to_string(e) + " ssl_fallback");

            // -- training iterations --
            // every mode gets the same step budget per epoch; the samplers draw
            // with replacement, so epoch length is not tied to the selected count
            const int iters = static_cast<int>((static_cast<long>(n) + b - 1) / b);
            for (int it = 0; it < iters; ++it) {
                cur_iter = it;
                const int fc = static_cast<int>(head_rng.uniform_below(heads));
                ++em.head_draws[static_cast<size_t>(fc)];
                ++result.head_tally[static_cast<size_t>(fc)];

                switch (config.mode) {
                    case Mode::item:
                    case Mode::item_ssl: {
                        const auto ia = weighted_batch(v_rng, dw_v.weights, b);
                        const auto ib = weighted_batch(vt_rng, dw_t.weights, b);
                        const Matrix xa = gather_rows(view.features, ia);
                        const auto ya = gather_labels(view.noisy_labels, ia);
                        const Matrix xb = gather_rows(view.features, ib);
                        const auto yb = gather_labels(view.noisy_labels, ib);
                        bool stepped = false;
                        if (ssl_active) {
                            // 2b unlabeled rows, pseudo-labeled by the ensemble
                            const auto iu = uniform_batch(ssl_rng, unselected_pool, 2 * b);
                            const Matrix xu = gather_rows(view.features, iu);
                            const Matrix p = ensemble_softmax(net, xu);
                            std::vector<int> kept;
                            std::vector<int> pseudo(static_cast<size_t>(p.rows));
                            for (int r = 0; r < p.rows; ++r) {
                                const double* row = p.row(r);
                                int best = 0;
                                for (int j = 1; j < p.cols; ++j)
                                    if (row[j] > row[best]) best = j;
                                pseudo[static_cast<size_t>(r)] = best;
                                if (row[best] >= config.ssl_threshold)
                                    kept.push_back(r);
                            }
                            if (!kept.empty()) {
                                const int twob = 2 * b;
                                Matrix xl(twob, view.features.cols);
                                std::vector<int> yl(static_cast<size_t>(twob));
                                for (int r = 0; r < b; ++r) {
                                    std::copy(xa.row(r), xa.row(r) + xa.cols, xl.row(r));
                                    std::copy(xb.row(r), xb.row(r) + xb.cols, xl.row(b + r));
                                    yl[static_cast<size_t>(r)] = ya[static_cast<size_t>(r)];
                                    yl[static_cast<size_t>(b + r)] = yb[static_cast<size_t>(r)];
                                }
                                Matrix xu2(twob, view.features.cols);
                                std::vector<int> yu2(static_cast<size_t>(twob));
                                for (int r = 0; r < twob; ++r) {
                                    const int src = kept[static_cast<size_t>(r) % kept.size()];
                                    std::copy(xu.row(src), xu.row(src) + xu.cols, xu2.row(r));
                                    if (config.ssl_jitter > 0.0) {
                                        double* dst = xu2.row(r);
                                        for (int j = 0; j < xu2.cols; ++j)
                                            dst[j] += config.ssl_jitter * jitter_rng.normal();
                                    }
                                    yu2[static_cast<size_t>(r)] = pseudo[static_cast<size_t>(src)];
                                }
                                const MixupBatch mb = mixup_batch(xl, yl, xu2, yu2, mix_opts, mix_rng);
                                loss_sum += backward_step(net, opt, mb.rows, mb.targets, fc);
                                ++loss_steps;
                                stepped = true;
                            }
                        }
                        if (!stepped) {
                            const MixupBatch mb = mixup_batch(xa, ya, xb, yb, mix_opts, mix_rng);
                            loss_sum += backward_step(net, opt, mb.rows, mb.targets, fc);
                            ++loss_steps;
                        }
                        break;
                    }
                    case Mode::no_mixed_sampling: {
                        // uniform draws from the selected set, mixup kept
                        const auto ia = uniform_batch(v_rng, selected_pool, b);
                        const auto ib = uniform_batch(vt_rng, selected_pool, b);
                        const MixupBatch mb = mixup_batch(
                            gather_rows(view.features, ia), gather_labels(view.noisy_labels, ia),
                            gather_rows(view.features, ib), gather_labels(view.noisy_labels, ib),
                            mix_opts, mix_rng);
                        loss_sum += backward_step(net, opt, mb.rows, mb.targets, fc);
                        ++loss_steps;
                        break;
                    }
                    case Mode::no_mixup: {
                        // both weighted batches, trained on directly, two steps
                        const auto ia = weighted_batch(v_rng, dw_v.weights, b);
                        const auto ib = weighted_batch(vt_rng, dw_t.weights, b);
                        loss_sum += backward_step(net, opt, gather_rows(view.features, ia),
                                                  gather_labels(view.noisy_labels, ia), fc);
                        loss_sum += backward_step(net, opt, gather_rows(view.features, ib),
                                                  gather_labels(view.noisy_labels, ib), fc);
                        loss_steps += 2;
                        break;
                    }
                    case Mode::baseline_single_head:
                    case Mode::baseline_ce: {
                        const auto& pool =
                            config.mode == Mode::baseline_ce ? all_pool : selected_pool;
                        const auto ia = uniform_batch(v_rng, pool, b);
                        loss_sum += backward_step(net, opt, gather_rows(view.features, ia),
                                                  gather_labels(view.noisy_labels, ia), fc);
                        ++loss_steps;
                        break;
                    }
                }
            }
            cur_iter = -1;
            log.events.push_back("epoch " + std::to_string(e) +
                                 " train iterations=" + std::to_string(iters));

            // -- epoch diagnostics (ground truth is consulted only here) --
            em.train_loss = loss_steps > 0 ? loss_sum / static_cast<double>(loss_steps) : 0.0;
            const EvalResult ev =
                evaluate(net, result.test_set.features, result.test_set.true_labels, k);
            em.test_accuracy = ev.accuracy;
            em.class_test_accuracy = ev.per_class;
            const ClassSelectionMetrics sm =
                selection_metrics(selected, train.noisy_labels, train.true_labels, k);
            em.precision = sm.precision;
            em.recall = sm.recall;
            em.fscore = sm.fscore;
            em.macro_f = sm.macro_f;
            double psum = 0.0, rsum = 0.0;
            for (int c = 0; c < k; ++c) {
                psum += sm.precision[static_cast<size_t>(c)];
                rsum += sm.recall[static_cast<size_t>(c)];
            }
            em.macro_precision = psum / k;
            em.macro_recall = rsum / k;
            em.selected_count = count_selected(selected);
            em.class_selected.assign(static_cast<size_t>(k), 0);
            for (int i = 0; i < n; ++i)
                if (selected[static_cast<size_t>(i)])
                    ++em.class_selected[static_cast<size_t>(train.noisy_labels[static_cast<size_t>(i)])];
            const ImbalanceResult ir = imbalance_ratio(selected, train.noisy_labels, k);
            em.imbalance = ir.ratio;
            em.imbalance_degenerate = ir.degenerate;
            em.v = v_weights;
            em.s = s_raw;
            em.vtilde = vtilde;
            log.epochs.push_back(em);
            log::debug("epoch " + std::to_string(e) + " loss=" + std::to_string(em.train_loss) +
                       " acc=" + std::to_string(em.test_accuracy) +
                       " selected=" + std::to_string(em.selected_count));
        }
    } catch (const TrainingDiverged& ex) {
        throw TrainingDiverged("epoch " + std::to_string(cur_epoch) +
                               (cur_iter >= 0 ? " iteration " + std::to_string(cur_iter) : "") +
                               ": " + ex.what());
    }

    if (!log.epochs.empty())
        log::info("final test accuracy " + std::to_string(log.epochs.back().test_accuracy));
    return result;
}

} // namespace item
