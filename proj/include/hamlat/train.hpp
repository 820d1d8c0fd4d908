// Adam optimization with the piecewise learning-rate schedule, per-model
// loss graphs, the two-phase sparse link-learning protocol, and checkpoints.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hamlat/autodiff.hpp"
#include "hamlat/dataset.hpp"
#include "hamlat/metrics.hpp"
#include "hamlat/models.hpp"

namespace hamlat {

namespace detail {
/// Training frees and reallocates large tape buffers every batch; keep the
/// pages in the heap instead of handing them back to the OS each time.
inline void tune_allocator_once() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
        mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
        return true;
    }();
    (void)done;
#endif
}
}  // namespace detail

struct TrainConfig {
    int epochs = 10000;
    int batch_size = 256;
    std::array<double, 3> rates{1e-3, 1e-4, 1e-5};
    std::array<int, 2> boundaries{3500, 5000};  // half-open segments
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::uint64_t seed = 0;
    // two-phase SGHN knobs
    double lambda_l1 = 1e-4;
    double tau = 0.1;
    int phase1_epochs = -1;  // < 0: 60% of epochs

    void validate() const {
        if (epochs < 1 || batch_size < 1) throw std::invalid_argument("TrainConfig: bad epochs/batch");
        if (!(rates[0] > 0.0) || rates[0] < rates[1] || rates[1] < rates[2] || !(rates[2] > 0.0))
            throw std::invalid_argument("TrainConfig: rates must be positive and non-increasing");
    }
};

/// Piecewise-constant rate; a boundary epoch belongs to the later segment.
inline double lr_at(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) throw std::invalid_argument("lr_at: epoch out of range");
    if (epoch < cfg.boundaries[0]) return cfg.rates[0];
    if (epoch < cfg.boundaries[1]) return cfg.rates[1];
    return cfg.rates[2];
}

struct AdamState {
    std::vector<Vec> m, v;
    long step = 0;

    static AdamState init(std::span<Tensor* const> params) {
        AdamState s;
        for (const Tensor* p : params) {
            s.m.emplace_back(p->size(), 0.0);
            s.v.emplace_back(p->size(), 0.0);
        }
        return s;
    }
};

/// Standard Adam update with bias correction.
inline void adam_step(std::span<Tensor* const> params, const std::vector<Vec>& grads,
                      AdamState& state, double rate, const TrainConfig& cfg) {
    if (grads.size() != params.size()) throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Vec& g = grads[k];
        if (g.size() != p.size()) throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < g.size(); ++i) {
            state.m[k][i] = cfg.beta1 * state.m[k][i] + (1.0 - cfg.beta1) * g[i];
            state.v[k][i] = cfg.beta2 * state.v[k][i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = state.m[k][i] / bc1;
            const double vhat = state.v[k][i] / bc2;
            p.data[i] -= rate * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

namespace detail {

struct BatchValues {
    ad::Value Q, P, Tq, Tp;  // each dim x batch
};

inline BatchValues lift_batch(ad::Tape& t, const Dataset& ds, std::span<const std::size_t> idx) {
    const int d = ds.dim();
    const int bsz = static_cast<int>(idx.size());
    Vec q(static_cast<std::size_t>(d) * bsz), p(q.size()), tq(q.size()), tp(q.size());
    for (int b = 0; b < bsz; ++b) {
        const PhaseState& s = ds.inputs[idx[static_cast<std::size_t>(b)]];
        const auto& [dq, dp] = ds.targets[idx[static_cast<std::size_t>(b)]];
        for (int i = 0; i < d; ++i) {
            q[static_cast<std::size_t>(i) * bsz + b] = s.q[i];
            p[static_cast<std::size_t>(i) * bsz + b] = s.p[i];
            tq[static_cast<std::size_t>(i) * bsz + b] = dq[i];
            tp[static_cast<std::size_t>(i) * bsz + b] = dp[i];
        }
    }
    return {t.leaf(d, bsz, std::move(q)), t.leaf(d, bsz, std::move(p)),
            t.leaf(d, bsz, std::move(tq)), t.leaf(d, bsz, std::move(tp))};
}

inline ad::Value mse_of(const ad::Value& pred_dq, const ad::Value& pred_dp, const ad::Value& tq,
                        const ad::Value& tp) {
    const ad::Value rq = ad::sub(pred_dq, tq);
    const ad::Value rp = ad::sub(pred_dp, tp);
    const double n = static_cast<double>(rq.size() + rp.size());
    return ad::scale(ad::add(ad::sum(ad::square(rq)), ad::sum(ad::square(rp))), 1.0 / n);
}

}  // namespace detail

/// A model wired for the generic training loop: parameter tensors plus a
/// builder that lays the batch loss onto a tape.
struct Trainable {
    ModelKind kind = ModelKind::Mlp;
    std::vector<Tensor*> params;
    std::function<ad::Value(ad::Tape&, std::span<const ad::Value>, const detail::BatchValues&)>
        build_loss;
    // adjust raw gradients in place (alpha L1 subgradient and mask pinning)
    std::function<void(std::vector<Vec>&, double lambda_l1)> postprocess_grads;
};

inline Trainable make_trainable(MlpModel& m) {
    Trainable t;
    t.kind = ModelKind::Mlp;
    t.params = m.parameters();
    t.build_loss = [&m](ad::Tape&, std::span<const ad::Value> pv, const detail::BatchValues& b) {
        const ad::Value x = ad::concat_rows(b.Q, b.P);
        const ad::Value y = mlp_apply(m.net.cfg, pv, x);
        const int d = b.Q.rows();
        return detail::mse_of(ad::slice_rows(y, 0, d), ad::slice_rows(y, d, 2 * d), b.Tq, b.Tp);
    };
    return t;
}

inline Trainable make_trainable(HnnModel& m) {
    Trainable t;
    t.kind = ModelKind::Hnn;
    t.params = m.parameters();
    t.build_loss = [&m](ad::Tape&, std::span<const ad::Value> pv, const detail::BatchValues& b) {
        const ad::Value x = ad::concat_rows(b.Q, b.P);
        const ad::Value h_sum = ad::sum(mlp_apply(m.net.cfg, pv, x));
        const auto g = ad::grad_graph(h_sum, {b.Q, b.P});
        return detail::mse_of(g[1], ad::scale(g[0], -1.0), b.Tq, b.Tp);
    };
    return t;
}

inline Trainable make_trainable(SghnModel& m) {
    Trainable t;
    t.kind = ModelKind::Sghn;
    t.params = m.parameters();

    const auto edges = m.edges();
    auto idx_i = std::make_shared<std::vector<int>>();
    auto idx_j = std::make_shared<std::vector<int>>();
    auto idx_flat = std::make_shared<std::vector<int>>();
    for (const auto& [i, j] : edges) {
        idx_i->push_back(i);
        idx_j->push_back(j);
        idx_flat->push_back(i * m.dim + j);
    }

    t.build_loss = [&m, idx_i, idx_j, idx_flat](ad::Tape& tape, std::span<const ad::Value> pv,
                                                const detail::BatchValues& b) {
        const int d = b.Q.rows();
        const int bsz = b.Q.cols();
        const std::size_t nt = m.t_net.params.size();
        const std::size_t nu = m.u_net.params.size();
        const std::size_t nv = m.v_net.params.size();
        const auto tv = pv.subspan(0, nt);
        const auto uv = pv.subspan(nt, nu);
        const auto vv = pv.subspan(nt + nu, nv);
        const ad::Value alpha = pv[nt + nu + nv];

        const ad::Value kinetic =
            ad::sum(mlp_apply(m.t_net.cfg, tv, ad::reshape(b.P, 1, d * bsz)));
        const ad::Value onsite =
            ad::sum(mlp_apply(m.u_net.cfg, uv, ad::reshape(b.Q, 1, d * bsz)));

        ad::Value h = ad::add(kinetic, onsite);
        if (!idx_i->empty()) {
            const int e = static_cast<int>(idx_i->size());
            const ad::Value qi = ad::reshape(ad::gather_rows(b.Q, idx_i), 1, e * bsz);
            const ad::Value qj = ad::reshape(ad::gather_rows(b.Q, idx_j), 1, e * bsz);
            const ad::Value vin = ad::concat_rows(qi, qj);
            const ad::Value vout = mlp_apply(m.v_net.cfg, vv, vin);
            const ad::Value w = ad::reshape(
                ad::repeat_interleave(ad::gather_rows(ad::reshape(alpha, d * d, 1), idx_flat), bsz),
                1, e * bsz);
            h = ad::add(h, ad::sum(ad::mul(vout, w)));
        }
        (void)tape;
        const auto g = ad::grad_graph(h, {b.Q, b.P});
        return detail::mse_of(g[1], ad::scale(g[0], -1.0), b.Tq, b.Tp);
    };

    t.postprocess_grads = [&m](std::vector<Vec>& grads, double lambda_l1) {
        Vec& ga = grads.back();  // alpha is the last parameter tensor
        for (int i = 0; i < m.dim; ++i)
            for (int j = 0; j < m.dim; ++j) {
                const std::size_t k = static_cast<std::size_t>(i) * m.dim + j;
                if (i == j || !m.edge_mask[k]) {
                    ga[k] = 0.0;
                    continue;
                }
                if (lambda_l1 != 0.0) {
                    const double a = m.alpha.data[k];
                    ga[k] += lambda_l1 * (a > 0.0 ? 1.0 : a < 0.0 ? -1.0 : 0.0);
                }
            }
    };
    return t;
}

/// Data-fit MSE of a frozen model on selected samples, via the plain
/// evaluation path (no tape).
inline double dataset_loss(const PredictiveModel& model, const Dataset& ds,
                           std::span<const std::size_t> idx) {
    const Dynamics dyn = model.dynamics();
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t k : idx) {
        const auto [dq, dp] = dyn.field(ds.inputs[k]);
        const auto& [tq, tp] = ds.targets[k];
        for (std::size_t i = 0; i < dq.size(); ++i) {
            const double eq = dq[i] - tq[i];
            const double ep = dp[i] - tp[i];
            acc += eq * eq + ep * ep;
        }
        n += 2 * dq.size();
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

inline double dataset_loss(const PredictiveModel& model, const Dataset& ds) {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return dataset_loss(model, ds, idx);
}

struct TrainingAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minibatch Adam loop. Shuffling draws one permutation per epoch from a
/// dedicated stream of the run seed; epoch numbering (and the LR schedule)
/// starts at `start_epoch` so runs can resume.
inline std::vector<double> train(Trainable& t, const Dataset& ds, const TrainConfig& cfg,
                                 double lambda_l1 = 0.0, int start_epoch = 0,
                                 int epochs_to_run = -1) {
    cfg.validate();
    detail::tune_allocator_once();
    if (ds.size() == 0) throw std::invalid_argument("train: empty dataset");
    if (epochs_to_run < 0) epochs_to_run = cfg.epochs - start_epoch;
    AdamState adam = AdamState::init(t.params);
    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(epochs_to_run));

    std::vector<std::size_t> perm(ds.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng = Rng(cfg.seed).fork(0x5u).fork(static_cast<std::uint64_t>(start_epoch));

    ad::Tape tape;
    for (int ep = start_epoch; ep < start_epoch + epochs_to_run; ++ep) {
        // Fisher-Yates from the dedicated stream
        for (std::size_t i = perm.size() - 1; i > 0; --i) {
            const std::size_t j = shuffle_rng.next_u64() % (i + 1);
            std::swap(perm[i], perm[j]);
        }
        const double rate = lr_at(std::min(ep, cfg.epochs - 1), cfg);
        double epoch_loss = 0.0;
        std::size_t nbatches = 0;
        for (std::size_t off = 0; off < perm.size(); off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t bsz = std::min(static_cast<std::size_t>(cfg.batch_size), perm.size() - off);
            tape.clear();
            std::vector<ad::Value> params;
            params.reserve(t.params.size());
            for (const Tensor* p : t.params) params.push_back(tape.leaf(p->rows, p->cols, p->data));
            const auto batch = detail::lift_batch(tape, ds, std::span(perm).subspan(off, bsz));
            const ad::Value loss = t.build_loss(tape, params, batch);
            const double lv = loss.scalar();
            if (!std::isfinite(lv))
                throw TrainingAborted("non-finite loss at epoch " + std::to_string(ep) + ", batch " +
                                      std::to_string(nbatches));
            epoch_loss += lv;
            ++nbatches;
            auto grads = ad::grad(loss, std::span<const ad::Value>(params));
            if (t.postprocess_grads) t.postprocess_grads(grads, lambda_l1);
            adam_step(t.params, grads, adam, rate, cfg);
        }
        history.push_back(epoch_loss / static_cast<double>(nbatches));
    }
    return history;
}

struct TwoPhaseResult {
    SghnModel model;
    AlphaMatrix alpha;
    LinkGraph links;
    std::vector<double> loss_history;  // phase 1 then phase 2
};

/// Phase 1 trains the fully connected model with an L1 penalty on alpha,
/// the link graph is read off |alpha|, and phase 2 fine-tunes with the
/// pruned support (no penalty).
inline TwoPhaseResult train_sghn_two_phase(const Dataset& ds, const TrainConfig& cfg,
                                           const SghnConfig& scfg,
                                           std::optional<std::uint64_t> model_seed = std::nullopt) {
    cfg.validate();
    TwoPhaseResult r;
    r.model = SghnModel::init(
        ds.dim(), scfg, model_seed ? *model_seed : Rng(cfg.seed).fork(0xA11CEu).next_u64());

    const int phase1 = cfg.phase1_epochs >= 0
                           ? std::min(cfg.phase1_epochs, cfg.epochs)
                           : static_cast<int>(std::lround(0.6 * cfg.epochs));
    {
        Trainable t = make_trainable(r.model);
        r.loss_history = train(t, ds, cfg, cfg.lambda_l1, 0, phase1);
    }
    r.links = extract_links(extract_alpha(r.model), cfg.tau);
    if (r.links.edges.empty())
        throw std::runtime_error("train_sghn_two_phase: extracted link graph is empty "
                                 "(lambda_l1 / tau misconfiguration)");

    std::fill(r.model.edge_mask.begin(), r.model.edge_mask.end(), 0);
    for (const auto& [i, j] : r.links.edges) {
        r.model.edge_mask[static_cast<std::size_t>(i) * r.model.dim + j] = 1;
        r.model.edge_mask[static_cast<std::size_t>(j) * r.model.dim + i] = 1;
    }
    r.model.apply_mask();
    {
        Trainable t = make_trainable(r.model);
        auto h2 = train(t, ds, cfg, 0.0, phase1, cfg.epochs - phase1);
        r.loss_history.insert(r.loss_history.end(), h2.begin(), h2.end());
    }
    r.alpha = extract_alpha(r.model);
    r.links = direct_links(r.alpha, r.links);
    return r;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline void save_checkpoint(const PredictiveModel& model, const std::filesystem::path& path,
                            int epochs_trained = 0) {
    io::json manifest;
    manifest["type"] = "checkpoint";
    manifest["version"] = 1;
    manifest["kind"] = to_string(model.kind);
    manifest["epochs_trained"] = epochs_trained;

    std::vector<const Tensor*> tensors;
    io::json cfgj;
    auto mlp_cfg_json = [](const MlpConfig& c) {
        return io::json{{"depth", c.depth}, {"width", c.width}, {"act", to_string(c.act)}};
    };
    switch (model.kind) {
        case ModelKind::Mlp:
            cfgj = mlp_cfg_json(model.mlp.net.cfg);
            cfgj["dim"] = model.mlp.dim;
            for (const Tensor& t : model.mlp.net.params) tensors.push_back(&t);
            break;
        case ModelKind::Hnn:
            cfgj = mlp_cfg_json(model.hnn.net.cfg);
            cfgj["dim"] = model.hnn.dim;
            for (const Tensor& t : model.hnn.net.params) tensors.push_back(&t);
            break;
        case ModelKind::Sghn: {
            cfgj["dim"] = model.sghn.dim;
            cfgj["depth"] = model.sghn.cfg.depth;
            cfgj["width"] = model.sghn.cfg.width;
            cfgj["act"] = to_string(model.sghn.cfg.act);
            const SghnModel& m = model.sghn;
            for (const Tensor& t : m.t_net.params) tensors.push_back(&t);
            for (const Tensor& t : m.u_net.params) tensors.push_back(&t);
            for (const Tensor& t : m.v_net.params) tensors.push_back(&t);
            tensors.push_back(&m.alpha);
            std::string mask;
            mask.reserve(m.edge_mask.size());
            for (std::uint8_t b : m.edge_mask) mask.push_back(b ? '1' : '0');
            cfgj["edge_mask"] = mask;
            break;
        }
    }
    manifest["config"] = cfgj;

    io::json tlist = io::json::array();
    Vec payload;
    for (const Tensor* t : tensors) {
        tlist.push_back({{"name", t->name}, {"rows", t->rows}, {"cols", t->cols}});
        payload.insert(payload.end(), t->data.begin(), t->data.end());
    }
    manifest["tensors"] = tlist;
    io::write_container(path, manifest, payload);
}

inline PredictiveModel load_checkpoint(const std::filesystem::path& path, int* epochs_trained = nullptr) {
    const io::Container c = io::read_container(path);
    const io::json& m = c.manifest;
    if (m.value("type", "") != "checkpoint") throw io::CorruptFileError("not a checkpoint file");
    const ModelKind kind = model_kind_from_string(m.at("kind").get<std::string>());
    const io::json& cfgj = m.at("config");
    const int dim = cfgj.at("dim").get<int>();
    const int depth = cfgj.at("depth").get<int>();
    const int width = cfgj.at("width").get<int>();
    const Activation act = activation_from_string(cfgj.at("act").get<std::string>());
    if (epochs_trained) *epochs_trained = m.value("epochs_trained", 0);

    PredictiveModel model;
    model.kind = kind;
    std::vector<Tensor*> tensors;
    switch (kind) {
        case ModelKind::Mlp:
            model.mlp = MlpModel::init(dim, depth, width, act, 0);
            tensors = model.mlp.parameters();
            break;
        case ModelKind::Hnn:
            model.hnn = HnnModel::init(dim, depth, width, act, 0);
            tensors = model.hnn.parameters();
            break;
        case ModelKind::Sghn: {
            model.sghn = SghnModel::init(dim, {depth, width, act}, 0);
            const std::string mask = cfgj.at("edge_mask").get<std::string>();
            if (mask.size() != model.sghn.edge_mask.size())
                throw io::CorruptFileError("checkpoint edge mask size mismatch");
            for (std::size_t i = 0; i < mask.size(); ++i)
                model.sghn.edge_mask[i] = mask[i] == '1' ? 1 : 0;
            tensors = model.sghn.parameters();
            break;
        }
    }

    const io::json& tlist = m.at("tensors");
    if (tlist.size() != tensors.size()) throw io::CorruptFileError("checkpoint tensor count mismatch");
    std::size_t off = 0;
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const int rows = tlist[k].at("rows").get<int>();
        const int cols = tlist[k].at("cols").get<int>();
        if (rows != tensors[k]->rows || cols != tensors[k]->cols)
            throw io::CorruptFileError("checkpoint shape mismatch for tensor '" +
                                       tlist[k].value("name", std::string{}) + "'");
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        if (off + n > c.payload.size()) throw io::CorruptFileError("checkpoint payload too short");
        std::copy(c.payload.begin() + static_cast<std::ptrdiff_t>(off),
                  c.payload.begin() + static_cast<std::ptrdiff_t>(off + n), tensors[k]->data.begin());
        off += n;
    }
    if (off != c.payload.size()) throw io::CorruptFileError("checkpoint payload size mismatch");
    return model;
}

}  // namespace hamlat
