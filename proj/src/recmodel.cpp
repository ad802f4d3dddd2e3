#include "odlm/recmodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace odlm::rec {

namespace {

constexpr double kLnEps = 1e-5;

void layernorm(std::span<const double> x, std::span<const double> g,
               std::span<const double> b, std::span<double> y, double& mean_out,
               double& sd_out) {
    const size_t d = x.size();
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= static_cast<double>(d);
    const double sd = std::sqrt(var + kLnEps);
    for (size_t i = 0; i < d; ++i) y[i] = g[i] * (x[i] - mu) / sd + b[i];
    mean_out = mu;
    sd_out = sd;
}

// dy -> dx, accumulating parameter grads, given cached mean/sd.
void layernorm_backward(std::span<const double> x, std::span<const double> g,
                        std::span<const double> dy, double mu, double sd,
                        std::span<double> dx, std::span<double> dg, std::span<double> db) {
    const size_t d = x.size();
    double mean_a = 0.0, mean_ax = 0.0;
    std::vector<double> xhat(d);
    for (size_t i = 0; i < d; ++i) {
        xhat[i] = (x[i] - mu) / sd;
        const double a = dy[i] * g[i];
        mean_a += a;
        mean_ax += a * xhat[i];
        dg[i] += dy[i] * xhat[i];
        db[i] += dy[i];
    }
    mean_a /= static_cast<double>(d);
    mean_ax /= static_cast<double>(d);
    for (size_t i = 0; i < d; ++i)
        dx[i] = (dy[i] * g[i] - mean_a - xhat[i] * mean_ax) / sd;
}

void dense_forward(const Mat& w, std::span<const double> x, std::span<double> y) {
    for (int i = 0; i < w.rows; ++i) {
        const double* row = w.row(i);
        double s = 0.0;
        for (int j = 0; j < w.cols; ++j) s += row[j] * x[j];
        y[i] = s;
    }
}

// dW += dy (x) x ; dx += W^T dy
void dense_backward(const Mat& w, std::span<const double> x, std::span<const double> dy,
                    Mat& dw, std::span<double> dx) {
    for (int i = 0; i < w.rows; ++i) {
        const double di = dy[i];
        const double* wrow = w.row(i);
        double* gwrow = dw.row(i);
        for (int j = 0; j < w.cols; ++j) {
            gwrow[j] += di * x[j];
            dx[j] += di * wrow[j];
        }
    }
}

struct ParamArray {
    double* p;
    size_t n;
};

void collect(std::vector<ParamArray>& out, Mat& m) { out.push_back({m.data.data(), m.data.size()}); }
void collect(std::vector<ParamArray>& out, std::vector<double>& v) {
    out.push_back({v.data(), v.size()});
}

std::vector<ParamArray> param_arrays(RecModel& m) {
    std::vector<ParamArray> out;
    collect(out, m.item_emb);
    collect(out, m.pos_emb);
    for (auto& b : m.blocks) {
        collect(out, b.ln1_g);
        collect(out, b.ln1_b);
        collect(out, b.wq.dense());
        collect(out, b.wk.dense());
        collect(out, b.wv.dense());
        collect(out, b.wo.dense());
        collect(out, b.ln2_g);
        collect(out, b.ln2_b);
        collect(out, b.up.dense());
        collect(out, b.down.dense());
    }
    collect(out, m.lnf_g);
    collect(out, m.lnf_b);
    collect(out, m.head);
    return out;
}

RecModel zeros_like(const RecModel& m) {
    RecModel z = m;
    z.item_emb = Mat(m.item_emb.rows, m.item_emb.cols);
    z.pos_emb = Mat(m.pos_emb.rows, m.pos_emb.cols);
    for (auto& b : z.blocks) {
        std::fill(b.ln1_g.begin(), b.ln1_g.end(), 0.0);
        std::fill(b.ln1_b.begin(), b.ln1_b.end(), 0.0);
        std::fill(b.ln2_g.begin(), b.ln2_g.end(), 0.0);
        std::fill(b.ln2_b.begin(), b.ln2_b.end(), 0.0);
        for (LinearSlot* s : {&b.wq, &b.wk, &b.wv, &b.wo, &b.up, &b.down})
            s->dense() = Mat(s->dense().rows, s->dense().cols);
    }
    std::fill(z.lnf_g.begin(), z.lnf_g.end(), 0.0);
    std::fill(z.lnf_b.begin(), z.lnf_b.end(), 0.0);
    z.head = Mat(m.head.rows, m.head.cols);
    return z;
}

// per-sequence forward caches for backprop
struct BlockCache {
    Mat x_in, ln1_out, q, k, v, ctx, x_mid, ln2_out, hid_pre, hid;
    std::vector<double> ln1_mu, ln1_sd, ln2_mu, ln2_sd;
    std::vector<Mat> probs;  // one T x T lower-triangular matrix per head
};

}  // namespace

void LinearSlot::apply(std::span<const double> x, std::span<double> y) const {
    if (is_dense()) {
        dense_forward(dense(), x, y);
        return;
    }
    const auto& f = factored();
    std::vector<double> t(f.rank, 0.0);
    dense_forward(f.b, x, t);   // r x n
    dense_forward(f.a, t, y);   // m x r
}

bool RecModel::all_dense() const {
    for (const LinearSlot* s : linear_slots())
        if (!s->is_dense()) return false;
    return true;
}

std::vector<LinearSlot*> RecModel::linear_slots() {
    std::vector<LinearSlot*> out;
    for (auto& b : blocks)
        for (LinearSlot* s : {&b.wq, &b.wk, &b.wv, &b.wo, &b.up, &b.down}) out.push_back(s);
    return out;
}

std::vector<const LinearSlot*> RecModel::linear_slots() const {
    std::vector<const LinearSlot*> out;
    for (const auto& b : blocks)
        for (const LinearSlot* s : {&b.wq, &b.wk, &b.wv, &b.wo, &b.up, &b.down})
            out.push_back(s);
    return out;
}

RecModel init_model(const ModelConfig& cfg, uint64_t seed) {
    if (cfg.num_items <= 0 || cfg.embed_dim <= 0 || cfg.num_layers <= 0 ||
        cfg.num_heads <= 0 || cfg.max_len <= 0)
        throw DataError("init_model: all config fields must be positive");
    if (cfg.embed_dim % cfg.num_heads != 0)
        throw DataError("init_model: embed_dim must divide evenly into heads");

    std::mt19937_64 gen(seed);
    std::normal_distribution<double> dist(0.0, 0.02);
    auto fill = [&](Mat& m) {
        for (double& v : m.data) v = dist(gen);
    };

    RecModel m;
    m.num_items = cfg.num_items;
    m.embed_dim = cfg.embed_dim;
    m.num_layers = cfg.num_layers;
    m.num_heads = cfg.num_heads;
    m.max_len = cfg.max_len;

    const int d = cfg.embed_dim;
    const int f = 4 * d;
    m.item_emb = Mat(cfg.num_items, d);
    fill(m.item_emb);
    m.pos_emb = Mat(cfg.max_len, d);
    fill(m.pos_emb);
    m.blocks.resize(cfg.num_layers);
    for (int l = 0; l < cfg.num_layers; ++l) {
        Block& b = m.blocks[l];
        const std::string tag = "blk" + std::to_string(l);
        b.ln1_g.assign(d, 1.0);
        b.ln1_b.assign(d, 0.0);
        b.ln2_g.assign(d, 1.0);
        b.ln2_b.assign(d, 0.0);
        b.wq = {tag + ".attn.wq", Mat(d, d)};
        b.wk = {tag + ".attn.wk", Mat(d, d)};
        b.wv = {tag + ".attn.wv", Mat(d, d)};
        b.wo = {tag + ".attn.wo", Mat(d, d)};
        b.up = {tag + ".mlp.up", Mat(f, d)};
        b.down = {tag + ".mlp.down", Mat(d, f)};
        for (LinearSlot* s : {&b.wq, &b.wk, &b.wv, &b.wo, &b.up, &b.down}) fill(s->dense());
    }
    m.lnf_g.assign(d, 1.0);
    m.lnf_b.assign(d, 0.0);
    m.head = Mat(cfg.num_items, d);
    fill(m.head);
    return m;
}

Mat forward_hidden(const RecModel& m, std::span<const ItemId> items,
                   const ActivationHook* hook) {
    if (items.empty()) throw DataError("forward_hidden: empty sequence");
    const size_t off = items.size() > static_cast<size_t>(m.max_len)
                           ? items.size() - static_cast<size_t>(m.max_len)
                           : 0;
    const int t_len = static_cast<int>(items.size() - off);
    const int d = m.embed_dim;
    const int heads = m.num_heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    for (size_t i = off; i < items.size(); ++i)
        if (items[i] < 0 || items[i] >= m.num_items)
            throw InvalidItemId("forward_hidden: item id " + std::to_string(items[i]) +
                                " out of range");

    Mat x(t_len, d);
    for (int t = 0; t < t_len; ++t) {
        const double* ie = m.item_emb.row(items[off + t]);
        const double* pe = m.pos_emb.row(t);
        double* xr = x.row(t);
        for (int j = 0; j < d; ++j) xr[j] = ie[j] + pe[j];
    }

    Mat ln_out(t_len, d), q(t_len, d), k(t_len, d), v(t_len, d), ctx(t_len, d);
    std::vector<double> yrow(static_cast<size_t>(m.hidden_dim()));
    std::vector<double> hrow(static_cast<size_t>(m.hidden_dim()));

    auto run_slot = [&](const LinearSlot& s, std::span<const double> in,
                        std::span<double> out) {
        if (hook) (*hook)(s.id, in);
        s.apply(in, out);
    };

    for (const Block& blk : m.blocks) {
        double mu, sd;
        for (int t = 0; t < t_len; ++t) {
            layernorm({x.row(t), static_cast<size_t>(d)}, blk.ln1_g, blk.ln1_b,
                      {ln_out.row(t), static_cast<size_t>(d)}, mu, sd);
            run_slot(blk.wq, {ln_out.row(t), static_cast<size_t>(d)},
                     {q.row(t), static_cast<size_t>(d)});
            run_slot(blk.wk, {ln_out.row(t), static_cast<size_t>(d)},
                     {k.row(t), static_cast<size_t>(d)});
            run_slot(blk.wv, {ln_out.row(t), static_cast<size_t>(d)},
                     {v.row(t), static_cast<size_t>(d)});
        }
        // causal attention
        std::vector<double> sc(t_len), pr(t_len);
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * dh;
            for (int t = 0; t < t_len; ++t) {
                double mx = -1e300;
                for (int u = 0; u <= t; ++u) {
                    double s = 0.0;
                    const double* qr = q.row(t) + c0;
                    const double* kr = k.row(u) + c0;
                    for (int j = 0; j < dh; ++j) s += qr[j] * kr[j];
                    sc[u] = s * scale;
                    mx = std::max(mx, sc[u]);
                }
                double z = 0.0;
                for (int u = 0; u <= t; ++u) {
                    pr[u] = std::exp(sc[u] - mx);
                    z += pr[u];
                }
                double* cr = ctx.row(t) + c0;
                for (int j = 0; j < dh; ++j) cr[j] = 0.0;
                for (int u = 0; u <= t; ++u) {
                    const double p = pr[u] / z;
                    const double* vr = v.row(u) + c0;
                    for (int j = 0; j < dh; ++j) cr[j] += p * vr[j];
                }
            }
        }
        for (int t = 0; t < t_len; ++t) {
            std::vector<double> o(static_cast<size_t>(d), 0.0);
            run_slot(blk.wo, {ctx.row(t), static_cast<size_t>(d)}, o);
            double* xr = x.row(t);
            for (int j = 0; j < d; ++j) xr[j] += o[j];

            layernorm({x.row(t), static_cast<size_t>(d)}, blk.ln2_g, blk.ln2_b,
                      {ln_out.row(t), static_cast<size_t>(d)}, mu, sd);
            const int fdim = blk.up.out_dim();
            run_slot(blk.up, {ln_out.row(t), static_cast<size_t>(d)},
                     {yrow.data(), static_cast<size_t>(fdim)});
            for (int j = 0; j < fdim; ++j) hrow[j] = yrow[j] > 0.0 ? yrow[j] : 0.0;
            std::vector<double> dn(static_cast<size_t>(d), 0.0);
            run_slot(blk.down, {hrow.data(), static_cast<size_t>(fdim)}, dn);
            for (int j = 0; j < d; ++j) xr[j] += dn[j];
        }
    }

    Mat out(t_len, d);
    double mu, sd;
    for (int t = 0; t < t_len; ++t)
        layernorm({x.row(t), static_cast<size_t>(d)}, m.lnf_g, m.lnf_b,
                  {out.row(t), static_cast<size_t>(d)}, mu, sd);
    return out;
}

std::vector<double> score_next(const RecModel& m, std::span<const ItemId> context) {
    if (context.empty()) throw InvalidItemId("score_next: empty context");
    Mat h = forward_hidden(m, context);
    std::vector<double> scores(static_cast<size_t>(m.num_items), 0.0);
    dense_forward(m.head, {h.row(h.rows - 1), static_cast<size_t>(m.embed_dim)}, scores);
    return scores;
}

namespace {

// Forward with caches, cross-entropy on next-item targets, full backward.
// Returns summed CE loss; grads accumulate into g.
double backprop_sequence(const RecModel& m, std::span<const ItemId> seq, RecModel& g) {
    const int t_len = static_cast<int>(seq.size()) - 1;
    const int d = m.embed_dim;
    const int fdim = m.hidden_dim();
    const int heads = m.num_heads;
    const int dh = d / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    // ---- forward ----
    Mat x(t_len, d);
    for (int t = 0; t < t_len; ++t) {
        const double* ie = m.item_emb.row(seq[t]);
        const double* pe = m.pos_emb.row(t);
        double* xr = x.row(t);
        for (int j = 0; j < d; ++j) xr[j] = ie[j] + pe[j];
    }

    std::vector<BlockCache> caches(m.num_layers);
    for (int l = 0; l < m.num_layers; ++l) {
        const Block& blk = m.blocks[l];
        BlockCache& c = caches[l];
        c.x_in = x;
        c.ln1_out = Mat(t_len, d);
        c.q = Mat(t_len, d);
        c.k = Mat(t_len, d);
        c.v = Mat(t_len, d);
        c.ctx = Mat(t_len, d);
        c.ln1_mu.resize(t_len);
        c.ln1_sd.resize(t_len);
        c.ln2_mu.resize(t_len);
        c.ln2_sd.resize(t_len);
        c.probs.assign(heads, Mat(t_len, t_len));

        for (int t = 0; t < t_len; ++t) {
            layernorm({c.x_in.row(t), static_cast<size_t>(d)}, blk.ln1_g, blk.ln1_b,
                      {c.ln1_out.row(t), static_cast<size_t>(d)}, c.ln1_mu[t], c.ln1_sd[t]);
            dense_forward(blk.wq.dense(), {c.ln1_out.row(t), static_cast<size_t>(d)},
                          {c.q.row(t), static_cast<size_t>(d)});
            dense_forward(blk.wk.dense(), {c.ln1_out.row(t), static_cast<size_t>(d)},
                          {c.k.row(t), static_cast<size_t>(d)});
            dense_forward(blk.wv.dense(), {c.ln1_out.row(t), static_cast<size_t>(d)},
                          {c.v.row(t), static_cast<size_t>(d)});
        }
        std::vector<double> sc(t_len);
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * dh;
            Mat& pm = c.probs[h];
            for (int t = 0; t < t_len; ++t) {
                double mx = -1e300;
                for (int u = 0; u <= t; ++u) {
                    double s = 0.0;
                    const double* qr = c.q.row(t) + c0;
                    const double* kr = c.k.row(u) + c0;
                    for (int j = 0; j < dh; ++j) s += qr[j] * kr[j];
                    sc[u] = s * scale;
                    mx = std::max(mx, sc[u]);
                }
                double z = 0.0;
                for (int u = 0; u <= t; ++u) {
                    sc[u] = std::exp(sc[u] - mx);
                    z += sc[u];
                }
                double* cr = c.ctx.row(t) + c0;
                for (int j = 0; j < dh; ++j) cr[j] = 0.0;
                for (int u = 0; u <= t; ++u) {
                    const double p = sc[u] / z;
                    pm(t, u) = p;
                    const double* vr = c.v.row(u) + c0;
                    for (int j = 0; j < dh; ++j) cr[j] += p * vr[j];
                }
            }
        }
        for (int t = 0; t < t_len; ++t) {
            std::vector<double> o(static_cast<size_t>(d), 0.0);
            dense_forward(blk.wo.dense(), {c.ctx.row(t), static_cast<size_t>(d)}, o);
            double* xr = x.row(t);
            for (int j = 0; j < d; ++j) xr[j] += o[j];
        }
        c.x_mid = x;
        c.ln2_out = Mat(t_len, d);
        c.hid_pre = Mat(t_len, fdim);
        c.hid = Mat(t_len, fdim);
        for (int t = 0; t < t_len; ++t) {
            layernorm({c.x_mid.row(t), static_cast<size_t>(d)}, blk.ln2_g, blk.ln2_b,
                      {c.ln2_out.row(t), static_cast<size_t>(d)}, c.ln2_mu[t], c.ln2_sd[t]);
            dense_forward(blk.up.dense(), {c.ln2_out.row(t), static_cast<size_t>(d)},
                          {c.hid_pre.row(t), static_cast<size_t>(fdim)});
            double* hr = c.hid.row(t);
            const double* pr = c.hid_pre.row(t);
            for (int j = 0; j < fdim; ++j) hr[j] = pr[j] > 0.0 ? pr[j] : 0.0;
            std::vector<double> dn(static_cast<size_t>(d), 0.0);
            dense_forward(blk.down.dense(), {c.hid.row(t), static_cast<size_t>(fdim)}, dn);
            double* xr = x.row(t);
            for (int j = 0; j < d; ++j) xr[j] += dn[j];
        }
    }

    Mat lnf_out(t_len, d);
    std::vector<double> lnf_mu(t_len), lnf_sd(t_len);
    for (int t = 0; t < t_len; ++t)
        layernorm({x.row(t), static_cast<size_t>(d)}, m.lnf_g, m.lnf_b,
                  {lnf_out.row(t), static_cast<size_t>(d)}, lnf_mu[t], lnf_sd[t]);

    // ---- loss and output backward ----
    double loss = 0.0;
    Mat d_lnf_out(t_len, d);
    std::vector<double> logits(static_cast<size_t>(m.num_items));
    for (int t = 0; t < t_len; ++t) {
        dense_forward(m.head, {lnf_out.row(t), static_cast<size_t>(d)}, logits);
        double mx = logits[0];
        for (double lv : logits) mx = std::max(mx, lv);
        double z = 0.0;
        for (double lv : logits) z += std::exp(lv - mx);
        const ItemId target = seq[t + 1];
        loss -= (logits[target] - mx) - std::log(z);
        // dlogits = softmax - onehot
        for (int i = 0; i < m.num_items; ++i) logits[i] = std::exp(logits[i] - mx) / z;
        logits[target] -= 1.0;
        dense_backward(m.head, {lnf_out.row(t), static_cast<size_t>(d)}, logits, g.head,
                       {d_lnf_out.row(t), static_cast<size_t>(d)});
    }

    Mat dx(t_len, d);
    for (int t = 0; t < t_len; ++t)
        layernorm_backward({x.row(t), static_cast<size_t>(d)}, m.lnf_g,
                           {d_lnf_out.row(t), static_cast<size_t>(d)}, lnf_mu[t], lnf_sd[t],
                           {dx.row(t), static_cast<size_t>(d)}, g.lnf_g, g.lnf_b);

    // ---- blocks in reverse ----
    for (int l = m.num_layers - 1; l >= 0; --l) {
        const Block& blk = m.blocks[l];
        Block& gb = g.blocks[l];
        BlockCache& c = caches[l];

        // MLP branch: dx covers x_out = x_mid + down(relu(up(ln2(x_mid))))
        Mat d_mid = dx;  // residual path
        for (int t = 0; t < t_len; ++t) {
            std::vector<double> d_hid(static_cast<size_t>(fdim), 0.0);
            dense_backward(blk.down.dense(), {c.hid.row(t), static_cast<size_t>(fdim)},
                           {dx.row(t), static_cast<size_t>(d)}, gb.down.dense(), d_hid);
            const double* pre = c.hid_pre.row(t);
            for (int j = 0; j < fdim; ++j)
                if (pre[j] <= 0.0) d_hid[j] = 0.0;
            std::vector<double> d_ln2(static_cast<size_t>(d), 0.0);
            dense_backward(blk.up.dense(), {c.ln2_out.row(t), static_cast<size_t>(d)}, d_hid,
                           gb.up.dense(), d_ln2);
            std::vector<double> d_x(static_cast<size_t>(d), 0.0);
            layernorm_backward({c.x_mid.row(t), static_cast<size_t>(d)}, blk.ln2_g, d_ln2,
                               c.ln2_mu[t], c.ln2_sd[t], d_x, gb.ln2_g, gb.ln2_b);
            double* dm = d_mid.row(t);
            for (int j = 0; j < d; ++j) dm[j] += d_x[j];
        }

        // attention branch: x_mid = x_in + wo(ctx)
        Mat d_in = d_mid;  // residual path
        Mat d_ctx(t_len, d);
        for (int t = 0; t < t_len; ++t)
            dense_backward(blk.wo.dense(), {c.ctx.row(t), static_cast<size_t>(d)},
                           {d_mid.row(t), static_cast<size_t>(d)}, gb.wo.dense(),
                           {d_ctx.row(t), static_cast<size_t>(d)});

        Mat dq(t_len, d), dk(t_len, d), dv(t_len, d);
        std::vector<double> dp(t_len), ds(t_len);
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * dh;
            const Mat& pm = c.probs[h];
            for (int t = 0; t < t_len; ++t) {
                const double* dcr = d_ctx.row(t) + c0;
                double dot_pp = 0.0;
                for (int u = 0; u <= t; ++u) {
                    const double* vr = c.v.row(u) + c0;
                    double s = 0.0;
                    for (int j = 0; j < dh; ++j) s += dcr[j] * vr[j];
                    dp[u] = s;
                    dot_pp += pm(t, u) * s;
                    double* dvr = dv.row(u) + c0;
                    const double p = pm(t, u);
                    for (int j = 0; j < dh; ++j) dvr[j] += p * dcr[j];
                }
                for (int u = 0; u <= t; ++u) ds[u] = pm(t, u) * (dp[u] - dot_pp);
                double* dqr = dq.row(t) + c0;
                for (int u = 0; u <= t; ++u) {
                    const double w = ds[u] * scale;
                    const double* kr = c.k.row(u) + c0;
                    double* dkr = dk.row(u) + c0;
                    const double* qr = c.q.row(t) + c0;
                    for (int j = 0; j < dh; ++j) {
                        dqr[j] += w * kr[j];
                        dkr[j] += w * qr[j];
                    }
                }
            }
        }

        for (int t = 0; t < t_len; ++t) {
            std::vector<double> d_ln1(static_cast<size_t>(d), 0.0);
            dense_backward(blk.wq.dense(), {c.ln1_out.row(t), static_cast<size_t>(d)},
                           {dq.row(t), static_cast<size_t>(d)}, gb.wq.dense(), d_ln1);
            dense_backward(blk.wk.dense(), {c.ln1_out.row(t), static_cast<size_t>(d)},
                           {dk.row(t), static_cast<size_t>(d)}, gb.wk.dense(), d_ln1);
            dense_backward(blk.wv.dense(), {c.ln1_out.row(t), static_cast<size_t>(d)},
                           {dv.row(t), static_cast<size_t>(d)}, gb.wv.dense(), d_ln1);
            std::vector<double> d_x(static_cast<size_t>(d), 0.0);
            layernorm_backward({c.x_in.row(t), static_cast<size_t>(d)}, blk.ln1_g, d_ln1,
                               c.ln1_mu[t], c.ln1_sd[t], d_x, gb.ln1_g, gb.ln1_b);
            double* dir = d_in.row(t);
            for (int j = 0; j < d; ++j) dir[j] += d_x[j];
        }
        dx = std::move(d_in);
    }

    // embeddings
    for (int t = 0; t < t_len; ++t) {
        double* ge = g.item_emb.row(seq[t]);
        double* gp = g.pos_emb.row(t);
        const double* dxr = dx.row(t);
        for (int j = 0; j < d; ++j) {
            ge[j] += dxr[j];
            gp[j] += dxr[j];
        }
    }
    return loss;
}

}  // namespace

RecModel train(RecModel model, const ItemSequenceDataset& ds, const TrainConfig& cfg,
               const EpochHook* epoch_hook) {
    if (!model.all_dense()) throw DataError("train: model has factorized layers");
    if (model.num_items != ds.num_items)
        throw DimensionMismatch("train: model items != dataset items");
    if (cfg.epochs < 0 || cfg.batch_size <= 0 || cfg.max_seq_len <= 0)
        throw DataError("train: bad config");

    SplitViews views = split_leave_last_two(ds);
    const size_t keep = static_cast<size_t>(std::min(cfg.max_seq_len, model.max_len)) + 1;
    std::vector<std::vector<ItemId>> seqs;
    for (auto& p : views.train) {
        if (p.size() < 2) continue;  // no next-item pair to learn from
        if (p.size() > keep) p.erase(p.begin(), p.end() - keep);
        seqs.push_back(std::move(p));
    }
    if (seqs.empty()) throw DataError("train: no usable training sequences");

    RecModel grads = zeros_like(model);
    RecModel adam_m = zeros_like(model);
    RecModel adam_v = zeros_like(model);
    auto p_arr = param_arrays(model);
    auto g_arr = param_arrays(grads);
    auto m_arr = param_arrays(adam_m);
    auto v_arr = param_arrays(adam_v);

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
    std::mt19937_64 shuffle_gen(cfg.seed);
    std::vector<size_t> order(seqs.size());
    long step = 0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), shuffle_gen);

        double epoch_loss = 0.0;
        long epoch_tokens = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            for (auto& arr : g_arr) std::fill(arr.p, arr.p + arr.n, 0.0);
            double batch_loss = 0.0;
            long batch_tokens = 0;
            for (size_t i = start; i < end; ++i) {
                const auto& s = seqs[order[i]];
                batch_loss += backprop_sequence(model, s, grads);
                batch_tokens += static_cast<long>(s.size()) - 1;
            }
            if (!std::isfinite(batch_loss))
                throw DivergenceDetected("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch starting " +
                                         std::to_string(start));
            const double inv_tokens = 1.0 / static_cast<double>(batch_tokens);
            ++step;
            const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
            const double lr_t = cfg.learning_rate * std::sqrt(bc2) / bc1;
            for (size_t a = 0; a < p_arr.size(); ++a) {
                double* p = p_arr[a].p;
                double* gr = g_arr[a].p;
                double* am = m_arr[a].p;
                double* av = v_arr[a].p;
                for (size_t i = 0; i < p_arr[a].n; ++i) {
                    const double gi = gr[i] * inv_tokens;
                    am[i] = kBeta1 * am[i] + (1.0 - kBeta1) * gi;
                    av[i] = kBeta2 * av[i] + (1.0 - kBeta2) * gi * gi;
                    p[i] -= lr_t * am[i] / (std::sqrt(av[i]) + kAdamEps);
                }
            }
            epoch_loss += batch_loss;
            epoch_tokens += batch_tokens;
        }
        if (epoch_hook)
            (*epoch_hook)(epoch, epoch_loss / static_cast<double>(std::max(1L, epoch_tokens)));
    }
    return model;
}

}  // namespace odlm::rec
