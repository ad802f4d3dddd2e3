#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <numeric>
#include <random>

#include "odlm/linalg.hpp"
#include "odlm/recmodel.hpp"

using namespace odlm;
using namespace odlm::rec;

namespace {

ModelConfig toy_config(int num_items = 64) {
    ModelConfig cfg;
    cfg.num_items = num_items;
    cfg.embed_dim = 64;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.max_len = 50;
    return cfg;
}

bool same_params(const RecModel& a, const RecModel& b) {
    auto eq = [](const Mat& x, const Mat& y) {
        return x.data.size() == y.data.size() &&
               std::memcmp(x.data.data(), y.data.data(), x.data.size() * 8) == 0;
    };
    if (!eq(a.item_emb, b.item_emb) || !eq(a.pos_emb, b.pos_emb) || !eq(a.head, b.head))
        return false;
    if (a.lnf_g != b.lnf_g || a.lnf_b != b.lnf_b) return false;
    for (size_t l = 0; l < a.blocks.size(); ++l) {
        const Block& x = a.blocks[l];
        const Block& y = b.blocks[l];
        if (x.ln1_g != y.ln1_g || x.ln1_b != y.ln1_b || x.ln2_g != y.ln2_g ||
            x.ln2_b != y.ln2_b)
            return false;
        auto xs = {&x.wq, &x.wk, &x.wv, &x.wo, &x.up, &x.down};
        auto ys = {&y.wq, &y.wk, &y.wv, &y.wo, &y.up, &y.down};
        auto yi = ys.begin();
        for (const LinearSlot* s : xs) {
            if (!eq(s->dense(), (*yi)->dense())) return false;
            ++yi;
        }
    }
    return true;
}

// ranked items by score, descending, ties by ascending id; context items
// (except the target) excluded
int rank_of_target(const std::vector<double>& scores, std::span<const ItemId> context,
                   ItemId target) {
    std::vector<char> masked(scores.size(), 0);
    for (ItemId v : context)
        if (v != target) masked[v] = 1;
    int rank = 1;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (masked[i] || static_cast<ItemId>(i) == target) continue;
        if (scores[i] > scores[target] ||
            (scores[i] == scores[target] && static_cast<ItemId>(i) < target))
            ++rank;
    }
    return rank;
}

}  // namespace

TEST_CASE("init_model shapes and determinism") {
    auto m = init_model(toy_config(), 9);
    CHECK(m.item_emb.rows == 64);
    CHECK(m.head.rows == 64);
    CHECK(m.blocks.size() == 2);
    CHECK(m.blocks[0].up.out_dim() == 256);
    CHECK(m.blocks[0].down.in_dim() == 256);
    CHECK(m.all_dense());
    CHECK(m.linear_slots().size() == 12);

    auto m2 = init_model(toy_config(), 9);
    CHECK(same_params(m, m2));
}

TEST_CASE("score_next returns finite scores for every item") {
    auto m = init_model(toy_config(), 3);
    std::vector<ItemId> ctx{1, 5, 9, 2};
    auto scores = score_next(m, ctx);
    CHECK(scores.size() == 64);
    for (double s : scores) CHECK(std::isfinite(s));

    // contexts longer than max_len are truncated, not rejected
    std::vector<ItemId> long_ctx(120, 3);
    CHECK(score_next(m, long_ctx).size() == 64);

    CHECK_THROWS_AS(score_next(m, std::vector<ItemId>{}), InvalidItemId);
    CHECK_THROWS_AS(score_next(m, std::vector<ItemId>{64}), InvalidItemId);
}

TEST_CASE("activation hook sees every linear input") {
    auto m = init_model(toy_config(), 4);
    std::map<std::string, int> counts;
    std::map<std::string, size_t> dims;
    ActivationHook hook = [&](const std::string& id, std::span<const double> x) {
        counts[id]++;
        dims[id] = x.size();
    };
    std::vector<ItemId> ctx{1, 2, 3};
    forward_hidden(m, ctx, &hook);
    CHECK(counts.size() == 12);
    for (const auto& [id, c] : counts) CHECK(c == 3);
    CHECK(dims["blk0.attn.wq"] == 64);
    CHECK(dims["blk1.mlp.down"] == 256);
}

TEST_CASE("exact factorization changes no score beyond tolerance") {
    auto m = init_model(toy_config(), 5);
    RecModel factored = m;
    for (LinearSlot* s : factored.linear_slots()) {
        const Mat w = s->dense();
        auto svd = linalg::svd_full(w);
        const int r = static_cast<int>(svd.sigma.size());
        compress::CompressedLayer cl;
        cl.layer_id = s->id;
        cl.m = w.rows;
        cl.n = w.cols;
        cl.rank = r;
        Mat a(w.rows, r);
        for (int i = 0; i < w.rows; ++i)
            for (int j = 0; j < r; ++j) a(i, j) = svd.u(i, j) * svd.sigma[j];
        cl.a = a;
        cl.b = transpose(svd.v);
        cl.sigma_retained = svd.sigma;
        s->weight = std::move(cl);
    }
    CHECK_FALSE(factored.all_dense());

    for (uint32_t probe = 0; probe < 10; ++probe) {
        std::vector<ItemId> ctx;
        for (int t = 0; t < 8; ++t) ctx.push_back(static_cast<ItemId>((probe * 13 + t * 7) % 64));
        auto s_dense = score_next(m, ctx);
        auto s_fact = score_next(factored, ctx);
        double md = 0;
        for (size_t i = 0; i < s_dense.size(); ++i)
            md = std::max(md, std::fabs(s_dense[i] - s_fact[i]));
        CHECK(md <= 1e-5);
    }
}

TEST_CASE("train: zero learning rate leaves parameters unchanged") {
    auto ds = generate_synthetic(50, 64, 2);
    auto m = init_model(toy_config(), 7);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.learning_rate = 0.0;
    cfg.seed = 3;
    auto trained = train(m, ds, cfg);
    CHECK(same_params(m, trained));
}

TEST_CASE("train is deterministic and reduces the loss") {
    auto ds = generate_synthetic(120, 64, 21);
    auto m = init_model(toy_config(), 17);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    cfg.seed = 5;

    std::vector<double> losses;
    EpochHook hook = [&](int, double loss) { losses.push_back(loss); };
    auto t1 = train(m, ds, cfg, &hook);
    auto t2 = train(m, ds, cfg);
    CHECK(same_params(t1, t2));
    REQUIRE(losses.size() == 3);
    CHECK(losses.back() < losses.front());
}

TEST_CASE("three epochs of training beat the popularity baseline 2x at HR@10") {
    auto ds = generate_synthetic(200, 64, 7);
    auto views = split_leave_last_two(ds);

    auto m = init_model(toy_config(), 1);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 1;
    auto trained = train(m, ds, cfg);

    // popularity baseline from the training prefixes
    std::vector<double> pop(64, 0.0);
    for (const auto& p : views.train)
        for (ItemId v : p) pop[v] += 1.0;

    int hits_model = 0, hits_pop = 0;
    for (const auto& c : views.test.cases) {
        auto scores = score_next(trained, c.context);
        if (rank_of_target(scores, c.context, c.target) <= 10) ++hits_model;
        if (rank_of_target(pop, c.context, c.target) <= 10) ++hits_pop;
    }
    const double hr_model = static_cast<double>(hits_model) / views.test.cases.size();
    const double hr_pop = static_cast<double>(hits_pop) / views.test.cases.size();
    INFO("model HR@10 = ", hr_model, ", popularity HR@10 = ", hr_pop);
    CHECK(hr_model > 2.0 * hr_pop);
}

TEST_CASE("trained model recovers the planted cluster structure") {
    auto ds = generate_synthetic(500, 64, 7);
    auto m = init_model(toy_config(), 1);
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.seed = 1;
    auto trained = train(m, ds, cfg);

    // after a within-cluster context the argmax lands in the same cluster
    std::mt19937_64 gen(99);
    int in_cluster = 0;
    const int probes = 500;
    for (int p = 0; p < probes; ++p) {
        const int cluster = static_cast<int>(gen() % 8);
        std::vector<ItemId> ctx;
        for (int t = 0; t < 4; ++t)
            ctx.push_back(static_cast<ItemId>(cluster * kClusterSize + gen() % kClusterSize));
        auto scores = score_next(trained, ctx);
        int arg = -1;
        double best = -1e300;
        for (int i = 0; i < 64; ++i) {
            if (std::find(ctx.begin(), ctx.end(), i) != ctx.end()) continue;
            if (scores[i] > best) {
                best = scores[i];
                arg = i;
            }
        }
        if (cluster_of(arg) == cluster) ++in_cluster;
    }
    INFO("in-cluster argmax fraction = ", in_cluster / 500.0);
    CHECK(in_cluster >= 350);
}

TEST_CASE("train rejects factorized models and divergent losses are caught") {
    auto ds = generate_synthetic(30, 64, 4);
    auto m = init_model(toy_config(), 2);
    m.blocks[0].wq.weight = compress::CompressedLayer{};
    TrainConfig cfg;
    CHECK_THROWS_AS(train(m, ds, cfg), DataError);
}
