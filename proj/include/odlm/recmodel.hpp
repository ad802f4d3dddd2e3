#pragma once

#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "odlm/compress_types.hpp"
#include "odlm/dataset.hpp"
#include "odlm/mat.hpp"

namespace odlm::rec {

struct ModelConfig {
    int num_items = 0;
    int embed_dim = 64;
    int num_layers = 2;
    int num_heads = 4;
    int max_len = 50;
};

struct TrainConfig {
    int epochs = 25;
    int batch_size = 32;
    double learning_rate = 1e-2;
    uint64_t seed = 1;
    int max_seq_len = 50;  // training-time truncation, capped at the model's max_len
};

/// One linear position: exactly dense or factorized.
struct LinearSlot {
    std::string id;
    std::variant<Mat, compress::CompressedLayer> weight;

    bool is_dense() const { return std::holds_alternative<Mat>(weight); }
    const Mat& dense() const { return std::get<Mat>(weight); }
    Mat& dense() { return std::get<Mat>(weight); }
    const compress::CompressedLayer& factored() const {
        return std::get<compress::CompressedLayer>(weight);
    }

    int out_dim() const { return is_dense() ? dense().rows : factored().m; }
    int in_dim() const { return is_dense() ? dense().cols : factored().n; }

    /// y = W*x, computed as a*(b*x) when factorized.
    void apply(std::span<const double> x, std::span<double> y) const;
};

struct Block {
    std::vector<double> ln1_g, ln1_b;
    LinearSlot wq, wk, wv, wo;
    std::vector<double> ln2_g, ln2_b;
    LinearSlot up, down;  // MLP, hidden = 4*embed_dim
};

/// Decoder-only next-item transformer: learned item + position embeddings,
/// pre-LN causal attention blocks, ReLU MLP, linear output head.
struct RecModel {
    int num_items = 0;
    int embed_dim = 0;
    int num_layers = 0;
    int num_heads = 0;
    int max_len = 0;

    Mat item_emb;  // num_items x d
    Mat pos_emb;   // max_len x d
    std::vector<Block> blocks;
    std::vector<double> lnf_g, lnf_b;
    Mat head;  // num_items x d

    int hidden_dim() const { return 4 * embed_dim; }
    bool all_dense() const;

    /// Compressible linear positions in forward topological order.
    std::vector<LinearSlot*> linear_slots();
    std::vector<const LinearSlot*> linear_slots() const;
};

RecModel init_model(const ModelConfig& cfg, uint64_t seed);

/// Called with (layer id, input vector) for every token passing through a
/// linear slot during forward_hidden.
using ActivationHook = std::function<void(const std::string&, std::span<const double>)>;

/// Runs the model over one token sequence; returns the final-LN hidden
/// states, one row per token. Sequences longer than max_len keep their last
/// max_len tokens.
Mat forward_hidden(const RecModel& m, std::span<const ItemId> items,
                   const ActivationHook* hook = nullptr);

/// Scores for every item given a nonempty context.
std::vector<double> score_next(const RecModel& m, std::span<const ItemId> context);

/// Autoregressive cross-entropy on the leave-last-two training split.
/// Deterministic for a fixed seed. epoch_hook, when set, runs after each
/// epoch with (epoch index, mean training loss).
using EpochHook = std::function<void(int, double)>;
RecModel train(RecModel model, const ItemSequenceDataset& ds, const TrainConfig& cfg,
               const EpochHook* epoch_hook = nullptr);

}  // namespace odlm::rec
