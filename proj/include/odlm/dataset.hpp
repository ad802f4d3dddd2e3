#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odlm/errors.hpp"

namespace odlm::rec {

using ItemId = int32_t;

struct ItemSequenceDataset {
    struct Sequence {
        std::string user_id;
        std::vector<ItemId> items;  // chronological
    };
    std::vector<Sequence> sequences;
    int num_items = 0;
    int num_users = 0;
};

/// Planted-cluster size used by generate_synthetic.
constexpr int kClusterSize = 8;

inline int cluster_of(ItemId item) { return item / kClusterSize; }

/// First-order Markov chains over items with planted block structure:
/// within-cluster transitions carry 10x the per-item weight of cross-cluster
/// ones. Sequence lengths are uniform in [5, 20]. Deterministic in its
/// arguments.
ItemSequenceDataset generate_synthetic(int num_users, int num_items, uint64_t seed);

/// Line format: "<user> <item> <item> ...", `#` starts a comment line.
/// Item ids are re-indexed densely in ascending order of the original ids.
ItemSequenceDataset load_dataset(const std::string& path);

void save_dataset(const ItemSequenceDataset& ds, const std::string& path);

struct EvalCase {
    std::vector<ItemId> context;
    ItemId target;
};

struct EvalSplit {
    std::vector<EvalCase> cases;
};

/// Per-user leave-last-two protocol: for a sequence v_1..v_l the test target
/// is v_l, the validation target v_{l-1}, and the training view keeps the
/// prefix of length l-2.
struct SplitViews {
    std::vector<std::vector<ItemId>> train;  // per-user prefixes
    EvalSplit valid;
    EvalSplit test;
};

SplitViews split_leave_last_two(const ItemSequenceDataset& ds);

}  // namespace odlm::rec
