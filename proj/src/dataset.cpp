#include "odlm/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace odlm::rec {

ItemSequenceDataset generate_synthetic(int num_users, int num_items, uint64_t seed) {
    if (num_items < 8) throw DataError("generate_synthetic: need at least 8 items");
    if (num_users <= 0) throw DataError("generate_synthetic: need at least one user");

    std::mt19937_64 gen(seed);
    std::uniform_int_distribution<int> len_dist(5, 20);
    std::uniform_int_distribution<ItemId> start_dist(0, num_items - 1);

    ItemSequenceDataset ds;
    ds.num_items = num_items;
    ds.num_users = num_users;
    ds.sequences.reserve(num_users);

    for (int u = 0; u < num_users; ++u) {
        const int len = len_dist(gen);
        std::vector<ItemId> items;
        items.reserve(len);
        ItemId cur = start_dist(gen);
        items.push_back(cur);
        for (int t = 1; t < len; ++t) {
            const int c = cluster_of(cur);
            const ItemId c_lo = static_cast<ItemId>(c) * kClusterSize;
            const ItemId c_hi = std::min<ItemId>(c_lo + kClusterSize, num_items);
            const int n_in = (c_hi - c_lo) - 1;  // cluster mates, excluding current
            const long total = 10L * n_in + (num_items - (c_hi - c_lo));
            std::uniform_int_distribution<long> pick(0, total - 1);
            const long r = pick(gen);
            ItemId next;
            if (r < 10L * n_in) {
                int idx = static_cast<int>(r / 10);  // index among cluster mates
                next = c_lo + idx;
                if (next >= cur) ++next;  // skip current item
            } else {
                int idx = static_cast<int>(r - 10L * n_in);  // index among outside items
                next = (idx < c_lo) ? idx : idx + (c_hi - c_lo);
            }
            items.push_back(next);
            cur = next;
        }
        ds.sequences.push_back({"u" + std::to_string(u), std::move(items)});
    }
    return ds;
}

ItemSequenceDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("load_dataset: cannot open " + path);

    ItemSequenceDataset ds;
    std::vector<std::string> too_short;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string user;
        if (!(ss >> user)) continue;  // whitespace-only line
        std::vector<ItemId> items;
        std::string tok;
        while (ss >> tok) {
            size_t pos = 0;
            long v = 0;
            try {
                v = std::stol(tok, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos != tok.size() || v < 0)
                throw ParseError("load_dataset: bad item id '" + tok + "' at line " +
                                 std::to_string(line_no));
            items.push_back(static_cast<ItemId>(v));
        }
        if (items.size() < 3) {
            too_short.push_back(user);
            continue;
        }
        ds.sequences.push_back({user, std::move(items)});
    }
    if (!too_short.empty()) {
        std::string msg = "load_dataset: sequences shorter than 3 items for users:";
        for (const auto& u : too_short) msg += " " + u;
        throw TooShortSequence(msg);
    }
    if (ds.sequences.empty()) throw ParseError("load_dataset: no sequences in " + path);

    // dense re-indexing by ascending original id
    std::map<ItemId, ItemId> remap;
    for (const auto& s : ds.sequences)
        for (ItemId v : s.items) remap.emplace(v, 0);
    ItemId next_id = 0;
    for (auto& [orig, dense] : remap) dense = next_id++;
    for (auto& s : ds.sequences)
        for (ItemId& v : s.items) v = remap.at(v);

    ds.num_items = next_id;
    ds.num_users = static_cast<int>(ds.sequences.size());
    return ds;
}

void save_dataset(const ItemSequenceDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("save_dataset: cannot open " + path + " for writing");
    for (const auto& s : ds.sequences) {
        out << s.user_id;
        for (ItemId v : s.items) out << ' ' << v;
        out << '\n';
    }
    if (!out) throw IoError("save_dataset: write failed for " + path);
}

SplitViews split_leave_last_two(const ItemSequenceDataset& ds) {
    SplitViews views;
    views.train.reserve(ds.sequences.size());
    views.valid.cases.reserve(ds.sequences.size());
    views.test.cases.reserve(ds.sequences.size());
    for (const auto& s : ds.sequences) {
        if (s.items.size() < 3)
            throw TooShortSequence("split_leave_last_two: sequence for " + s.user_id +
                                   " shorter than 3 items");
        const size_t l = s.items.size();
        std::vector<ItemId> prefix(s.items.begin(), s.items.begin() + (l - 2));
        views.valid.cases.push_back({prefix, s.items[l - 2]});
        std::vector<ItemId> test_ctx(s.items.begin(), s.items.begin() + (l - 1));
        views.test.cases.push_back({std::move(test_ctx), s.items[l - 1]});
        views.train.push_back(std::move(prefix));
    }
    return views;
}

}  // namespace odlm::rec
