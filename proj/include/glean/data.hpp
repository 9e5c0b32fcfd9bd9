#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "glean/matrix.hpp"

namespace glean::data {

struct Instance {
    std::string id;
    std::optional<std::string> text;
    std::vector<double> h;  // base embedding, D entries, all finite
    std::optional<std::string> label;
    bool is_labeled = false;
};

enum class DatasetFormat { jsonl, jsonl_binary };

// Instances plus the index structures every other module wants.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Instance> instances);

    const std::vector<Instance>& instances() const { return instances_; }
    std::size_t size() const { return instances_.size(); }
    std::size_t dim() const { return dim_; }

    const Instance& by_id(const std::string& id) const;
    std::size_t index_of(const std::string& id) const;
    bool contains(const std::string& id) const { return index_.count(id) > 0; }

    // N x D matrix of base embeddings, rows in instance order.
    Matrix embedding_matrix() const;

private:
    std::vector<Instance> instances_;
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t dim_ = 0;
};

struct GcdSplit {
    std::set<std::string> known_categories;
    std::set<std::string> labeled_ids;    // D_l
    std::set<std::string> unlabeled_ids;  // D_u
    int K_total = 0;
    double kcr = 0.0;
    double labeled_fraction = 0.0;
    std::uint64_t seed = 0;
};

struct NeighborTable {
    int k = 0;
    // id -> k nearest ids, ascending by distance, ties by ascending id
    std::map<std::string, std::vector<std::string>> neighbors;
};

// `allow_missing_embeddings`: keep instances without an `embedding` field so a
// configured encoder provider can fill them in later. Off by default; the
// engine never fabricates embeddings silently.
std::vector<Instance> load_dataset(const std::string& path, DatasetFormat format,
                                   bool allow_missing_embeddings = false);

int round_half_up(double x);

GcdSplit make_gcd_split(const std::vector<Instance>& instances, double kcr,
                        double labeled_fraction, int K_total, std::uint64_t seed);

// Sets is_labeled flags per the split. `label` stays populated on every
// instance as ground truth (the oracle provider and eval need it); is_labeled
// gates what the training loop may look at.
Dataset apply_split(std::vector<Instance> instances, const GcdSplit& split);

NeighborTable build_neighbor_table(const Dataset& dataset, int k);

std::string split_to_json(const GcdSplit& split);
GcdSplit split_from_json(const std::string& text);

}  // namespace glean::data
