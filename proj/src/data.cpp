#include "glean/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "glean/kernels.hpp"
#include "glean/rng.hpp"

namespace glean::data {

using nlohmann::json;

Dataset::Dataset(std::vector<Instance> instances) : instances_(std::move(instances)) {
    index_.reserve(instances_.size());
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        if (!index_.emplace(instances_[i].id, i).second) {
            throw std::runtime_error("duplicate instance id: " + instances_[i].id);
        }
    }
    if (!instances_.empty()) dim_ = instances_.front().h.size();
    for (const auto& inst : instances_) {
        if (inst.h.size() != dim_) {
            throw std::runtime_error("embedding dimension mismatch for id " + inst.id);
        }
    }
}

const Instance& Dataset::by_id(const std::string& id) const {
    return instances_[index_of(id)];
}

std::size_t Dataset::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::runtime_error("unknown instance id: " + id);
    return it->second;
}

Matrix Dataset::embedding_matrix() const {
    Matrix m(instances_.size(), dim_);
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        std::copy(instances_[i].h.begin(), instances_[i].h.end(), m.row(i));
    }
    return m;
}

namespace {

[[noreturn]] void fail_line(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::vector<float>> read_binary_sidecar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open embedding sidecar: " + path);
    std::uint64_t count = 0, dim = 0;
    unsigned char hdr[16];
    if (!in.read(reinterpret_cast<char*>(hdr), 16)) {
        throw std::runtime_error("embedding sidecar truncated header: " + path);
    }
    for (int i = 7; i >= 0; --i) count = (count << 8) | hdr[i];
    for (int i = 15; i >= 8; --i) dim = (dim << 8) | hdr[i];
    std::vector<std::vector<float>> rows(count, std::vector<float>(dim));
    std::vector<unsigned char> buf(dim * 4);
    for (std::uint64_t r = 0; r < count; ++r) {
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
            throw std::runtime_error("embedding sidecar truncated at row " + std::to_string(r));
        }
        for (std::uint64_t c = 0; c < dim; ++c) {
            std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * c]) |
                                 (static_cast<std::uint32_t>(buf[4 * c + 1]) << 8) |
                                 (static_cast<std::uint32_t>(buf[4 * c + 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[4 * c + 3]) << 24);
            float f;
            std::memcpy(&f, &bits, 4);
            rows[r][c] = f;
        }
    }
    return rows;
}

}  // namespace

std::vector<Instance> load_dataset(const std::string& path, DatasetFormat format,
                                   bool allow_missing_embeddings) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path);

    std::vector<std::vector<float>> sidecar;
    if (format == DatasetFormat::jsonl_binary) {
        sidecar = read_binary_sidecar(path + ".bin");
    }

    std::vector<Instance> out;
    std::set<std::string> seen_ids;
    std::size_t dim = 0;
    bool dim_known = false;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            fail_line(path, lineno, std::string("malformed record: ") + e.what());
        }
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string()) {
            fail_line(path, lineno, "record must be an object with a string `id`");
        }
        Instance inst;
        inst.id = rec["id"].get<std::string>();
        if (!seen_ids.insert(inst.id).second) {
            fail_line(path, lineno, "duplicate id: " + inst.id);
        }
        if (rec.contains("text")) {
            if (!rec["text"].is_string()) fail_line(path, lineno, "`text` must be a string");
            inst.text = rec["text"].get<std::string>();
        }
        if (rec.contains("label")) {
            if (!rec["label"].is_string()) fail_line(path, lineno, "`label` must be a string");
            inst.label = rec["label"].get<std::string>();
        }
        if (rec.contains("labeled")) {
            if (!rec["labeled"].is_boolean()) fail_line(path, lineno, "`labeled` must be a boolean");
            inst.is_labeled = rec["labeled"].get<bool>();
        }
        if (inst.is_labeled && !inst.label) {
            fail_line(path, lineno, "labeled instance without a label");
        }

        if (format == DatasetFormat::jsonl_binary) {
            const std::size_t row = out.size();
            if (row >= sidecar.size()) {
                fail_line(path, lineno, "more records than embedding sidecar rows");
            }
            inst.h.assign(sidecar[row].begin(), sidecar[row].end());
        } else if (rec.contains("embedding")) {
            if (!rec["embedding"].is_array()) fail_line(path, lineno, "`embedding` must be an array");
            inst.h.reserve(rec["embedding"].size());
            for (const auto& v : rec["embedding"]) {
                if (!v.is_number()) fail_line(path, lineno, "`embedding` entries must be numbers");
                inst.h.push_back(v.get<double>());
            }
        }

        if (inst.h.empty()) {
            if (!allow_missing_embeddings) {
                fail_line(path, lineno,
                          "instance has no embedding and no encoder provider is configured");
            }
        } else {
            for (double v : inst.h) {
                if (!std::isfinite(v)) fail_line(path, lineno, "non-finite embedding value");
            }
            if (!dim_known) {
                dim = inst.h.size();
                dim_known = true;
            } else if (inst.h.size() != dim) {
                fail_line(path, lineno,
                          "embedding dimension mismatch: expected " + std::to_string(dim) +
                              ", got " + std::to_string(inst.h.size()));
            }
        }
        out.push_back(std::move(inst));
    }
    if (format == DatasetFormat::jsonl_binary && out.size() != sidecar.size()) {
        throw std::runtime_error(path + ": sidecar row count " + std::to_string(sidecar.size()) +
                                 " does not match record count " + std::to_string(out.size()));
    }
    return out;
}

int round_half_up(double x) {
    return static_cast<int>(std::floor(x + 0.5));
}

GcdSplit make_gcd_split(const std::vector<Instance>& instances, double kcr,
                        double labeled_fraction, int K_total, std::uint64_t seed) {
    if (!(kcr > 0.0 && kcr <= 1.0)) throw std::invalid_argument("kcr must be in (0, 1]");
    if (!(labeled_fraction >= 0.0 && labeled_fraction <= 1.0)) {
        throw std::invalid_argument("labeled_fraction must be in [0, 1]");
    }
    if (K_total <= 0) throw std::invalid_argument("K_total must be positive");

    std::map<std::string, std::vector<std::string>> by_label;
    for (const auto& inst : instances) {
        if (!inst.label) {
            throw std::runtime_error("split requires ground-truth labels; instance " + inst.id +
                                     " has none");
        }
        by_label[*inst.label].push_back(inst.id);
    }

    const int n_known = round_half_up(kcr * K_total);
    if (n_known == 0) throw std::runtime_error("kcr * K_total rounds to zero known categories");
    if (static_cast<std::size_t>(n_known) > by_label.size()) {
        throw std::runtime_error("requested " + std::to_string(n_known) +
                                 " known categories but dataset has only " +
                                 std::to_string(by_label.size()));
    }

    std::vector<std::string> categories;
    categories.reserve(by_label.size());
    for (const auto& [name, ids] : by_label) categories.push_back(name);
    Rng cat_rng(derive_seed(seed, "split.categories"));
    cat_rng.shuffle(categories);

    GcdSplit split;
    split.K_total = K_total;
    split.kcr = kcr;
    split.labeled_fraction = labeled_fraction;
    split.seed = seed;
    for (int i = 0; i < n_known; ++i) split.known_categories.insert(categories[i]);

    for (const auto& name : split.known_categories) {
        auto ids = by_label.at(name);
        if (ids.empty()) throw std::runtime_error("known category has no instances: " + name);
        std::sort(ids.begin(), ids.end());
        Rng rng(derive_seed(seed, "split.labeled." + name));
        rng.shuffle(ids);
        const int n_labeled = round_half_up(labeled_fraction * static_cast<double>(ids.size()));
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (i < static_cast<std::size_t>(n_labeled)) {
                split.labeled_ids.insert(ids[i]);
            } else {
                split.unlabeled_ids.insert(ids[i]);
            }
        }
    }
    for (const auto& [name, ids] : by_label) {
        if (split.known_categories.count(name)) continue;
        for (const auto& id : ids) split.unlabeled_ids.insert(id);
    }
    return split;
}

Dataset apply_split(std::vector<Instance> instances, const GcdSplit& split) {
    for (auto& inst : instances) {
        const bool labeled = split.labeled_ids.count(inst.id) > 0;
        const bool unlabeled = split.unlabeled_ids.count(inst.id) > 0;
        if (labeled == unlabeled) {
            throw std::runtime_error("instance " + inst.id +
                                     (labeled ? " is in both split sides" : " missing from split"));
        }
        inst.is_labeled = labeled;
        if (labeled) {
            if (!inst.label) throw std::runtime_error("labeled instance without label: " + inst.id);
            if (!split.known_categories.count(*inst.label)) {
                throw std::runtime_error("labeled instance " + inst.id +
                                         " carries a label outside known categories");
            }
        }
    }
    return Dataset(std::move(instances));
}

NeighborTable build_neighbor_table(const Dataset& dataset, int k) {
    const std::size_t n = dataset.size();
    if (k <= 0) throw std::invalid_argument("k must be positive");
    if (static_cast<std::size_t>(k) >= n) {
        throw std::invalid_argument("k must be smaller than the number of instances");
    }
    const Matrix emb = dataset.embedding_matrix();
    const std::size_t d = dataset.dim();

    NeighborTable table;
    table.k = k;
    std::vector<std::pair<double, std::size_t>> dists(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            dists[j] = {kernels::l2sq(emb.row(i), emb.row(j), d), j};
        }
        // Self excluded; ties broken by ascending id.
        auto cmp = [&](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return dataset.instances()[a.second].id < dataset.instances()[b.second].id;
        };
        std::swap(dists[i], dists[n - 1]);
        std::partial_sort(dists.begin(), dists.begin() + k, dists.end() - 1, cmp);
        std::vector<std::string> ids;
        ids.reserve(k);
        for (int r = 0; r < k; ++r) ids.push_back(dataset.instances()[dists[r].second].id);
        table.neighbors.emplace(dataset.instances()[i].id, std::move(ids));
    }
    return table;
}

std::string split_to_json(const GcdSplit& split) {
    json j;
    j["known_categories"] = split.known_categories;
    j["labeled_ids"] = split.labeled_ids;
    j["unlabeled_ids"] = split.unlabeled_ids;
    j["K_total"] = split.K_total;
    j["kcr"] = split.kcr;
    j["labeled_fraction"] = split.labeled_fraction;
    j["seed"] = split.seed;
    return j.dump(2) + "\n";
}

GcdSplit split_from_json(const std::string& text) {
    json j = json::parse(text);
    GcdSplit split;
    split.known_categories = j.at("known_categories").get<std::set<std::string>>();
    split.labeled_ids = j.at("labeled_ids").get<std::set<std::string>>();
    split.unlabeled_ids = j.at("unlabeled_ids").get<std::set<std::string>>();
    split.K_total = j.at("K_total").get<int>();
    split.kcr = j.at("kcr").get<double>();
    split.labeled_fraction = j.at("labeled_fraction").get<double>();
    split.seed = j.at("seed").get<std::uint64_t>();
    return split;
}

}  // namespace glean::data
