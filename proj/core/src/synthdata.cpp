#include "amdmil/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include <json.hpp>

#include "amdmil/error.hpp"
#include "byte_io.hpp"

namespace amdmil {

namespace fs = std::filesystem;
using nlohmann::json;

void DatasetConfig::validate() const {
    if (num_bags == 0) throw ConfigError("num_bags must be >= 1");
    if (dim == 0) throw ConfigError("dim must be >= 1");
    if (min_instances == 0) throw ConfigError("min_instances must be >= 1");
    if (max_instances < min_instances) throw ConfigError("max_instances must be >= min_instances");
    if (!(witness_rate > 0.0 && witness_rate <= 1.0)) throw ConfigError("witness_rate must lie in (0, 1]");
    if (classes < 2) throw ConfigError("classes must be >= 2");
    if (!(separation >= 0.0) || !std::isfinite(separation)) throw ConfigError("separation must be >= 0");
    if (!(noise_std > 0.0) || !std::isfinite(noise_std)) throw ConfigError("noise_std must be > 0");
}

std::size_t DatasetConfig::witness_count(std::size_t instances) const {
    // The small slack keeps e.g. 0.05 * 100 from rounding up to 6.
    const auto w = static_cast<std::size_t>(std::ceil(witness_rate * static_cast<double>(instances) - 1e-9));
    return std::clamp<std::size_t>(w, 1, instances);
}

std::vector<Bag> generate_dataset(const DatasetConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> noise(0.0, cfg.noise_std);
    std::uniform_int_distribution<std::size_t> size_dist(cfg.min_instances, cfg.max_instances);

    std::vector<std::uint32_t> labels(cfg.num_bags);
    for (std::size_t b = 0; b < cfg.num_bags; ++b) labels[b] = static_cast<std::uint32_t>(b % cfg.classes);
    std::shuffle(labels.begin(), labels.end(), rng);

    const int width = std::max<int>(4, static_cast<int>(std::to_string(cfg.num_bags - 1).size()));
    std::vector<Bag> bags;
    bags.reserve(cfg.num_bags);
    for (std::size_t b = 0; b < cfg.num_bags; ++b) {
        Bag bag;
        std::string num = std::to_string(b);
        bag.id = "bag_" + std::string(static_cast<std::size_t>(width) - std::min<std::size_t>(width, num.size()), '0') + num;
        bag.label = labels[b];
        const std::size_t n = size_dist(rng);
        bag.features = Matrix(n, cfg.dim);
        for (double& x : bag.features.data()) x = noise(rng);

        std::vector<std::uint8_t> inst(n, 0);
        if (bag.label > 0) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            const std::size_t axis = (bag.label - 1) % cfg.dim;
            for (std::size_t w = 0; w < cfg.witness_count(n); ++w) {
                inst[order[w]] = 1;
                bag.features(order[w], axis) += cfg.separation;
            }
        }
        // Stored as float32 on disk; keep the in-memory copy identical.
        for (double& x : bag.features.data()) x = static_cast<double>(static_cast<float>(x));
        bag.instance_labels = std::move(inst);
        bags.push_back(std::move(bag));
    }
    return bags;
}

std::vector<unsigned char> encode_bag(const Bag& bag) {
    if (bag.instance_labels && bag.instance_labels->size() != bag.size()) {
        throw ShapeError("encode_bag: instance label count does not match N for bag " + bag.id);
    }
    detail::ByteWriter w;
    w.bytes("MILF");
    w.u32(kBagFileVersion);
    w.u32(static_cast<std::uint32_t>(bag.size()));
    w.u32(static_cast<std::uint32_t>(bag.dim()));
    w.u32(bag.label);
    w.u32(bag.instance_labels ? 1u : 0u);
    if (bag.instance_labels)
        for (std::uint8_t y : *bag.instance_labels) w.u8(y);
    for (double v : bag.features.data()) w.f32(static_cast<float>(v));
    return w.take();
}

Bag decode_bag(const std::vector<unsigned char>& bytes, std::string id) {
    detail::ByteReader r(bytes, "bag record '" + id + "'");
    if (r.bytes(4) != "MILF") r.fail("bad magic (expected MILF)");
    const std::uint32_t version = r.u32();
    if (version != kBagFileVersion) r.fail("unsupported version " + std::to_string(version));
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    Bag bag;
    bag.id = std::move(id);
    bag.label = r.u32();
    const std::uint32_t has_labels = r.u32();
    if (has_labels > 1) r.fail("has_instance_labels must be 0 or 1");
    if (n == 0 || d == 0) r.fail("empty bag (N and D must be >= 1)");
    if (has_labels == 1) {
        r.need(n, "instance labels");
        std::vector<std::uint8_t> labels(n);
        for (auto& y : labels) y = r.u8();
        bag.instance_labels = std::move(labels);
    }
    const std::uint64_t count = static_cast<std::uint64_t>(n) * d;
    r.need(count * 4, "features");
    std::vector<double> data(count);
    for (auto& v : data) v = r.f32();
    if (!r.at_end()) r.fail("trailing bytes after features");
    bag.features = Matrix(n, d, std::move(data));
    return bag;
}

void save_bag(const Bag& bag, const fs::path& path) { detail::write_file(path, encode_bag(bag)); }

Bag load_bag(const fs::path& path) { return decode_bag(detail::read_file(path), path.stem().string()); }

namespace {

json config_to_json(const DatasetConfig& c) {
    return json{{"seed", c.seed},
                {"num_bags", c.num_bags},
                {"dim", c.dim},
                {"min_instances", c.min_instances},
                {"max_instances", c.max_instances},
                {"witness_rate", c.witness_rate},
                {"classes", c.classes},
                {"separation", c.separation},
                {"noise_std", c.noise_std}};
}

fs::path manifest_path(const fs::path& p) { return fs::is_directory(p) ? p / "manifest.json" : p; }

json read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what() + " at byte offset " +
                          std::to_string(e.byte));
    }
    if (!j.contains("version") || j["version"] != kManifestVersion) {
        throw FormatError("manifest " + path.string() + ": missing or unsupported version");
    }
    if (!j.contains("records") || !j["records"].is_array()) {
        throw FormatError("manifest " + path.string() + ": missing records array");
    }
    return j;
}

}  // namespace

void save_bags(const std::vector<Bag>& bags, const fs::path& dir, const DatasetConfig* cfg) {
    fs::create_directories(dir);
    json records = json::array();
    for (const Bag& bag : bags) {
        const std::string name = bag.id + ".milf";
        save_bag(bag, dir / name);
        records.push_back(name);
    }
    json manifest{{"version", kManifestVersion}, {"records", records}};
    manifest["config"] = cfg ? config_to_json(*cfg) : json(nullptr);
    std::ofstream out(dir / "manifest.json", std::ios::trunc);
    if (!out) throw Error("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

std::vector<Bag> load_bags(const fs::path& dir_or_manifest) {
    const fs::path mpath = manifest_path(dir_or_manifest);
    const json manifest = read_manifest(mpath);
    std::vector<Bag> bags;
    for (const auto& rec : manifest["records"]) {
        if (!rec.is_string()) throw FormatError("manifest " + mpath.string() + ": record entries must be strings");
        fs::path p = rec.get<std::string>();
        if (p.is_relative()) p = mpath.parent_path() / p;
        bags.push_back(load_bag(p));
    }
    return bags;
}

std::optional<DatasetConfig> load_manifest_config(const fs::path& dir_or_manifest) {
    const json manifest = read_manifest(manifest_path(dir_or_manifest));
    if (!manifest.contains("config") || manifest["config"].is_null()) return std::nullopt;
    const json& j = manifest["config"];
    DatasetConfig c;
    c.seed = j.value("seed", c.seed);
    c.num_bags = j.value("num_bags", c.num_bags);
    c.dim = j.value("dim", c.dim);
    c.min_instances = j.value("min_instances", c.min_instances);
    c.max_instances = j.value("max_instances", c.max_instances);
    c.witness_rate = j.value("witness_rate", c.witness_rate);
    c.classes = j.value("classes", c.classes);
    c.separation = j.value("separation", c.separation);
    c.noise_std = j.value("noise_std", c.noise_std);
    return c;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
        if (fold_of[i] != fold) out.push_back(i);
    return out;
}

std::size_t FoldPlan::fold_of_id(const std::string& id) const {
    auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) throw ConfigError("fold plan has no bag '" + id + "'");
    return fold_of[static_cast<std::size_t>(it - ids.begin())];
}

FoldPlan split_folds(const std::vector<Bag>& bags, std::size_t k, std::uint64_t seed, bool stratified) {
    if (k == 0) throw ConfigError("split_folds: k must be >= 1");
    if (k > bags.size()) {
        throw ConfigError("split_folds: k=" + std::to_string(k) + " exceeds bag count " + std::to_string(bags.size()));
    }
    FoldPlan plan;
    plan.k = k;
    plan.stratified = stratified;
    plan.fold_of.assign(bags.size(), 0);
    for (const Bag& b : bags) plan.ids.push_back(b.id);

    std::mt19937_64 rng(seed);
    std::map<std::uint32_t, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < bags.size(); ++i) groups[stratified ? bags[i].label : 0u].push_back(i);

    std::size_t counter = 0;
    for (auto& [label, idx] : groups) {
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i : idx) plan.fold_of[i] = counter++ % k;
    }
    return plan;
}

}  // namespace amdmil
