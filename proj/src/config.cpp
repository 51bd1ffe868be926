// Copyright (c) 2026, The dualproto Authors
// SPDX-License-Identifier: Apache-2.0

#include "dualproto/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "dualproto/errors.hpp"

namespace dualproto {

using nlohmann::json;

namespace {

const std::vector<std::pair<Variant, const char*>>& variant_names() {
    static const std::vector<std::pair<Variant, const char*>> names = {
        {Variant::full, "full"},
        {Variant::no_share, "no_share"},
        {Variant::no_decision, "no_decision"},
        {Variant::no_hard, "no_hard"},
        {Variant::no_personalization, "no_personalization"},
        {Variant::l2_only_baseline, "l2_only_baseline"},
    };
    return names;
}

[[noreturn]] void bad(const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
}

std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

// Overlays `src` onto `dst`, refusing keys `dst` does not already have.
void merge_checked(json& dst, const json& src, const std::string& prefix) {
    if (!src.is_object()) bad(prefix.empty() ? "<root>" : prefix, "expected an object");
    for (auto it = src.begin(); it != src.end(); ++it) {
        const std::string key = join(prefix, it.key());
        if (!dst.contains(it.key())) bad(key, "unknown key");
        json& slot = dst[it.key()];
        if (slot.is_object()) {
            merge_checked(slot, it.value(), key);
        } else {
            slot = it.value();
        }
    }
}

// Plain recursive overlay used to stack user layers before checking.
void merge_into(json& dst, const json& src) {
    for (auto it = src.begin(); it != src.end(); ++it) {
        if (dst.contains(it.key()) && dst[it.key()].is_object() && it.value().is_object()) {
            merge_into(dst[it.key()], it.value());
        } else {
            dst[it.key()] = it.value();
        }
    }
}

bool is_non_negative_integer(const json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

class Fields {
public:
    Fields(const json& node, std::string prefix) : node_(node), prefix_(std::move(prefix)) {}

    const json& raw(const std::string& key) const { return node_.at(key); }
    std::string path(const std::string& key) const { return join(prefix_, key); }

    std::size_t count(const std::string& key) const { return u64(key); }
    std::uint64_t u64(const std::string& key) const {
        const json& v = raw(key);
        if (!is_non_negative_integer(v)) bad(path(key), "expected a non-negative integer, got " + v.dump());
        return v.get<std::uint64_t>();
    }
    double real(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_number()) bad(path(key), "expected a number, got " + v.dump());
        return v.get<double>();
    }
    bool flag(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_boolean()) bad(path(key), "expected true or false, got " + v.dump());
        return v.get<bool>();
    }
    std::string text(const std::string& key) const {
        const json& v = raw(key);
        if (!v.is_string()) bad(path(key), "expected a string, got " + v.dump());
        return v.get<std::string>();
    }
    Fields sub(const std::string& key) const {
        if (!raw(key).is_object()) bad(path(key), "expected an object");
        return Fields(raw(key), path(key));
    }

private:
    const json& node_;
    std::string prefix_;
};

json label_column_json(const LabelColumn& col) {
    if (const auto* name = std::get_if<std::string>(&col)) return *name;
    return std::get<std::size_t>(col);
}

json set_path(const std::string& dotted, json value) {
    json root = json::object();
    json* cur = &root;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) bad(dotted, "malformed key path");
        if (dot == std::string::npos) {
            (*cur)[part] = std::move(value);
            break;
        }
        cur = &(*cur)[part];
        start = dot + 1;
    }
    return root;
}

}  // namespace

Variant parse_variant(const std::string& name) {
    for (const auto& [v, n] : variant_names())
        if (name == n) return v;
    throw ConfigError("unknown variant '" + name + "'");
}

std::string to_string(Variant v) {
    for (const auto& [x, n] : variant_names())
        if (x == v) return n;
    return "unknown";
}

const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> all = [] {
        std::vector<Variant> out;
        for (const auto& [v, n] : variant_names()) out.push_back(v);
        return out;
    }();
    return all;
}

void RunConfig::validate() const {
    if (dataset.kind == "synthetic") {
        if (dataset.num_classes < 2) bad("dataset.num_classes", "must be >= 2");
        if (dataset.per_class < 1) bad("dataset.per_class", "must be >= 1");
        if (dataset.input_dim < 1) bad("dataset.input_dim", "must be >= 1");
        if (!(dataset.separation > 0.0)) bad("dataset.separation", "must be > 0");
    } else if (dataset.kind == "csv") {
        if (dataset.csv_path.empty()) bad("dataset.csv_path", "required when dataset.kind is csv");
    } else {
        bad("dataset.kind", "must be 'synthetic' or 'csv'");
    }
    if (partition.clients < 2) bad("partition.clients", "must be >= 2");
    if (!(partition.alpha > 0.0)) bad("partition.alpha", "must be > 0");
    if (!(partition.test_fraction > 0.0 && partition.test_fraction < 1.0)) {
        bad("partition.test_fraction", "must lie in (0, 1)");
    }
    if (model.architectures.empty()) bad("model.architectures", "must list at least one architecture");
    for (const auto& arch : model.architectures)
        for (std::size_t w : arch)
            if (w == 0) bad("model.architectures", "hidden widths must be >= 1");
    if (model.d_z < 1) bad("model.d_z", "must be >= 1");
    if (training.rounds < 1) bad("training.rounds", "must be >= 1");
    if (training.epochs < 1) bad("training.epochs", "must be >= 1");
    if (training.batch_size < 1) bad("training.batch_size", "must be >= 1");
    if (!(training.lr > 0.0)) bad("training.lr", "must be > 0");
    if (!(training.participation > 0.0 && training.participation <= 1.0)) {
        bad("training.participation", "must lie in (0, 1]");
    }
    if (!(loss.tau > 0.0)) bad("loss.tau", "must be > 0");
    if (!(loss.lambda1 >= 0.0)) bad("loss.lambda1", "must be >= 0");
    if (!(loss.lambda2 >= 0.0)) bad("loss.lambda2", "must be >= 0");
    if (!(loss.lambda3 >= 0.0)) bad("loss.lambda3", "must be >= 0");
    if (!(fusion.eta >= 0.0 && fusion.eta <= 1.0)) bad("fusion.eta", "must lie in [0, 1]");
    if (fusion.k_top < 1 || fusion.k_top > model.d_z) {
        bad("fusion.k_top", "must lie in [1, model.d_z=" + std::to_string(model.d_z) + "], got " +
                                std::to_string(fusion.k_top));
    }
    if (seeds.empty()) bad("seeds", "must list at least one seed");
    if (output_dir.empty()) bad("output_dir", "must not be empty");
    for (double a : sweep.alphas)
        if (!(a > 0.0)) bad("sweep.alphas", "every alpha must be > 0");
    for (std::size_t e : sweep.epochs)
        if (e < 1) bad("sweep.epochs", "every epoch count must be >= 1");
}

json profile_tree(const std::string& name) {
    if (name == "paper") return json::object();
    if (name == "desk") {
        return json{
            {"dataset", {{"num_classes", 10}, {"per_class", 200}}},
            {"partition", {{"clients", 8}}},
            {"model", {{"d_z", 32}}},
            {"training", {{"rounds", 30}}},
            {"fusion", {{"k_top", 2}}},
        };
    }
    throw ConfigError("unknown profile '" + name + "' (expected 'paper' or 'desk')");
}

json to_json(const RunConfig& c) {
    json seeds = json::array();
    for (auto s : c.seeds) seeds.push_back(s);
    return json{
        {"dataset",
         {{"kind", c.dataset.kind},
          {"num_classes", c.dataset.num_classes},
          {"per_class", c.dataset.per_class},
          {"input_dim", c.dataset.input_dim},
          {"separation", c.dataset.separation},
          {"seed", c.dataset.seed},
          {"csv_path", c.dataset.csv_path},
          {"label_column", label_column_json(c.dataset.label_column)}}},
        {"partition",
         {{"clients", c.partition.clients},
          {"alpha", c.partition.alpha},
          {"seed", c.partition.seed},
          {"test_fraction", c.partition.test_fraction}}},
        {"model",
         {{"architectures", c.model.architectures},
          {"activation", to_string(c.model.activation)},
          {"d_z", c.model.d_z},
          {"separate_decision_head", c.model.separate_decision_head}}},
        {"training",
         {{"rounds", c.training.rounds},
          {"epochs", c.training.epochs},
          {"batch_size", c.training.batch_size},
          {"lr", c.training.lr},
          {"participation", c.training.participation}}},
        {"loss",
         {{"tau", c.loss.tau},
          {"lambda1", c.loss.lambda1},
          {"lambda2", c.loss.lambda2},
          {"lambda3", c.loss.lambda3},
          {"hard_mining", c.loss.hard_mining},
          {"l_d_form", to_string(c.loss.l_d_form)}}},
        {"fusion", {{"eta", c.fusion.eta}, {"k_top", c.fusion.k_top}}},
        {"normalize_inference", c.normalize_inference},
        {"variant", to_string(c.variant)},
        {"seeds", seeds},
        {"output_dir", c.output_dir},
        {"workers", c.workers},
        {"sweep", {{"alphas", c.sweep.alphas}, {"epochs", c.sweep.epochs}}},
    };
}

RunConfig config_from_json(const json& tree) {
    json merged = to_json(RunConfig{});
    merge_checked(merged, tree, "");
    const Fields root(merged, "");
    RunConfig c;

    const Fields ds = root.sub("dataset");
    c.dataset.kind = ds.text("kind");
    c.dataset.num_classes = ds.count("num_classes");
    c.dataset.per_class = ds.count("per_class");
    c.dataset.input_dim = ds.count("input_dim");
    c.dataset.separation = ds.real("separation");
    c.dataset.seed = ds.u64("seed");
    c.dataset.csv_path = ds.text("csv_path");
    if (ds.raw("label_column").is_string()) {
        c.dataset.label_column = ds.text("label_column");
    } else {
        c.dataset.label_column = ds.count("label_column");
    }

    const Fields part = root.sub("partition");
    c.partition.clients = part.count("clients");
    c.partition.alpha = part.real("alpha");
    c.partition.seed = part.u64("seed");
    c.partition.test_fraction = part.real("test_fraction");

    const Fields model = root.sub("model");
    const json& archs = model.raw("architectures");
    if (!archs.is_array()) bad("model.architectures", "expected a list of width lists");
    c.model.architectures.clear();
    for (const json& arch : archs) {
        if (!arch.is_array()) bad("model.architectures", "expected a list of width lists");
        std::vector<std::size_t> widths;
        for (const json& w : arch) {
            if (!is_non_negative_integer(w)) bad("model.architectures", "widths must be positive integers");
            widths.push_back(w.get<std::size_t>());
        }
        c.model.architectures.push_back(std::move(widths));
    }
    try {
        c.model.activation = parse_activation(model.text("activation"));
    } catch (const ConfigError& e) {
        bad("model.activation", e.what());
    }
    c.model.d_z = model.count("d_z");
    c.model.separate_decision_head = model.flag("separate_decision_head");

    const Fields tr = root.sub("training");
    c.training.rounds = tr.count("rounds");
    c.training.epochs = tr.count("epochs");
    c.training.batch_size = tr.count("batch_size");
    c.training.lr = tr.real("lr");
    c.training.participation = tr.real("participation");

    const Fields loss = root.sub("loss");
    c.loss.tau = loss.real("tau");
    c.loss.lambda1 = loss.real("lambda1");
    c.loss.lambda2 = loss.real("lambda2");
    c.loss.lambda3 = loss.real("lambda3");
    c.loss.hard_mining = loss.flag("hard_mining");
    try {
        c.loss.l_d_form = parse_decision_loss_form(loss.text("l_d_form"));
    } catch (const ConfigError& e) {
        bad("loss.l_d_form", e.what());
    }

    const Fields fusion = root.sub("fusion");
    c.fusion.eta = fusion.real("eta");
    c.fusion.k_top = fusion.count("k_top");

    c.normalize_inference = root.flag("normalize_inference");
    try {
        c.variant = parse_variant(root.text("variant"));
    } catch (const ConfigError& e) {
        bad("variant", e.what());
    }
    const json& seeds = root.raw("seeds");
    if (!seeds.is_array()) bad("seeds", "expected a list of non-negative integers");
    c.seeds.clear();
    for (const json& s : seeds) {
        if (!is_non_negative_integer(s)) bad("seeds", "expected a list of non-negative integers");
        c.seeds.push_back(s.get<std::uint64_t>());
    }
    c.output_dir = root.text("output_dir");
    c.workers = root.count("workers");

    const Fields sweep = root.sub("sweep");
    const json& alphas = sweep.raw("alphas");
    const json& epochs = sweep.raw("epochs");
    if (!alphas.is_array()) bad("sweep.alphas", "expected a list of numbers");
    if (!epochs.is_array()) bad("sweep.epochs", "expected a list of integers");
    c.sweep.alphas.clear();
    c.sweep.epochs.clear();
    for (const json& a : alphas) {
        if (!a.is_number()) bad("sweep.alphas", "expected a list of numbers");
        c.sweep.alphas.push_back(a.get<double>());
    }
    for (const json& e : epochs) {
        if (!is_non_negative_integer(e)) bad("sweep.epochs", "expected a list of integers");
        c.sweep.epochs.push_back(e.get<std::size_t>());
    }

    c.validate();
    return c;
}

RunConfig parse_config(const ConfigSources& src) {
    json tree = profile_tree(src.profile);
    if (src.file) {
        std::ifstream in(*src.file);
        if (!in) throw ConfigError("cannot open config file " + src.file->string());
        json file_tree;
        try {
            file_tree = json::parse(in, nullptr, true, /*ignore_comments=*/true);
        } catch (const json::parse_error& e) {
            throw ConfigError("config file " + src.file->string() + " is not valid JSON: " + e.what());
        }
        if (!file_tree.is_object()) throw ConfigError("config file must hold a JSON object");
        merge_into(tree, file_tree);
    }
    if (src.use_environment) {
        if (const char* dir = std::getenv("DUALPROTO_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
            tree["output_dir"] = dir;
        }
    }
    for (const std::string& item : src.overrides) {
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "' is not key=value");
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
        if (value.is_discarded()) value = text;
        merge_into(tree, set_path(key, std::move(value)));
    }
    return config_from_json(tree);
}

std::string config_hash(const RunConfig& cfg) {
    const std::string body = to_json(cfg).dump();
    const std::string object = "blob " + std::to_string(body.size()) + std::string(1, '\0') + body;
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(object.data(), object.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
        throw Error("SHA-1 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

json run_manifest(const RunConfig& cfg, std::uint64_t seed) {
    return json{{"config", to_json(cfg)}, {"seed", seed}, {"config_hash", config_hash(cfg)}};
}

}  // namespace dualproto
