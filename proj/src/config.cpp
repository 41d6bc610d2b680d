#include "jfr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace jfr {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& why) {
    throw std::invalid_argument("config: " + path + " " + why);
}

/// Wraps one JSON object; every key must be consumed exactly once or
/// finish() rejects the document.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) bad_key(path_, "must be an object");
    }

    bool has(const char* key) const { return j_.contains(key); }

    const json& child(const char* key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void get_u64(const char* key, std::uint64_t& out) {
        if (!has(key)) return;
        const json& v = child(key);
        if (!v.is_number_unsigned()) bad_key(path_ + "." + key, "must be a non-negative integer");
        out = v.get<std::uint64_t>();
    }

    void get_size(const char* key, std::size_t& out) {
        std::uint64_t v = out;
        get_u64(key, v);
        out = static_cast<std::size_t>(v);
    }

    void get_double(const char* key, double& out) {
        if (!has(key)) return;
        const json& v = child(key);
        if (!v.is_number()) bad_key(path_ + "." + key, "must be a number");
        out = v.get<double>();
    }

    void get_string(const char* key, std::string& out) {
        if (!has(key)) return;
        const json& v = child(key);
        if (!v.is_string()) bad_key(path_ + "." + key, "must be a string");
        out = v.get<std::string>();
    }

    void get_size_list(const char* key, std::vector<std::size_t>& out) {
        if (!has(key)) return;
        const json& v = child(key);
        if (!v.is_array()) bad_key(path_ + "." + key, "must be an array of integers");
        std::vector<std::size_t> parsed;
        for (const json& e : v) {
            if (!e.is_number_unsigned())
                bad_key(path_ + "." + key, "must hold non-negative integers only");
            parsed.push_back(e.get<std::size_t>());
        }
        out = std::move(parsed);
    }

    template <std::size_t N>
    void get_size_array(const char* key, std::array<std::size_t, N>& out) {
        if (!has(key)) return;
        std::vector<std::size_t> parsed(out.begin(), out.end());
        get_size_list(key, parsed);
        if (parsed.size() != N) {
            bad_key(path_ + "." + key, "must hold exactly " + std::to_string(N) + " entries");
        }
        std::copy(parsed.begin(), parsed.end(), out.begin());
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            (void)value;
            if (!seen_.contains(key)) bad_key(path_ + "." + key, "is not a recognized key");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

json data_to_json(const SyntheticSpec& s) {
    return {
        {"brightness_jitter", s.brightness_jitter},
        {"classes", s.classes},
        {"height", s.height},
        {"max_blobs", s.max_blobs},
        {"min_blobs", s.min_blobs},
        {"min_center_separation", s.min_center_separation},
        {"noise_sigma", s.noise_sigma},
        {"position_jitter", s.position_jitter},
        {"samples_per_class", s.samples_per_class},
        {"train_classes", s.train_classes},
        {"verification_pairs", s.verification_pairs},
        {"width", s.width},
    };
}

json net_to_json(const NetConfig& n) {
    return {
        {"blocks", n.blocks},
        {"channel_divisor", n.channel_divisor},
        {"classes", n.classes},
        {"feature_dim", n.feature_dim},
        {"input_height", n.input_height},
        {"input_width", n.input_width},
        {"srnet_kernels", n.srnet_kernels},
        {"stage_conv_pad", n.stage_conv_pad},
    };
}

json train_to_json(const TrainConfig& t, TrainMode mode) {
    return {
        {"alpha", t.weights.alpha},
        {"batch_size", t.batch_size},
        {"beta1", t.weights.beta1},
        {"beta2", t.weights.beta2},
        {"decay_steps", t.decay_steps},
        {"gamma", t.gamma},
        {"lr_frnet", t.lr_frnet},
        {"lr_softmax", t.lr_softmax},
        {"lr_srnet", t.lr_srnet},
        {"mode", std::string(to_string(mode))},
        {"total_steps", t.total_steps},
    };
}

json eval_to_json(const EvalConfig& e, TestInput input) {
    return {
        {"folds", e.folds},
        {"fpr_target", e.fpr_target},
        {"input", std::string(to_string(input))},
        {"pca_dim", e.pca_dim},
    };
}

}  // namespace

std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string canonical_config(const CliConfig& cfg) {
    const json doc{
        {"data", data_to_json(cfg.data)},
        {"eval", eval_to_json(cfg.eval, cfg.eval_input)},
        {"net", net_to_json(cfg.net)},
        {"paths",
         {{"checkpoint", cfg.checkpoint_path},
          {"dataset", cfg.dataset_path},
          {"out", cfg.out_dir},
          {"pairs", cfg.pairs_path}}},
        {"seed", cfg.seed},
        {"train", train_to_json(cfg.train, cfg.train_mode)},
    };
    return doc.dump();
}

void stamp_config(CliConfig& cfg) {
    cfg.train.seed = cfg.seed;
    cfg.eval.seed = cfg.seed;
    cfg.config_hash = fnv1a64(canonical_config(cfg));
    cfg.eval.config_hash = cfg.config_hash;
}

CliConfig parse_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
    }

    CliConfig cfg;
    StrictObject root(doc, "config");
    root.get_u64("seed", cfg.seed);

    if (root.has("paths")) {
        StrictObject paths(root.child("paths"), "paths");
        paths.get_string("dataset", cfg.dataset_path);
        paths.get_string("pairs", cfg.pairs_path);
        paths.get_string("checkpoint", cfg.checkpoint_path);
        paths.get_string("out", cfg.out_dir);
        paths.finish();
    }

    if (root.has("data")) {
        StrictObject data(root.child("data"), "data");
        data.get_size("classes", cfg.data.classes);
        data.get_size("samples_per_class", cfg.data.samples_per_class);
        data.get_size("height", cfg.data.height);
        data.get_size("width", cfg.data.width);
        data.get_size("train_classes", cfg.data.train_classes);
        data.get_size("verification_pairs", cfg.data.verification_pairs);
        data.get_double("position_jitter", cfg.data.position_jitter);
        data.get_double("brightness_jitter", cfg.data.brightness_jitter);
        data.get_double("noise_sigma", cfg.data.noise_sigma);
        data.get_size("min_blobs", cfg.data.min_blobs);
        data.get_size("max_blobs", cfg.data.max_blobs);
        data.get_double("min_center_separation", cfg.data.min_center_separation);
        data.finish();
    }

    if (root.has("net")) {
        StrictObject net(root.child("net"), "net");
        net.get_size("input_height", cfg.net.input_height);
        net.get_size("input_width", cfg.net.input_width);
        net.get_size("channel_divisor", cfg.net.channel_divisor);
        net.get_size_array("blocks", cfg.net.blocks);
        net.get_size("feature_dim", cfg.net.feature_dim);
        net.get_size("classes", cfg.net.classes);
        net.get_size_array("srnet_kernels", cfg.net.srnet_kernels);
        net.get_size("stage_conv_pad", cfg.net.stage_conv_pad);
        net.finish();
    }

    if (root.has("train")) {
        StrictObject train(root.child("train"), "train");
        std::string mode(to_string(cfg.train_mode));
        train.get_string("mode", mode);
        cfg.train_mode = parse_train_mode(mode);
        train.get_size("batch_size", cfg.train.batch_size);
        train.get_double("lr_srnet", cfg.train.lr_srnet);
        train.get_double("lr_frnet", cfg.train.lr_frnet);
        train.get_double("lr_softmax", cfg.train.lr_softmax);
        train.get_double("gamma", cfg.train.gamma);
        train.get_size_list("decay_steps", cfg.train.decay_steps);
        train.get_size("total_steps", cfg.train.total_steps);
        train.get_double("alpha", cfg.train.weights.alpha);
        train.get_double("beta1", cfg.train.weights.beta1);
        train.get_double("beta2", cfg.train.weights.beta2);
        train.finish();
    }

    if (root.has("eval")) {
        StrictObject eval(root.child("eval"), "eval");
        std::string input(to_string(cfg.eval_input));
        eval.get_string("input", input);
        cfg.eval_input = parse_test_input(input);
        eval.get_size("pca_dim", cfg.eval.pca_dim);
        eval.get_double("fpr_target", cfg.eval.fpr_target);
        eval.get_size("folds", cfg.eval.folds);
        eval.finish();
    }

    root.finish();
    stamp_config(cfg);
    return cfg;
}

CliConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

}  // namespace jfr
