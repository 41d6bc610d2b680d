#include "jfr/network.hpp"

#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "jfr/io.hpp"

namespace jfr {

namespace {

constexpr char kCheckpointMagic[4] = {'J', 'F', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

constexpr std::array<std::size_t, 4> kStageWidths = {64, 128, 256, 512};
constexpr std::array<std::size_t, 2> kSrnetWidths = {64, 32};

std::size_t scaled(std::size_t base, std::size_t divisor) {
    return std::max<std::size_t>(1, base / divisor);
}

}  // namespace

NetConfig NetConfig::paper_scale(std::size_t classes) {
    NetConfig cfg;
    cfg.input_height = 124;
    cfg.input_width = 108;
    cfg.channel_divisor = 1;
    cfg.blocks = {1, 2, 5, 3};
    cfg.feature_dim = 512;
    cfg.classes = classes;
    cfg.stage_conv_pad = 0;
    return cfg;
}

NetConfig NetConfig::desk_scale(std::size_t classes) {
    NetConfig cfg;  // defaults are the desk preset
    cfg.classes = classes;
    return cfg;
}

void NetConfig::validate() const {
    if (input_height == 0 || input_width == 0 || input_height % 4 != 0 ||
        input_width % 4 != 0) {
        throw std::invalid_argument("net config: input dims must be positive multiples of 4, got " +
                                    std::to_string(input_height) + "x" +
                                    std::to_string(input_width));
    }
    if (channel_divisor == 0 || feature_dim == 0 || classes == 0) {
        throw std::invalid_argument("net config: counts must be >= 1");
    }
    for (std::size_t b : blocks) {
        if (b == 0) throw std::invalid_argument("net config: residual block counts must be >= 1");
    }
    for (std::size_t k : srnet_kernels) {
        if (k == 0 || k % 2 == 0) {
            throw std::invalid_argument(
                "net config: hallucination kernels must be odd (same-size padding), got " +
                std::to_string(k));
        }
    }
}

std::size_t NetConfig::stage_channels(std::size_t stage) const {
    return scaled(kStageWidths.at(stage), channel_divisor);
}

std::size_t NetConfig::srnet_hidden(std::size_t layer) const {
    return scaled(kSrnetWidths.at(layer), channel_divisor);
}

Network build_srnet(const NetConfig& cfg, Rng* rng) {
    cfg.validate();
    const std::size_t c0 = cfg.srnet_hidden(0), c1 = cfg.srnet_hidden(1);
    const auto& k = cfg.srnet_kernels;

    Network net;
    auto add_conv = [&](const std::string& name, std::size_t in, std::size_t out,
                        std::size_t kernel) {
        auto conv = std::make_unique<Conv2d>(in, out, kernel, kernel, 1, kernel / 2);
        if (rng) conv->init(*rng);
        net.append(name, std::move(conv));
    };
    add_conv("conv1", 3, c0, k[0]);
    net.append("relu1", std::make_unique<Relu>());
    add_conv("conv2", c0, c1, k[1]);
    net.append("relu2", std::make_unique<Relu>());
    add_conv("conv3", c1, 3, k[2]);  // linear output: pixels, not activations
    return net;
}

Network build_frnet(const NetConfig& cfg, Rng* rng) {
    cfg.validate();
    Network net;
    std::vector<std::size_t> shape{1, 3, cfg.input_height, cfg.input_width};
    std::size_t in_ch = 3;

    for (std::size_t s = 0; s < 4; ++s) {
        const std::string stage = "s" + std::to_string(s + 1);
        const std::size_t out_ch = cfg.stage_channels(s);

        auto append_checked = [&](const std::string& name, std::unique_ptr<Layer> layer) {
            try {
                shape = layer->output_shape(shape);
            } catch (const std::exception& e) {
                throw std::invalid_argument("frnet stage " + std::to_string(s + 1) +
                                            " (input " + std::to_string(cfg.input_height) +
                                            "x" + std::to_string(cfg.input_width) +
                                            "): " + e.what());
            }
            net.append(name, std::move(layer));
        };

        auto conv = std::make_unique<Conv2d>(in_ch, out_ch, 3, 3, 1, cfg.stage_conv_pad);
        if (rng) conv->init(*rng);
        append_checked(stage + ".conv", std::move(conv));
        append_checked(stage + ".relu", std::make_unique<Relu>());
        append_checked(stage + ".pool", std::make_unique<MaxPool2d>(2, 2));
        for (std::size_t b = 0; b < cfg.blocks[s]; ++b) {
            auto block = std::make_unique<ResidualBlock>(out_ch);
            if (rng) block->init(*rng);
            append_checked(stage + ".res" + std::to_string(b + 1), std::move(block));
        }
        in_ch = out_ch;
    }

    net.append("gap", std::make_unique<GlobalAvgPool>());
    auto head = std::make_unique<Fc>(in_ch, cfg.feature_dim);
    if (rng) head->init(*rng);
    net.append("head", std::move(head));
    return net;
}

JointNetwork::JointNetwork(const NetConfig& cfg, double gamma)
    : config(cfg),
      srnet(build_srnet(cfg)),
      frnet(build_frnet(cfg)),
      softmax(cfg.classes, cfg.feature_dim),
      centers(cfg.classes, cfg.feature_dim, gamma) {}

void JointNetwork::init(Rng& rng) {
    Rng sr = rng.split(1), fr = rng.split(2), sm = rng.split(3);
    srnet = build_srnet(config, &sr);
    frnet = build_frnet(config, &fr);
    softmax.init(sm);
    centers.centers.fill(0.0);
    step = 0;
}

JointForward JointNetwork::forward(const Tensor& lr_upscaled) {
    Tensor hallucinated = srnet.forward(lr_upscaled);
    if (!hallucinated.same_shape(lr_upscaled)) {
        throw std::runtime_error("splice mismatch: hallucinated " + shape_str(hallucinated) +
                                 " vs input " + shape_str(lr_upscaled));
    }
    Tensor features = frnet.forward(hallucinated);
    return {std::move(hallucinated), std::move(features)};
}

Tensor JointNetwork::backward(const Tensor& grad_features,
                              const Tensor& grad_hallucinated_injection) {
    Tensor at_splice = frnet.backward(grad_features);
    if (!at_splice.same_shape(grad_hallucinated_injection)) {
        throw std::invalid_argument("splice injection shape " +
                                    shape_str(grad_hallucinated_injection) +
                                    " does not match the hallucinated image " +
                                    shape_str(at_splice));
    }
    add_inplace(at_splice, grad_hallucinated_injection);
    return srnet.backward(at_splice);
}

std::vector<ParamRef> JointNetwork::parameters() {
    std::vector<ParamRef> out;
    for (auto& p : srnet.parameters()) out.push_back({"srnet." + p.name, p.value, p.grad});
    for (auto& p : frnet.parameters()) out.push_back({"frnet." + p.name, p.value, p.grad});
    return out;
}

std::vector<std::pair<std::string, Tensor*>> JointNetwork::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& p : parameters()) out.emplace_back(p.name, p.value);
    out.emplace_back("softmax.weight", &softmax.weights);
    out.emplace_back("softmax.bias", &softmax.bias);
    out.emplace_back("centers.m", &centers.centers);
    return out;
}

namespace {

nlohmann::json config_to_json(const NetConfig& cfg) {
    return {
        {"blocks", cfg.blocks},
        {"channel_divisor", cfg.channel_divisor},
        {"classes", cfg.classes},
        {"feature_dim", cfg.feature_dim},
        {"input_height", cfg.input_height},
        {"input_width", cfg.input_width},
        {"srnet_kernels", cfg.srnet_kernels},
        {"stage_conv_pad", cfg.stage_conv_pad},
    };
}

NetConfig config_from_json(const nlohmann::json& j) {
    NetConfig cfg;
    j.at("blocks").get_to(cfg.blocks);
    j.at("channel_divisor").get_to(cfg.channel_divisor);
    j.at("classes").get_to(cfg.classes);
    j.at("feature_dim").get_to(cfg.feature_dim);
    j.at("input_height").get_to(cfg.input_height);
    j.at("input_width").get_to(cfg.input_width);
    j.at("srnet_kernels").get_to(cfg.srnet_kernels);
    j.at("stage_conv_pad").get_to(cfg.stage_conv_pad);
    return cfg;
}

}  // namespace

void save_checkpoint(JointNetwork& net, const std::string& path) {
    auto tensors = net.named_tensors();
    nlohmann::json manifest{
        {"config", config_to_json(net.config)},
        {"format", kCheckpointVersion},
        {"gamma", net.centers.gamma},
        {"step", net.step},
    };
    auto& names = manifest["tensors"] = nlohmann::json::array();
    for (auto& [name, tensor] : tensors) names.push_back(name);

    std::ostringstream body;
    const std::string text = manifest.dump();  // keys sorted: canonical bytes
    io::write_magic(body, kCheckpointMagic);
    io::write_u32(body, kCheckpointVersion);
    io::write_u64(body, text.size());
    body.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (auto& [name, tensor] : tensors) io::write_tensor(body, *tensor);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    const std::string bytes = body.str();
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

JointNetwork load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    io::expect_magic(is, kCheckpointMagic, path);
    const std::uint32_t version = io::read_u32(is, path);
    if (version != kCheckpointVersion) {
        throw std::runtime_error(path + ": unsupported checkpoint version " +
                                 std::to_string(version));
    }
    const std::uint64_t len = io::read_u64(is, path);
    if (len > (1ull << 20)) throw std::runtime_error(path + ": implausible manifest size");
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (static_cast<std::uint64_t>(is.gcount()) != len) {
        throw std::runtime_error(path + ": truncated manifest");
    }

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": bad manifest: " + e.what());
    }

    NetConfig cfg;
    double gamma = 0.0;
    std::uint64_t step = 0;
    std::vector<std::string> order;
    try {
        cfg = config_from_json(manifest.at("config"));
        manifest.at("gamma").get_to(gamma);
        manifest.at("step").get_to(step);
        manifest.at("tensors").get_to(order);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ": bad manifest: " + e.what());
    }

    JointNetwork net(cfg, gamma);
    net.step = step;
    auto slots = net.named_tensors();
    if (order.size() != slots.size()) {
        throw std::runtime_error(path + ": manifest lists " + std::to_string(order.size()) +
                                 " tensors, network has " + std::to_string(slots.size()));
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i] != slots[i].first) {
            throw std::runtime_error(path + ": tensor order mismatch at " + order[i] +
                                     " (expected " + slots[i].first + ")");
        }
        Tensor loaded = io::read_tensor(is, path + ":" + order[i]);
        if (loaded.shape() != slots[i].second->shape()) {
            throw std::runtime_error(path + ": " + order[i] + " has shape " +
                                     shape_str(loaded) + ", expected " +
                                     shape_str(*slots[i].second));
        }
        *slots[i].second = std::move(loaded);
    }
    return net;
}

}  // namespace jfr
