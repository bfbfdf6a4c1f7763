#include "reconet/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reconet {

namespace {

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config: invalid number for " + key + ": '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        int i = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return i;
    } catch (...) {
        throw std::invalid_argument("config: invalid integer for " + key + ": '" + v + "'");
    }
}

std::string fmt(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

void TrainConfig::validate() const {
    weights.validate();
    if (steps < 1) throw std::invalid_argument("config: steps must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (width % 8 != 0 || height % 8 != 0)
        throw std::invalid_argument("config: resolution " + std::to_string(width) + "x" +
                                    std::to_string(height) + " must be divisible by 8");
    if (hflip_prob < 0 || hflip_prob > 1)
        throw std::invalid_argument("config: hflip_prob must be in [0,1]");
    if (learning_rate <= 0) throw std::invalid_argument("config: learning_rate must be positive");
    if (checkpoint_every < 1) throw std::invalid_argument("config: checkpoint_every must be >= 1");
    parse_temporal_variant(luminance_variant);
    if (temporal_losses != "both" && temporal_losses != "feature" && temporal_losses != "output" &&
        temporal_losses != "none")
        throw std::invalid_argument("config: temporal_losses must be both|feature|output|none");
    if (backbone != "test" && backbone != "vgg16")
        throw std::invalid_argument("config: backbone must be test|vgg16");
}

bool TrainConfig::use_feature_temporal() const {
    return temporal_losses == "both" || temporal_losses == "feature";
}

bool TrainConfig::use_output_temporal() const {
    return temporal_losses == "both" || temporal_losses == "output";
}

void TrainConfig::set(const std::string& key, const std::string& value) {
    if (key == "alpha") weights.alpha = to_double(key, value);
    else if (key == "beta") weights.beta = to_double(key, value);
    else if (key == "gamma") weights.gamma = to_double(key, value);
    else if (key == "lambda_f") weights.lambda_f = to_double(key, value);
    else if (key == "lambda_o") weights.lambda_o = to_double(key, value);
    else if (key == "learning_rate") learning_rate = to_double(key, value);
    else if (key == "batch_size") batch_size = to_int(key, value);
    else if (key == "steps") steps = to_int(key, value);
    else if (key == "seed") seed = static_cast<std::uint32_t>(to_int(key, value));
    else if (key == "resolution") {
        std::size_t x = value.find('x');
        if (x == std::string::npos)
            throw std::invalid_argument("config: resolution must be WIDTHxHEIGHT, got '" + value + "'");
        width = to_int(key, value.substr(0, x));
        height = to_int(key, value.substr(x + 1));
    } else if (key == "hflip_prob") hflip_prob = to_double(key, value);
    else if (key == "checkpoint_every") checkpoint_every = to_int(key, value);
    else if (key == "style_image") style_image = value;
    else if (key == "dataset") dataset = value;
    else if (key == "backbone") backbone = value;
    else if (key == "backbone_weights") backbone_weights = value;
    else if (key == "luminance_variant") luminance_variant = value;
    else if (key == "temporal_losses") temporal_losses = value;
    else if (key == "adam_beta1") adam_beta1 = to_double(key, value);
    else if (key == "adam_beta2") adam_beta2 = to_double(key, value);
    else if (key == "adam_eps") adam_eps = to_double(key, value);
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> TrainConfig::items() const {
    return {
        {"alpha", fmt(weights.alpha)},
        {"beta", fmt(weights.beta)},
        {"gamma", fmt(weights.gamma)},
        {"lambda_f", fmt(weights.lambda_f)},
        {"lambda_o", fmt(weights.lambda_o)},
        {"learning_rate", fmt(learning_rate)},
        {"batch_size", std::to_string(batch_size)},
        {"steps", std::to_string(steps)},
        {"seed", std::to_string(seed)},
        {"resolution", std::to_string(width) + "x" + std::to_string(height)},
        {"hflip_prob", fmt(hflip_prob)},
        {"checkpoint_every", std::to_string(checkpoint_every)},
        {"style_image", style_image},
        {"dataset", dataset},
        {"backbone", backbone},
        {"backbone_weights", backbone_weights},
        {"luminance_variant", luminance_variant},
        {"temporal_losses", temporal_losses},
        {"adam_beta1", fmt(adam_beta1)},
        {"adam_beta2", fmt(adam_beta2)},
        {"adam_eps", fmt(adam_eps)},
    };
}

std::string TrainConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : items()) out += k + "=" + v + "\n";
    return out;
}

std::string TrainConfig::config_hash() const {
    std::uint64_t h = 1469598103934665603ull;
    for (char ch : to_text()) {
        h ^= static_cast<std::uint8_t>(ch);
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos || line[start] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " is not key=value: '" + line + "'");
        cfg.set(line.substr(start, eq - start), line.substr(eq + 1));
    }
    return cfg;
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

}  // namespace reconet
