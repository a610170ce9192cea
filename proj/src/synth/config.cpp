#include <cmath>
#include <fstream>
#include <sstream>

#include "sortlab/error.hpp"
#include "sortlab/synthdata.hpp"

namespace sortlab::synth {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::parse, "generator config: '" + key + "' expects a number, got '" + text + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        if (!text.empty() && text[0] != '-') {
            const auto v = std::stoull(text, &used);
            if (used == text.size()) return v;
        }
    } catch (const std::exception&) {
    }
    throw Error(ErrorKind::parse, "generator config: '" + key + "' expects an unsigned integer, got '" + text + "'");
}

}  // namespace

void GeneratorConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorKind::config, "generator config: " + m); };
    if (width == 0 || height == 0) fail("grid size must be positive");
    if (!(presence >= 0.0 && presence <= 1.0)) fail("presence must lie in [0, 1]");
    for (double m : {mix_count, mix_line, mix_conjunction}) {
        if (!(m >= 0.0) || !std::isfinite(m)) fail("template mix weights must be non-negative");
    }
    if (!(mix_count + mix_line + mix_conjunction > 0.0)) fail("template mix needs a positive weight");
    if (!(mean_subs >= 1.0) || !std::isfinite(mean_subs)) fail("mean_subs must be at least 1");
    if (!(mean_irrelevant >= 0.0) || !std::isfinite(mean_irrelevant)) fail("mean_irrelevant must be non-negative");
    if (!(shortcut_bias >= 0.0 && shortcut_bias <= 1.0 / 3.0)) fail("shortcut_bias must lie in [0, 1/3]");
    if (groups == 0) fail("groups must be positive");
}

std::string GeneratorConfig::to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "width=" << width << "\nheight=" << height << "\npresence=" << presence
       << "\nmix_count=" << mix_count << "\nmix_line=" << mix_line
       << "\nmix_conjunction=" << mix_conjunction << "\nmean_subs=" << mean_subs
       << "\nmean_irrelevant=" << mean_irrelevant << "\nshortcut_bias=" << shortcut_bias
       << "\nseed=" << seed << "\ngroups=" << groups << "\n";
    return os.str();
}

GeneratorConfig GeneratorConfig::from_text(const std::string& text) {
    GeneratorConfig c;
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorKind::parse, "generator config line " + std::to_string(number) + ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "width") c.width = static_cast<std::uint32_t>(parse_uint(key, value));
        else if (key == "height") c.height = static_cast<std::uint32_t>(parse_uint(key, value));
        else if (key == "presence") c.presence = parse_real(key, value);
        else if (key == "mix_count") c.mix_count = parse_real(key, value);
        else if (key == "mix_line") c.mix_line = parse_real(key, value);
        else if (key == "mix_conjunction") c.mix_conjunction = parse_real(key, value);
        else if (key == "mean_subs") c.mean_subs = parse_real(key, value);
        else if (key == "mean_irrelevant") c.mean_irrelevant = parse_real(key, value);
        else if (key == "shortcut_bias") c.shortcut_bias = parse_real(key, value);
        else if (key == "seed") c.seed = parse_uint(key, value);
        else if (key == "groups") c.groups = static_cast<std::uint32_t>(parse_uint(key, value));
        else throw Error(ErrorKind::config, "generator config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

GeneratorConfig GeneratorConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open generator config '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

}  // namespace sortlab::synth
