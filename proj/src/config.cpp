#include "evosynth/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "evosynth/errors.hpp"

namespace evo {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

long long to_int(const std::string& v, const std::string& what) {
    try {
        std::size_t pos = 0;
        long long r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(what + ": expected an integer, got '" + v + "'");
    }
}

std::uint64_t to_u64(const std::string& v, const std::string& what) {
    try {
        std::size_t pos = 0;
        std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(what + ": expected an unsigned integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& what) {
    try {
        std::size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError(what + ": expected a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& what) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(what + ": expected true/false, got '" + v + "'");
}

// Tracks which keys were consumed so leftovers can be rejected by name.
struct SectionReader {
    const std::string name;
    const std::map<std::string, std::string>& kv;
    std::set<std::string> seen;

    SectionReader(const std::string& n,
                  const std::map<std::string, std::string>& m)
        : name(n), kv(m) {}

    bool has(const std::string& key) {
        if (kv.count(key)) {
            seen.insert(key);
            return true;
        }
        return false;
    }
    std::string require(const std::string& key) {
        if (!has(key))
            throw ConfigError("[" + name + "] is missing required key '" + key + "'");
        return kv.at(key);
    }
    std::string get_or(const std::string& key, const std::string& def) {
        return has(key) ? kv.at(key) : def;
    }
    std::string where(const std::string& key) const {
        return "[" + name + "] " + key;
    }
    void finish() const {
        for (const auto& [key, _] : kv)
            if (!seen.count(key))
                throw ConfigError("unknown key '" + key + "' in [" + name + "]");
    }
};

}  // namespace

IniDoc parse_ini_text(const std::string& text, const std::string& origin) {
    IniDoc doc;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": empty section name");
            doc.sections[section];  // section may be present yet empty
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": key outside any section");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        // strip trailing comment
        std::size_t hash = value.find(" #");
        if (hash != std::string::npos) value = trim(value.substr(0, hash));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (doc.sections[section].count(key))
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": duplicate key '" + key + "' in [" + section + "]");
        doc.sections[section][key] = value;
    }
    return doc;
}

IniDoc parse_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_ini_text(ss.str(), path);
}

namespace {

std::pair<int, int> parse_kernel(const std::string& v, const std::string& what) {
    auto parts = split(v, 'x');
    if (parts.size() == 1) {
        int k = static_cast<int>(to_int(parts[0], what));
        return {k, k};
    }
    if (parts.size() == 2)
        return {static_cast<int>(to_int(parts[0], what)),
                static_cast<int>(to_int(parts[1], what))};
    throw ConfigError(what + ": expected K or KHxKW, got '" + v + "'");
}

}  // namespace

std::vector<LayerSpec> parse_layer_stack(const std::string& text) {
    std::vector<LayerSpec> specs;
    for (const std::string& raw : split(text, ';')) {
        std::string item = trim(raw);
        if (item.empty()) continue;
        std::istringstream in(item);
        std::string kind_str;
        in >> kind_str;
        std::map<std::string, std::string> args;
        std::string tok;
        while (in >> tok) {
            std::size_t eq = tok.find('=');
            if (eq == std::string::npos)
                throw ConfigError("layer '" + item + "': expected key=value, got '" +
                                  tok + "'");
            args[tok.substr(0, eq)] = tok.substr(eq + 1);
        }
        SectionReader r("layer " + kind_str, args);
        LayerKind kind;
        try {
            kind = layer_kind_from_string(kind_str);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        try {
            switch (kind) {
                case LayerKind::dense:
                    specs.push_back(LayerSpec::dense(
                        static_cast<int>(to_int(r.require("out"), r.where("out"))),
                        activation_from_string(r.get_or("act", "identity"))));
                    break;
                case LayerKind::conv2d: {
                    auto [kh, kw] = parse_kernel(r.require("k"), r.where("k"));
                    specs.push_back(LayerSpec::conv2d(
                        static_cast<int>(to_int(r.require("out"), r.where("out"))),
                        kh, kw,
                        static_cast<int>(to_int(r.get_or("stride", "1"),
                                                r.where("stride"))),
                        static_cast<int>(to_int(r.get_or("pad", "0"), r.where("pad"))),
                        activation_from_string(r.get_or("act", "identity"))));
                    break;
                }
                case LayerKind::upsample:
                    specs.push_back(LayerSpec::upsample(static_cast<int>(
                        to_int(r.require("factor"), r.where("factor")))));
                    break;
                case LayerKind::concat:
                    specs.push_back(LayerSpec::concat(static_cast<int>(
                        to_int(r.require("from"), r.where("from")))));
                    break;
                case LayerKind::nonlinearity:
                    specs.push_back(LayerSpec::nonlinearity(
                        activation_from_string(r.require("act"))));
                    break;
            }
        } catch (const std::invalid_argument& e) {
            throw ConfigError("layer '" + item + "': " + e.what());
        }
        r.finish();
    }
    if (specs.empty()) throw ConfigError("layer stack is empty");
    return specs;
}

EvolutionConfig load_run_config(const std::string& path) {
    IniDoc doc = parse_ini_file(path);

    static const char* kSections[] = {"network", "evolution", "training",
                                      "data",    "metrics",   "output"};
    for (const char* s : kSections)
        if (!doc.sections.count(s))
            throw ConfigError("config is missing section [" + std::string(s) + "]");
    for (const auto& [name, _] : doc.sections) {
        bool known = false;
        for (const char* s : kSections) known |= (name == s);
        if (!known) throw ConfigError("unknown section [" + name + "]");
    }

    EvolutionConfig cfg;

    {
        SectionReader r("network", doc.sections["network"]);
        std::string input = r.require("input");
        auto dims = split(input, 'x');
        if (dims.size() != 3)
            throw ConfigError("[network] input: expected CxHxW, got '" + input + "'");
        Shape3 in{static_cast<int>(to_int(dims[0], r.where("input"))),
                  static_cast<int>(to_int(dims[1], r.where("input"))),
                  static_cast<int>(to_int(dims[2], r.where("input")))};
        std::vector<LayerSpec> stack = parse_layer_stack(r.require("layers"));
        try {
            cfg.arch_template = make_architecture(in, std::move(stack));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[network] ") + e.what());
        }
        r.finish();
    }
    {
        SectionReader r("evolution", doc.sections["evolution"]);
        cfg.generations =
            static_cast<int>(to_int(r.require("generations"), r.where("generations")));
        if (cfg.generations < 1)
            throw ConfigError("[evolution] generations must be >= 1");
        cfg.env.retention = to_double(r.require("retention"), r.where("retention"));
        if (cfg.env.retention < 0.0 || cfg.env.retention > 1.0)
            throw ConfigError("[evolution] retention must lie in [0,1]");
        cfg.base_seed = to_u64(r.require("base_seed"), r.where("base_seed"));
        cfg.inherit_weights =
            to_bool(r.get_or("inherit_weights", "false"), r.where("inherit_weights"));
        std::string zmode = r.get_or("z_mode", "per-layer");
        if (zmode == "per-layer") cfg.zmode = ZMode::per_layer;
        else if (zmode == "global") cfg.zmode = ZMode::global;
        else throw ConfigError("[evolution] z_mode must be per-layer or global");
        r.finish();
    }
    {
        SectionReader r("training", doc.sections["training"]);
        cfg.train.learning_rate = static_cast<float>(
            to_double(r.require("learning_rate"), r.where("learning_rate")));
        cfg.train.epochs =
            static_cast<int>(to_int(r.require("epochs"), r.where("epochs")));
        if (cfg.train.epochs < 0) throw ConfigError("[training] epochs must be >= 0");
        if (cfg.train.epochs > 0 && cfg.train.learning_rate <= 0.0f)
            throw ConfigError("[training] learning_rate must be > 0 when epochs > 0");
        cfg.train.batch_size =
            static_cast<int>(to_int(r.require("batch_size"), r.where("batch_size")));
        if (cfg.train.batch_size < 1)
            throw ConfigError("[training] batch_size must be >= 1");
        try {
            cfg.train.loss = loss_from_string(r.require("loss"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("[training] ") + e.what());
        }
        cfg.train.seed = to_u64(r.require("seed"), r.where("seed"));
        std::string init = r.get_or("init", "uniform");
        if (init == "uniform") cfg.train.init = InitMode::uniform_scaled;
        else if (init == "constant") cfg.train.init = InitMode::constant;
        else throw ConfigError("[training] init must be uniform or constant");
        cfg.train.init_constant = static_cast<float>(
            to_double(r.get_or("init_constant", "0.05"), r.where("init_constant")));
        r.finish();
    }
    {
        SectionReader r("data", doc.sections["data"]);
        std::string kind = r.require("kind");
        if (kind == "synthetic") {
            cfg.data.kind = DataSpec::Kind::synthetic;
            cfg.data.seed = to_u64(r.require("seed"), r.where("seed"));
            cfg.data.count =
                static_cast<int>(to_int(r.require("count"), r.where("count")));
            cfg.data.height =
                static_cast<int>(to_int(r.require("height"), r.where("height")));
            cfg.data.width =
                static_cast<int>(to_int(r.require("width"), r.where("width")));
            if (cfg.data.count < 3) throw ConfigError("[data] count must be >= 3");
            if (cfg.data.height < 16 || cfg.data.width < 16)
                throw ConfigError("[data] height and width must be >= 16");
        } else if (kind == "directory") {
            cfg.data.kind = DataSpec::Kind::directory;
            cfg.data.images_dir = r.require("images");
            cfg.data.masks_dir = r.require("masks");
            std::string fr = r.get_or("fractions", "0.5,0.1,0.4");
            auto parts = split(fr, ',');
            if (parts.size() != 3)
                throw ConfigError("[data] fractions: expected three comma-separated values");
            cfg.data.train_frac = to_double(trim(parts[0]), r.where("fractions"));
            cfg.data.val_frac = to_double(trim(parts[1]), r.where("fractions"));
            cfg.data.test_frac = to_double(trim(parts[2]), r.where("fractions"));
        } else {
            throw ConfigError("[data] kind must be synthetic or directory");
        }
        r.finish();
    }
    {
        SectionReader r("metrics", doc.sections["metrics"]);
        cfg.metrics.beta_squared =
            to_double(r.get_or("beta_squared", "0.3"), r.where("beta_squared"));
        if (cfg.metrics.beta_squared <= 0.0)
            throw ConfigError("[metrics] beta_squared must be > 0");
        std::string th = r.get_or("threshold", "sweep");
        if (th == "sweep") {
            cfg.metrics.mode = MetricsConfig::ThresholdMode::max_sweep;
        } else if (th.rfind("fixed:", 0) == 0) {
            cfg.metrics.mode = MetricsConfig::ThresholdMode::fixed;
            cfg.metrics.fixed_threshold =
                to_double(th.substr(6), r.where("threshold"));
            if (cfg.metrics.fixed_threshold < 0.0 || cfg.metrics.fixed_threshold > 1.0)
                throw ConfigError("[metrics] fixed threshold must lie in [0,1]");
        } else {
            throw ConfigError("[metrics] threshold must be sweep or fixed:<t>");
        }
        r.finish();
    }
    {
        SectionReader r("output", doc.sections["output"]);
        cfg.output_dir = r.require("directory");
        if (cfg.output_dir.empty())
            throw ConfigError("[output] directory must not be empty");
        r.finish();
    }
    return cfg;
}

}  // namespace evo
