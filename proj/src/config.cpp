#include "jumpcap/config.hpp"

#include <json.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace jumpcap {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct RawEntry {
    std::string value;
    int line = 0;
    bool used = false;
};

using RawMap = std::map<std::string, RawEntry>;

void flatten_json(const nlohmann::json& j, const std::string& prefix, RawMap& out) {
    for (const auto& [key, value] : j.items()) {
        const std::string path = prefix.empty() ? key : prefix + "." + key;
        if (value.is_object()) {
            flatten_json(value, path, out);
        } else if (value.is_string()) {
            out[path] = {value.get<std::string>(), 0, false};
        } else {
            out[path] = {value.dump(), 0, false};
        }
    }
}

RawMap parse_raw(const std::string& text) {
    RawMap raw;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        flatten_json(nlohmann::json::parse(body), "", raw);
        return raw;
    }
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#' || stripped.front() == ';') {
            continue;
        }
        if (stripped.front() == '[') {
            if (stripped.back() != ']') {
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": malformed section header");
            }
            section = trim(stripped.substr(1, stripped.size() - 2));
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key");
        }
        const std::string path = section.empty() ? key : section + "." + key;
        raw[path] = {value, line_no, false};
    }
    return raw;
}

class Reader {
public:
    Reader(RawMap raw, std::string* notices) : raw_(std::move(raw)), notices_(notices) {}

    template <typename T, typename Parser>
    void get(const std::string& key, T& slot, Parser parse) {
        auto it = raw_.find(key);
        if (it == raw_.end()) {
            if (notices_ != nullptr) {
                *notices_ += "note: config key " + key + " missing; using default\n";
            }
            return;
        }
        it->second.used = true;
        try {
            slot = parse(it->second.value);
        } catch (const std::exception& e) {
            throw std::invalid_argument("config key " + key +
                                        (it->second.line > 0
                                             ? " (line " + std::to_string(it->second.line) + ")"
                                             : "") +
                                        ": " + e.what());
        }
    }

    void get_double(const std::string& key, double& slot) {
        get(key, slot, [](const std::string& v) {
            std::size_t pos = 0;
            const double parsed = std::stod(v, &pos);
            if (pos != v.size()) {
                throw std::invalid_argument("not a number: " + v);
            }
            return parsed;
        });
    }
    void get_int(const std::string& key, int& slot) {
        get(key, slot, [](const std::string& v) {
            std::size_t pos = 0;
            const long parsed = std::stol(v, &pos);
            if (pos != v.size()) {
                throw std::invalid_argument("not an integer: " + v);
            }
            return static_cast<int>(parsed);
        });
    }
    void get_u64(const std::string& key, std::uint64_t& slot) {
        get(key, slot, [](const std::string& v) {
            std::size_t pos = 0;
            const unsigned long long parsed = std::stoull(v, &pos);
            if (pos != v.size()) {
                throw std::invalid_argument("not an unsigned integer: " + v);
            }
            return static_cast<std::uint64_t>(parsed);
        });
    }
    void get_bool(const std::string& key, bool& slot) {
        get(key, slot, [](const std::string& v) {
            if (v == "true" || v == "1") return true;
            if (v == "false" || v == "0") return false;
            throw std::invalid_argument("not a boolean: " + v);
        });
    }
    void get_string(const std::string& key, std::string& slot) {
        get(key, slot, [](const std::string& v) { return v; });
    }
    void get_scheme(const std::string& key, Scheme& slot) {
        get(key, slot, [](const std::string& v) { return scheme_from(v); });
    }

    void reject_unknown() const {
        for (const auto& [key, entry] : raw_) {
            if (!entry.used) {
                throw std::invalid_argument(
                    "unknown config key " + key +
                    (entry.line > 0 ? " (line " + std::to_string(entry.line) + ")" : ""));
            }
        }
    }

private:
    RawMap raw_;
    std::string* notices_;
};

} // namespace

const char* scheme_name(Scheme scheme) {
    return scheme == Scheme::euler ? "euler" : "exact-latent";
}

Scheme scheme_from(const std::string& name) {
    if (name == "euler") return Scheme::euler;
    if (name == "exact-latent" || name == "exact_latent") return Scheme::exact_latent;
    throw std::invalid_argument("unknown scheme: " + name + " (euler | exact-latent)");
}

void ExperimentConfig::validate() const {
    model.validate();
    grid().validate();
    bsde.validate();
    control.validate();
    if (selector_points < 2) {
        throw std::invalid_argument("selector.points must be >= 2");
    }
    if (mc_paths < 2) {
        throw std::invalid_argument("run.mc_paths must be >= 2");
    }
    if (sim_paths < 1) {
        throw std::invalid_argument("run.sim_paths must be >= 1");
    }
    if (!(threshold >= 0.0)) {
        throw std::invalid_argument("run.threshold must be >= 0");
    }
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw std::invalid_argument("run.scale must lie in (0, 1]");
    }
    if (threads < 0) {
        throw std::invalid_argument("run.threads must be >= 0");
    }
}

ExperimentConfig parse_config(const std::string& text, std::string* notices) {
    Reader reader(parse_raw(text), notices);
    ExperimentConfig cfg;

    reader.get_double("model.T", cfg.model.T);
    reader.get_double("model.v0", cfg.model.v0);
    reader.get_double("model.d0", cfg.model.d0);
    reader.get_double("model.c0", cfg.model.c0);
    reader.get_double("model.lambda1", cfg.model.lambda1);
    reader.get_double("model.lambda2", cfg.model.lambda2);
    reader.get_double("model.m1", cfg.model.m1);
    reader.get_double("model.m2", cfg.model.m2);
    reader.get_double("model.sigma11", cfg.model.sigma11);
    reader.get_double("model.sigma12", cfg.model.sigma12);
    reader.get_double("model.sigma22", cfg.model.sigma22);
    reader.get_double("model.xi1", cfg.model.xi1);
    reader.get_double("model.xi2", cfg.model.xi2);
    reader.get_double("model.p", cfg.model.p);
    reader.get_double("model.s", cfg.model.s);
    reader.get_double("model.r", cfg.model.r);
    reader.get_double("model.kappa", cfg.model.kappa);
    reader.get_double("model.a_min", cfg.model.a_min);
    reader.get_double("model.a_max", cfg.model.a_max);

    reader.get_int("grid.steps", cfg.grid_steps);

    reader.get_int("bsde.batch", cfg.bsde.batch);
    reader.get_int("bsde.aux_batch", cfg.bsde.aux_batch);
    reader.get_int("bsde.epochs_terminal", cfg.bsde.epochs_terminal);
    reader.get_int("bsde.epochs_other", cfg.bsde.epochs_other);
    reader.get_double("bsde.learning_rate", cfg.bsde.learning_rate);
    reader.get_int("bsde.hidden_width", cfg.bsde.hidden_width);
    reader.get_int("bsde.hidden_layers", cfg.bsde.hidden_layers);
    reader.get_bool("bsde.cache_paths", cfg.bsde.cache_paths);

    reader.get_int("control.batch", cfg.control.batch);
    reader.get_int("control.epochs", cfg.control.epochs);
    reader.get_double("control.learning_rate", cfg.control.learning_rate);
    reader.get_int("control.hidden_width", cfg.control.hidden_width);
    reader.get_int("control.hidden_layers", cfg.control.hidden_layers);
    reader.get_int("control.eval_paths", cfg.control.eval_paths);

    reader.get_int("selector.points", cfg.selector_points);
    reader.get_bool("selector.oracle_mode", cfg.oracle_mode);

    reader.get_u64("run.seed", cfg.seed);
    reader.get_double("run.scale", cfg.scale);
    reader.get_scheme("run.scheme", cfg.scheme);
    reader.get_int("run.threads", cfg.threads);
    reader.get_string("run.out", cfg.out_dir);
    reader.get_double("run.threshold", cfg.threshold);
    reader.get_u64("run.mc_paths", cfg.mc_paths);
    reader.get_int("run.sim_paths", cfg.sim_paths);
    reader.get_string("run.policy_file", cfg.policy_file);

    reader.reject_unknown();
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config file: " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    std::string notices;
    ExperimentConfig cfg = parse_config(buffer.str(), &notices);
    if (!notices.empty()) {
        std::cerr << notices;
    }
    return cfg;
}

std::string emit_config(const ExperimentConfig& cfg) {
    std::ostringstream out;
    out << "[model]\n";
    out << "T = " << fmt_double(cfg.model.T) << "\n";
    out << "v0 = " << fmt_double(cfg.model.v0) << "\n";
    out << "d0 = " << fmt_double(cfg.model.d0) << "\n";
    out << "c0 = " << fmt_double(cfg.model.c0) << "\n";
    out << "lambda1 = " << fmt_double(cfg.model.lambda1) << "\n";
    out << "lambda2 = " << fmt_double(cfg.model.lambda2) << "\n";
    out << "m1 = " << fmt_double(cfg.model.m1) << "\n";
    out << "m2 = " << fmt_double(cfg.model.m2) << "\n";
    out << "sigma11 = " << fmt_double(cfg.model.sigma11) << "\n";
    out << "sigma12 = " << fmt_double(cfg.model.sigma12) << "\n";
    out << "sigma22 = " << fmt_double(cfg.model.sigma22) << "\n";
    out << "xi1 = " << fmt_double(cfg.model.xi1) << "\n";
    out << "xi2 = " << fmt_double(cfg.model.xi2) << "\n";
    out << "p = " << fmt_double(cfg.model.p) << "\n";
    out << "s = " << fmt_double(cfg.model.s) << "\n";
    out << "r = " << fmt_double(cfg.model.r) << "\n";
    out << "kappa = " << fmt_double(cfg.model.kappa) << "\n";
    out << "a_min = " << fmt_double(cfg.model.a_min) << "\n";
    out << "a_max = " << fmt_double(cfg.model.a_max) << "\n";
    out << "\n[grid]\n";
    out << "steps = " << cfg.grid_steps << "\n";
    out << "\n[bsde]\n";
    out << "batch = " << cfg.bsde.batch << "\n";
    out << "aux_batch = " << cfg.bsde.aux_batch << "\n";
    out << "epochs_terminal = " << cfg.bsde.epochs_terminal << "\n";
    out << "epochs_other = " << cfg.bsde.epochs_other << "\n";
    out << "learning_rate = " << fmt_double(cfg.bsde.learning_rate) << "\n";
    out << "hidden_width = " << cfg.bsde.hidden_width << "\n";
    out << "hidden_layers = " << cfg.bsde.hidden_layers << "\n";
    out << "cache_paths = " << (cfg.bsde.cache_paths ? "true" : "false") << "\n";
    out << "\n[control]\n";
    out << "batch = " << cfg.control.batch << "\n";
    out << "epochs = " << cfg.control.epochs << "\n";
    out << "learning_rate = " << fmt_double(cfg.control.learning_rate) << "\n";
    out << "hidden_width = " << cfg.control.hidden_width << "\n";
    out << "hidden_layers = " << cfg.control.hidden_layers << "\n";
    out << "eval_paths = " << cfg.control.eval_paths << "\n";
    out << "\n[selector]\n";
    out << "points = " << cfg.selector_points << "\n";
    out << "oracle_mode = " << (cfg.oracle_mode ? "true" : "false") << "\n";
    out << "\n[run]\n";
    out << "seed = " << cfg.seed << "\n";
    out << "scale = " << fmt_double(cfg.scale) << "\n";
    out << "scheme = " << scheme_name(cfg.scheme) << "\n";
    out << "threads = " << cfg.threads << "\n";
    out << "out = " << cfg.out_dir << "\n";
    out << "threshold = " << fmt_double(cfg.threshold) << "\n";
    out << "mc_paths = " << cfg.mc_paths << "\n";
    out << "sim_paths = " << cfg.sim_paths << "\n";
    out << "policy_file = " << cfg.policy_file << "\n";
    return out.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string text = emit_config(cfg);
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001B3ULL;
    }
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

} // namespace jumpcap
