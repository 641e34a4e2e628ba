#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "moegate/model.hpp"
#include "moegate/train.hpp"

namespace moegate {

// One reproducible run: everything the trainer needs plus paths and a name.
// Serialized as sectioned key = value text; unknown keys are rejected so a
// config snapshot is always authoritative.
struct RunConfig {
    // [run]
    std::string name = "run";
    std::string out_dir = "runs";
    std::uint64_t seed = 1;
    int seeds = 5;
    // [data]
    std::string dataset = "data/mixed.mixn";
    int subset = 0;
    // [model]
    bool moe = true;
    int experts = 5;
    int top_k = 3;
    std::string inhibition = "none";
    double dropout_p = 0.5;
    std::string pretext_taps = "pool1,pool2";
    std::string posttext_taps = "logits,loss";
    double router_noise = 0.0;
    // [train]
    double lr = 5e-5;
    int batch_size = 128;
    int epochs = 35;
    int eval_batch = 5120;

    ModelConfig model_config() const {
        ModelConfig m;
        m.moe = moe;
        m.experts = experts;
        m.top_k = top_k;
        m.mode = inhibition_mode_from_string(inhibition);
        m.dropout_p = dropout_p;
        m.router_noise = router_noise;
        m.pretext_sites = split_list(pretext_taps);
        m.posttext_sites = split_list(posttext_taps);
        m.validate();
        return m;
    }

    TrainConfig train_config() const {
        TrainConfig t;
        t.lr = lr;
        t.batch_size = batch_size;
        t.epochs = epochs;
        t.eval_batch = eval_batch;
        t.seeds = seeds;
        t.base_seed = seed;
        t.subset = subset;
        t.validate();
        return t;
    }

    static std::vector<std::string> split_list(const std::string& csv) {
        std::vector<std::string> out;
        std::string item;
        std::istringstream is(csv);
        while (std::getline(is, item, ',')) {
            std::string trimmed = trim(item);
            if (!trimmed.empty()) out.push_back(std::move(trimmed));
        }
        return out;
    }

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t\r");
        std::size_t e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "# moegate run configuration\n";
        os << "[run]\n";
        os << "name = " << name << "\n";
        os << "out_dir = " << out_dir << "\n";
        os << "seed = " << seed << "\n";
        os << "seeds = " << seeds << "\n";
        os << "\n[data]\n";
        os << "dataset = " << dataset << "\n";
        os << "subset = " << subset << "\n";
        os << "\n[model]\n";
        os << "moe = " << (moe ? "true" : "false") << "\n";
        os << "experts = " << experts << "\n";
        os << "top_k = " << top_k << "\n";
        os << "inhibition = " << inhibition << "\n";
        os << "dropout_p = " << dropout_p << "\n";
        os << "pretext_taps = " << pretext_taps << "\n";
        os << "posttext_taps = " << posttext_taps << "\n";
        os << "router_noise = " << router_noise << "\n";
        os << "\n[train]\n";
        os << "lr = " << lr << "\n";
        os << "batch_size = " << batch_size << "\n";
        os << "epochs = " << epochs << "\n";
        os << "eval_batch = " << eval_batch << "\n";
        return os.str();
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        const std::string at = section + "." + key;
        if (at == "run.name") name = value;
        else if (at == "run.out_dir") out_dir = value;
        else if (at == "run.seed") seed = parse_u64(at, value);
        else if (at == "run.seeds") seeds = parse_int(at, value);
        else if (at == "data.dataset") dataset = value;
        else if (at == "data.subset") subset = parse_int(at, value);
        else if (at == "model.moe") moe = parse_bool(at, value);
        else if (at == "model.experts") experts = parse_int(at, value);
        else if (at == "model.top_k") top_k = parse_int(at, value);
        else if (at == "model.inhibition") inhibition = value;
        else if (at == "model.dropout_p") dropout_p = parse_double(at, value);
        else if (at == "model.pretext_taps") pretext_taps = value;
        else if (at == "model.posttext_taps") posttext_taps = value;
        else if (at == "model.router_noise") router_noise = parse_double(at, value);
        else if (at == "train.lr") lr = parse_double(at, value);
        else if (at == "train.batch_size") batch_size = parse_int(at, value);
        else if (at == "train.epochs") epochs = parse_int(at, value);
        else if (at == "train.eval_batch") eval_batch = parse_int(at, value);
        else throw ConfigError("unknown config key '" + key + "' in section [" + section + "]");
    }

    static RunConfig from_text(std::istream& is, const std::string& origin) {
        RunConfig cfg;
        std::string line, section;
        int line_no = 0;
        while (std::getline(is, line)) {
            ++line_no;
            std::string s = trim(line);
            if (s.empty() || s[0] == '#' || s[0] == ';') continue;
            if (s.front() == '[' && s.back() == ']') {
                section = trim(s.substr(1, s.size() - 2));
                if (section != "run" && section != "data" && section != "model" && section != "train")
                    throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown section [" + section + "]");
                continue;
            }
            const std::size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value, got '" + s + "'");
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": key before any [section]");
            cfg.set(section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
        }
        return cfg;
    }

    static RunConfig from_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot open config file " + path);
        return from_text(is, path);
    }

private:
    static int parse_int(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const int r = std::stoi(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": '" + v + "' is not an integer");
        }
    }
    static std::uint64_t parse_u64(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const unsigned long long r = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return static_cast<std::uint64_t>(r);
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": '" + v + "' is not an unsigned integer");
        }
    }
    static double parse_double(const std::string& key, const std::string& v) {
        try {
            std::size_t used = 0;
            const double r = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return r;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": '" + v + "' is not a number");
        }
    }
    static bool parse_bool(const std::string& key, const std::string& v) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key " + key + ": '" + v + "' is not a boolean");
    }
};

}  // namespace moegate
