#include "conserva/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "conserva/errors.hpp"

namespace conserva {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_items(const std::string& s) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) items.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) items.push_back(cur);
    return items;
}

} // namespace

ConfigFile ConfigFile::parse_string(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw validation_error("config line " + std::to_string(lineno) +
                                       ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw validation_error("config line " + std::to_string(lineno) +
                                       ": empty section name");
            }
            cfg.sections_[section];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw validation_error("config line " + std::to_string(lineno) +
                                   ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw validation_error("config line " + std::to_string(lineno) + ": empty key");
        }
        if (section.empty()) {
            throw validation_error("config line " + std::to_string(lineno) +
                                   ": key outside any [section]");
        }
        cfg.sections_[section][key] = value;
    }
    return cfg;
}

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str());
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    if (s == sections_.end() || !s->second.count(key)) {
        throw validation_error("config: missing key [" + section + "] " + key);
    }
    return s->second.at(key);
}

std::string ConfigFile::get_string_or(const std::string& section, const std::string& key,
                                      const std::string& fallback) const {
    return has(section, key) ? get_string(section, key) : fallback;
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    const std::string v = get_string(section, key);
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw validation_error("config: [" + section + "] " + key + " is not a number: " + v);
    }
}

double ConfigFile::get_double_or(const std::string& section, const std::string& key,
                                 double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

std::int64_t ConfigFile::get_int(const std::string& section, const std::string& key) const {
    const double d = get_double(section, key);
    const auto i = std::int64_t(std::llround(d));
    if (std::abs(d - double(i)) > 1e-9) {
        throw validation_error("config: [" + section + "] " + key + " is not an integer");
    }
    return i;
}

std::int64_t ConfigFile::get_int_or(const std::string& section, const std::string& key,
                                    std::int64_t fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

std::vector<double> ConfigFile::get_list(const std::string& section,
                                         const std::string& key) const {
    std::vector<double> out;
    for (const std::string& item : split_items(get_string(section, key))) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw validation_error("config: [" + section + "] " + key +
                                   " has a non-numeric item: " + item);
        }
    }
    if (out.empty()) {
        throw validation_error("config: [" + section + "] " + key + " is an empty list");
    }
    return out;
}

std::vector<int> ConfigFile::get_int_list(const std::string& section,
                                          const std::string& key) const {
    std::vector<int> out;
    for (double d : get_list(section, key)) {
        const int i = int(std::llround(d));
        if (std::abs(d - double(i)) > 1e-9) {
            throw validation_error("config: [" + section + "] " + key +
                                   " has a non-integer item");
        }
        out.push_back(i);
    }
    return out;
}

std::vector<std::string> ConfigFile::keys_with_prefix(const std::string& section,
                                                      const std::string& prefix) const {
    std::vector<std::string> out;
    auto s = sections_.find(section);
    if (s == sections_.end()) return out;
    const std::string p = prefix + ".";
    for (const auto& [key, _] : s->second) {
        if (key.rfind(p, 0) == 0) out.push_back(key.substr(p.size()));
    }
    return out;
}

std::vector<std::string> ConfigFile::dump() const {
    std::vector<std::string> lines;
    for (const auto& [section, kv] : sections_) {
        for (const auto& [key, value] : kv) {
            lines.push_back(section + "." + key + " = " + value);
        }
    }
    return lines;
}

void ConfigFile::set(const std::string& section, const std::string& key,
                     const std::string& value) {
    sections_[section][key] = value;
}

HarmonicFn parse_harmonic(const ConfigFile& cfg, const std::string& section,
                          const std::string& prefix) {
    const double c0 = cfg.get_double_or(section, prefix + ".c0", 0.0);
    std::map<int, HarmonicTerm> terms;
    for (const std::string& sub : cfg.keys_with_prefix(section, prefix)) {
        if (sub == "c0") continue;
        const std::size_t dot = sub.find('.');
        if (dot == std::string::npos) {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": expected sin.<freq> or cos.<freq>");
        }
        const std::string kind = sub.substr(0, dot);
        int freq = 0;
        try {
            freq = std::stoi(sub.substr(dot + 1));
        } catch (const std::exception&) {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": bad frequency");
        }
        if (freq < 1) {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": frequency must be >= 1");
        }
        const double coef = cfg.get_double(section, prefix + "." + sub);
        auto& term = terms[freq];
        term.freq = freq;
        if (kind == "sin") {
            term.sin_c = coef;
        } else if (kind == "cos") {
            term.cos_c = coef;
        } else {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": expected sin or cos");
        }
    }
    std::vector<HarmonicTerm> list;
    for (auto& [_, t] : terms) list.push_back(t);
    return HarmonicFn(c0, std::move(list));
}

PairKernel parse_pair_kernel(const ConfigFile& cfg, const std::string& section,
                             const std::string& prefix) {
    PairKernel kernel(cfg.get_double_or(section, prefix + ".c0", 0.0));
    for (const std::string& sub : cfg.keys_with_prefix(section, prefix)) {
        if (sub == "c0") continue;
        const std::size_t dot = sub.find('.');
        if (dot == std::string::npos) {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": expected <kind>.<freq>");
        }
        const std::string kind = sub.substr(0, dot);
        int freq = 0;
        try {
            freq = std::stoi(sub.substr(dot + 1));
        } catch (const std::exception&) {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": bad frequency");
        }
        if (freq < 1) {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": frequency must be >= 1");
        }
        const double coef = cfg.get_double(section, prefix + "." + sub);
        HarmonicTerm term{freq, 0.0, 0.0};
        if (kind == "sin_diff") {
            term.sin_c = coef;
            kernel.add_diff(term);
        } else if (kind == "cos_diff") {
            term.cos_c = coef;
            kernel.add_diff(term);
        } else if (kind == "sin_u") {
            term.sin_c = coef;
            kernel.add_u(term);
        } else if (kind == "cos_u") {
            term.cos_c = coef;
            kernel.add_u(term);
        } else if (kind == "sin_v") {
            term.sin_c = coef;
            kernel.add_v(term);
        } else if (kind == "cos_v") {
            term.cos_c = coef;
            kernel.add_v(term);
        } else {
            throw validation_error("config: [" + section + "] " + prefix + "." + sub +
                                   ": unknown kernel term '" + kind + "'");
        }
    }
    return kernel;
}

RatePolicy ExperimentConfig::make_policy() const { return make_preset(preset); }

InitialProfile ExperimentConfig::make_profile() const {
    InitialProfile profile;
    profile.psi = psi;
    profile.capacity = make_policy().capacity();
    profile.validate();
    return profile;
}

int ExperimentConfig::resolved_kmax() const {
    if (kmax > 0) return kmax;
    // Default truncation level: generous against the super-exponential tails
    // of the occupation counts.
    const double psi_max = psi.max_on_grid(256);
    const int derived = int(std::ceil(4.0 * psi_max + 30.0));
    if (kmax < 0) {
        throw validation_error(
            "config: [meanfield] kmax is required for unbounded capacity; set an "
            "integer or 'auto' (auto would use " + std::to_string(derived) + ")");
    }
    return derived;
}

namespace {

PresetKind parse_preset_kind(const std::string& name) {
    if (name == "generalized_exclusion") return PresetKind::generalized_exclusion;
    if (name == "exclusion") return PresetKind::exclusion;
    if (name == "zero_range") return PresetKind::zero_range;
    if (name == "ehrenfest") return PresetKind::ehrenfest;
    if (name == "misanthrope") return PresetKind::misanthrope;
    throw validation_error("config: unknown preset '" + name + "'");
}

OccupancyLaw parse_occupancy(const std::string& name) {
    if (name == "indicator") return OccupancyLaw::indicator;
    if (name == "linear") return OccupancyLaw::linear;
    if (name == "saturating") return OccupancyLaw::saturating;
    throw validation_error("config: unknown occupancy law '" + name + "'");
}

ExperimentConfig resolve(ConfigFile raw) {
    ExperimentConfig ec;
    ec.raw = raw;

    ec.preset.kind = parse_preset_kind(raw.get_string("model", "preset"));
    ec.preset.base = parse_pair_kernel(raw, "model", "phi");
    ec.preset.capacity = int(raw.get_int_or("model", "capacity", 1));
    ec.preset.occupancy =
        parse_occupancy(raw.get_string_or("model", "occupancy", "indicator"));
    ec.preset.misanthrope_infinite =
        raw.get_int_or("model", "misanthrope_infinite", 0) != 0;

    ec.psi = parse_harmonic(raw, "psi", "psi");

    if (raw.has("run", "N_list")) {
        ec.n_list = raw.get_int_list("run", "N_list");
        ec.n_sites = ec.n_list.back();
    }
    if (raw.has("run", "N")) ec.n_sites = int(raw.get_int("run", "N"));
    if (ec.n_sites <= 1 && ec.n_list.empty()) {
        throw validation_error("config: [run] needs N or N_list");
    }
    if (ec.n_list.empty()) ec.n_list = {ec.n_sites};

    ec.horizon = raw.get_double("run", "T");
    if (!(ec.horizon >= 0.0)) throw validation_error("config: [run] T must be >= 0");
    if (raw.has("run", "observation_times")) {
        ec.observation_times = raw.get_list("run", "observation_times");
        std::sort(ec.observation_times.begin(), ec.observation_times.end());
        for (double t : ec.observation_times) {
            if (t < 0.0 || t > ec.horizon) {
                throw validation_error("config: observation time outside [0, T]");
            }
        }
    } else {
        ec.observation_times = {ec.horizon};
    }
    ec.replicas = int(raw.get_int_or("run", "replicas", 1));
    if (ec.replicas < 1) throw validation_error("config: [run] replicas must be >= 1");
    ec.seed = std::uint64_t(raw.get_int_or("run", "seed", 1));

    ec.grid_size = int(raw.get_int_or("meanfield", "M", 64));
    if (ec.grid_size < 8) throw validation_error("config: [meanfield] M must be >= 8");
    ec.dt = raw.get_double_or("meanfield", "dt", 1e-3);
    if (!(ec.dt > 0.0)) throw validation_error("config: [meanfield] dt must be positive");
    if (raw.has("meanfield", "kmax")) {
        if (raw.get_string("meanfield", "kmax") == "auto") {
            ec.kmax = 0;
        } else {
            ec.kmax = int(raw.get_int("meanfield", "kmax"));
            if (ec.kmax < 1) {
                throw validation_error("config: [meanfield] kmax must be >= 1 or 'auto'");
            }
        }
    }
    ec.save_stride = int(raw.get_int_or("meanfield", "save_stride", 1));
    if (ec.save_stride < 1) {
        throw validation_error("config: [meanfield] save_stride must be >= 1");
    }

    ec.output_dir = raw.get_string_or("output", "dir", "out");

    // Construct the policy and profile once now so invalid models fail before
    // any run starts.
    ec.make_profile();
    return ec;
}

} // namespace

ExperimentConfig load_experiment(const std::string& path) {
    return resolve(ConfigFile::parse_file(path));
}

ExperimentConfig experiment_from_string(const std::string& text) {
    return resolve(ConfigFile::parse_string(text));
}

} // namespace conserva
