#ifndef CONSERVA_CONFIG_HPP
#define CONSERVA_CONFIG_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conserva/functions.hpp"
#include "conserva/model.hpp"
#include "conserva/sim.hpp"

namespace conserva {

/// Key/value configuration with [section] tables and dotted keys, e.g.
///
///   [model]
///   preset = exclusion
///   phi.c0 = 1.0
///   phi.cos_diff.1 = 0.5
///
/// Values are strings; typed accessors parse on demand and raise
/// validation_error with the offending key on failure.
class ConfigFile {
  public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text);

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string_or(const std::string& section, const std::string& key,
                              const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const;
    std::int64_t get_int(const std::string& section, const std::string& key) const;
    std::int64_t get_int_or(const std::string& section, const std::string& key,
                            std::int64_t fallback) const;
    std::vector<double> get_list(const std::string& section, const std::string& key) const;
    std::vector<int> get_int_list(const std::string& section, const std::string& key) const;

    /// Keys of a section that start with `prefix.`, with the prefix stripped.
    std::vector<std::string> keys_with_prefix(const std::string& section,
                                              const std::string& prefix) const;

    /// Resolved "section.key = value" lines, sorted, for the reproducibility
    /// header of every output file.
    std::vector<std::string> dump() const;

    void set(const std::string& section, const std::string& key, const std::string& value);

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

/// Harmonic function from dotted keys under `prefix`:
///   prefix.c0, prefix.sin.<freq>, prefix.cos.<freq>
HarmonicFn parse_harmonic(const ConfigFile& cfg, const std::string& section,
                          const std::string& prefix);

/// Pair kernel from dotted keys under `prefix`:
///   prefix.c0, prefix.{cos_diff,sin_diff,cos_u,sin_u,cos_v,sin_v}.<freq>
PairKernel parse_pair_kernel(const ConfigFile& cfg, const std::string& section,
                             const std::string& prefix);

/// Fully resolved experiment inputs shared by the subcommands.
struct ExperimentConfig {
    ConfigFile raw;

    ModelPreset preset;
    HarmonicFn psi;

    int n_sites = 0;
    std::vector<int> n_list;
    double horizon = 1.0;
    std::vector<double> observation_times;
    int replicas = 1;
    std::uint64_t seed = 1;

    int grid_size = 64;   // meanfield M
    double dt = 1e-3;
    int kmax = -1;        // -1 = unset, 0 = "auto" (derive the default)
    int save_stride = 1;

    std::string output_dir = "out";

    RatePolicy make_policy() const;
    InitialProfile make_profile() const;

    /// Default truncation level 4*max(psi) + 30 when kmax = auto; the
    /// explicit value otherwise. Unset kmax with unbounded capacity is a
    /// validation error naming the key.
    int resolved_kmax() const;
};

/// Parses and validates; unknown presets, missing keys and inadmissible
/// values raise validation_error before any run starts.
ExperimentConfig load_experiment(const std::string& path);
ExperimentConfig experiment_from_string(const std::string& text);

} // namespace conserva

#endif
