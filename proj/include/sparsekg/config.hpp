#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "sparsekg/sim.hpp"

namespace sparsekg {

// Minimal TOML subset: comments, [tables], and key = value lines where value
// is a quoted string, a number, a boolean, or a single-line array of those.
struct TomlValue {
    enum class Kind { Bool, Number, String, Array };
    Kind kind = Kind::Number;
    bool b = false;
    double num = 0.0;
    std::string str;
    std::string raw;  // original token, for full-precision integer reads
    std::vector<TomlValue> arr;
};

struct TomlDoc {
    // "" is the root table. Parse errors carry the line number.
    std::map<std::string, std::map<std::string, TomlValue>> tables;
};

TomlDoc parse_toml(const std::string& text);

// Typed access with consumption tracking: finish() rejects any key or table
// that was never read, so misspelled config entries fail loudly.
class TomlReader {
public:
    explicit TomlReader(TomlDoc doc);

    bool has(const std::string& table, const std::string& key) const;
    bool boolean(const std::string& table, const std::string& key, bool fallback);
    double number(const std::string& table, const std::string& key, double fallback);
    long long integer(const std::string& table, const std::string& key, long long fallback);
    std::uint64_t u64(const std::string& table, const std::string& key);
    std::string str(const std::string& table, const std::string& key,
                    const std::string& fallback);
    std::vector<std::string> str_array(const std::string& table, const std::string& key);
    std::vector<long long> int_array(const std::string& table, const std::string& key);

    // Required-key variants throw when the key is missing.
    double number_req(const std::string& table, const std::string& key);
    std::string str_req(const std::string& table, const std::string& key);
    std::uint64_t u64_req(const std::string& table, const std::string& key);

    void finish() const;

private:
    const TomlValue* find(const std::string& table, const std::string& key) const;
    const TomlValue& get(const std::string& table, const std::string& key) const;

    TomlDoc doc_;
    mutable std::map<std::string, std::set<std::string>> consumed_;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string truth;
    std::vector<PolicyKind> policies;
    int budget = 0;
    int reps = 1;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string out_dir = "results";

    int alternatives = 0;
    double noise_fraction = 0.05;  // sparse-linear truth
    double noise_sd = 1.0;         // benchmark-function truths
    int ambient_dim = 200;         // benchmark-function truths

    PolicyConfig policy;
    std::vector<int> checkpoint_rounds;
};

// Parses and validates a config file's text. Unknown keys or tables, missing
// required fields (schema_version, experiment.truth/policies/seed), and type
// mismatches all throw std::runtime_error with a descriptive message.
ExperimentConfig parse_experiment_config(const std::string& toml_text);

TruthFactory make_truth_factory(const ExperimentConfig& cfg);

RunConfig make_run_config(const ExperimentConfig& cfg);

}  // namespace sparsekg
