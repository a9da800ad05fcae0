#include "sparsekg/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace sparsekg {

namespace {

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(int line, const std::string& msg) {
    throw std::runtime_error("config line " + std::to_string(line) + ": " + msg);
}

bool bare_key_ok(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

std::string strip_comment(const std::string& line, int line_no) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (in_str) {
            if (c == '\\') {
                ++i;
                continue;
            }
            if (c == '"') in_str = false;
        } else if (c == '"') {
            in_str = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    if (in_str) fail(line_no, "unterminated string");
    return line;
}

std::string decode_string(const std::string& token, int line_no) {
    std::string out;
    for (size_t i = 1; i + 1 <= token.size(); ++i) {
        const char c = token[i];
        if (i == token.size() - 1) {
            if (c != '"') fail(line_no, "unterminated string");
            return out;
        }
        if (c == '\\') {
            ++i;
            if (i >= token.size() - 1) fail(line_no, "dangling escape");
            switch (token[i]) {
                case '"': out.push_back('"'); break;
                case '\\': out.push_back('\\'); break;
                case 'n': out.push_back('\n'); break;
                case 't': out.push_back('\t'); break;
                default: fail(line_no, "unsupported escape in string");
            }
        } else {
            out.push_back(c);
        }
    }
    fail(line_no, "unterminated string");
}

TomlValue parse_value(const std::string& token_in, int line_no);

std::vector<std::string> split_array_items(const std::string& inner, int line_no) {
    std::vector<std::string> items;
    std::string cur;
    bool in_str = false;
    int depth = 0;
    for (size_t i = 0; i < inner.size(); ++i) {
        const char c = inner[i];
        if (in_str) {
            cur.push_back(c);
            if (c == '\\') {
                if (i + 1 < inner.size()) cur.push_back(inner[++i]);
                continue;
            }
            if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') {
            in_str = true;
            cur.push_back(c);
        } else if (c == '[') {
            ++depth;
            cur.push_back(c);
        } else if (c == ']') {
            --depth;
            if (depth < 0) fail(line_no, "unbalanced brackets in array");
            cur.push_back(c);
        } else if (c == ',' && depth == 0) {
            items.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (in_str || depth != 0) fail(line_no, "unbalanced array");
    if (!trim(cur).empty()) items.push_back(cur);
    return items;
}

TomlValue parse_value(const std::string& token_in, int line_no) {
    const std::string token = trim(token_in);
    if (token.empty()) fail(line_no, "missing value");
    TomlValue v;
    v.raw = token;
    if (token.front() == '"') {
        v.kind = TomlValue::Kind::String;
        v.str = decode_string(token, line_no);
        return v;
    }
    if (token.front() == '[') {
        if (token.back() != ']') fail(line_no, "array must close on the same line");
        v.kind = TomlValue::Kind::Array;
        for (const std::string& item : split_array_items(token.substr(1, token.size() - 2), line_no))
            v.arr.push_back(parse_value(item, line_no));
        return v;
    }
    if (token == "true" || token == "false") {
        v.kind = TomlValue::Kind::Bool;
        v.b = token == "true";
        return v;
    }
    v.kind = TomlValue::Kind::Number;
    try {
        size_t pos = 0;
        v.num = std::stod(token, &pos);
        if (pos != token.size()) fail(line_no, "trailing characters after number: " + token);
    } catch (const std::invalid_argument&) {
        fail(line_no, "cannot parse value: " + token);
    } catch (const std::out_of_range&) {
        fail(line_no, "number out of range: " + token);
    }
    return v;
}

}  // namespace

TomlDoc parse_toml(const std::string& text) {
    TomlDoc doc;
    doc.tables[""];
    std::string current;
    int line_no = 0;
    size_t start = 0;
    while (start <= text.size()) {
        const size_t end = text.find('\n', start);
        std::string line = text.substr(
            start, end == std::string::npos ? std::string::npos : end - start);
        ++line_no;
        start = end == std::string::npos ? text.size() + 1 : end + 1;

        line = trim(strip_comment(line, line_no));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(line_no, "malformed table header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!bare_key_ok(name)) fail(line_no, "bad table name: " + name);
            if (doc.tables.count(name)) fail(line_no, "duplicate table: " + name);
            doc.tables[name];
            current = name;
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) fail(line_no, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (!bare_key_ok(key)) fail(line_no, "bad key: " + key);
        auto& table = doc.tables[current];
        if (table.count(key)) fail(line_no, "duplicate key: " + key);
        table[key] = parse_value(line.substr(eq + 1), line_no);
    }
    return doc;
}

TomlReader::TomlReader(TomlDoc doc) : doc_(std::move(doc)) {}

const TomlValue* TomlReader::find(const std::string& table, const std::string& key) const {
    auto t = doc_.tables.find(table);
    if (t == doc_.tables.end()) return nullptr;
    auto k = t->second.find(key);
    if (k == t->second.end()) return nullptr;
    consumed_[table].insert(key);
    return &k->second;
}

namespace {
std::string key_name(const std::string& table, const std::string& key) {
    return table.empty() ? key : table + "." + key;
}
}  // namespace

const TomlValue& TomlReader::get(const std::string& table, const std::string& key) const {
    const TomlValue* v = find(table, key);
    if (!v) throw std::runtime_error("config: missing required key " + key_name(table, key));
    return *v;
}

bool TomlReader::has(const std::string& table, const std::string& key) const {
    return find(table, key) != nullptr;
}

bool TomlReader::boolean(const std::string& table, const std::string& key, bool fallback) {
    const TomlValue* v = find(table, key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::Bool)
        throw std::runtime_error("config: " + key_name(table, key) + " must be a boolean");
    return v->b;
}

double TomlReader::number(const std::string& table, const std::string& key, double fallback) {
    const TomlValue* v = find(table, key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::Number)
        throw std::runtime_error("config: " + key_name(table, key) + " must be a number");
    return v->num;
}

double TomlReader::number_req(const std::string& table, const std::string& key) {
    const TomlValue& v = get(table, key);
    if (v.kind != TomlValue::Kind::Number)
        throw std::runtime_error("config: " + key_name(table, key) + " must be a number");
    return v.num;
}

namespace {

bool integer_token(const std::string& raw, bool allow_sign) {
    if (raw.empty()) return false;
    size_t i = 0;
    if (allow_sign && (raw[0] == '+' || raw[0] == '-')) i = 1;
    if (i >= raw.size()) return false;
    for (; i < raw.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(raw[i]))) return false;
    return true;
}

long long integral_from(const TomlValue& v, const std::string& what) {
    if (v.kind != TomlValue::Kind::Number)
        throw std::runtime_error("config: " + what + " must be an integer");
    if (integer_token(v.raw, true)) return std::stoll(v.raw);
    if (std::floor(v.num) != v.num || std::abs(v.num) > 9.0e15)
        throw std::runtime_error("config: " + what + " must be an integer");
    return static_cast<long long>(v.num);
}

}  // namespace

long long TomlReader::integer(const std::string& table, const std::string& key,
                              long long fallback) {
    const TomlValue* v = find(table, key);
    if (!v) return fallback;
    return integral_from(*v, key_name(table, key));
}

std::uint64_t TomlReader::u64(const std::string& table, const std::string& key) {
    const TomlValue& v = get(table, key);
    if (v.kind == TomlValue::Kind::Number && integer_token(v.raw, false))
        return std::stoull(v.raw);
    const long long n = integral_from(v, key_name(table, key));
    if (n < 0)
        throw std::runtime_error("config: " + key_name(table, key) + " must be nonnegative");
    return static_cast<std::uint64_t>(n);
}

std::uint64_t TomlReader::u64_req(const std::string& table, const std::string& key) {
    get(table, key);  // force missing-key error first
    return u64(table, key);
}

std::string TomlReader::str(const std::string& table, const std::string& key,
                            const std::string& fallback) {
    const TomlValue* v = find(table, key);
    if (!v) return fallback;
    if (v->kind != TomlValue::Kind::String)
        throw std::runtime_error("config: " + key_name(table, key) + " must be a string");
    return v->str;
}

std::string TomlReader::str_req(const std::string& table, const std::string& key) {
    const TomlValue& v = get(table, key);
    if (v.kind != TomlValue::Kind::String)
        throw std::runtime_error("config: " + key_name(table, key) + " must be a string");
    return v.str;
}

std::vector<std::string> TomlReader::str_array(const std::string& table, const std::string& key) {
    const TomlValue* v = find(table, key);
    if (!v) return {};
    if (v->kind != TomlValue::Kind::Array)
        throw std::runtime_error("config: " + key_name(table, key) + " must be an array");
    std::vector<std::string> out;
    for (const TomlValue& e : v->arr) {
        if (e.kind != TomlValue::Kind::String)
            throw std::runtime_error("config: " + key_name(table, key) +
                                     " must contain only strings");
        out.push_back(e.str);
    }
    return out;
}

std::vector<long long> TomlReader::int_array(const std::string& table, const std::string& key) {
    const TomlValue* v = find(table, key);
    if (!v) return {};
    if (v->kind != TomlValue::Kind::Array)
        throw std::runtime_error("config: " + key_name(table, key) + " must be an array");
    std::vector<long long> out;
    for (const TomlValue& e : v->arr) out.push_back(integral_from(e, key_name(table, key)));
    return out;
}

void TomlReader::finish() const {
    std::vector<std::string> unknown;
    for (const auto& [table, keys] : doc_.tables) {
        auto c = consumed_.find(table);
        for (const auto& [key, value] : keys) {
            if (c == consumed_.end() || !c->second.count(key))
                unknown.push_back(key_name(table, key));
        }
    }
    if (!unknown.empty()) {
        std::string msg = "config: unknown keys:";
        for (const std::string& k : unknown) msg += " " + k;
        throw std::runtime_error(msg);
    }
}

ExperimentConfig parse_experiment_config(const std::string& toml_text) {
    TomlReader rd(parse_toml(toml_text));

    const long long schema = rd.integer("", "schema_version", -1);
    if (schema != 1) throw std::runtime_error("config: schema_version = 1 is required");

    ExperimentConfig cfg;
    cfg.name = rd.str("experiment", "name", "experiment");
    cfg.truth = rd.str_req("experiment", "truth");

    const bool sparse_linear = cfg.truth == "sparse-linear";
    const bool ssanova = cfg.truth == "ss-anova";
    if (!sparse_linear && !ssanova) test_function_from_name(cfg.truth);  // validates

    for (const std::string& s : rd.str_array("experiment", "policies"))
        cfg.policies.push_back(policy_from_name(s));
    if (cfg.policies.empty())
        throw std::runtime_error("config: experiment.policies must list at least one policy");

    cfg.seed = rd.u64_req("experiment", "seed");
    cfg.reps = static_cast<int>(rd.integer("experiment", "reps", 1));
    const long long default_budget = sparse_linear ? 200 : (ssanova ? 30 : 50);
    cfg.budget = static_cast<int>(rd.integer("experiment", "budget", default_budget));
    cfg.threads = static_cast<int>(rd.integer("experiment", "threads", 1));
    cfg.out_dir = rd.str("experiment", "out_dir", "results");

    const long long default_alternatives = ssanova ? 400 : 100;
    cfg.alternatives =
        static_cast<int>(rd.integer("truth", "alternatives", default_alternatives));
    if (sparse_linear) {
        cfg.noise_fraction = rd.number("truth", "noise_fraction", 0.05);
    } else if (!ssanova) {
        cfg.noise_sd = rd.number("truth", "noise_sd", 1.0);
        cfg.ambient_dim = static_cast<int>(rd.integer("truth", "ambient_dim", 200));
    }

    PolicyConfig& p = cfg.policy;
    p.warmup_rounds = static_cast<int>(rd.integer("policy", "warmup_rounds", p.warmup_rounds));
    p.lambda_multiplier = rd.number("policy", "lambda_multiplier", p.lambda_multiplier);
    p.max_terms = static_cast<int>(rd.integer("policy", "max_terms", p.max_terms));
    p.mc_samples = static_cast<int>(rd.integer("policy", "mc_samples", p.mc_samples));
    p.c_min = rd.number("policy", "c_min", p.c_min);
    p.c_max = rd.number("policy", "c_max", p.c_max);
    p.var_cap = rd.number("policy", "var_cap", p.var_cap);
    p.prior_variance = rd.number("policy", "prior_variance", p.prior_variance);
    p.xi0 = rd.number("policy", "xi0", p.xi0);
    p.eta0 = rd.number("policy", "eta0", p.eta0);
    p.solver_rel_tol = rd.number("policy", "solver_rel_tol", p.solver_rel_tol);
    for (long long n : rd.int_array("policy", "checkpoint_rounds"))
        cfg.checkpoint_rounds.push_back(static_cast<int>(n));

    rd.finish();

    if (cfg.reps < 1) throw std::runtime_error("config: reps must be >= 1");
    if (cfg.budget < 1) throw std::runtime_error("config: budget must be >= 1");
    if (cfg.threads < 1) throw std::runtime_error("config: threads must be >= 1");
    if (cfg.alternatives < 2) throw std::runtime_error("config: alternatives must be >= 2");
    if (cfg.noise_fraction < 0.0 || cfg.noise_sd < 0.0)
        throw std::runtime_error("config: noise must be nonnegative");
    if (p.warmup_rounds < 0) throw std::runtime_error("config: warmup_rounds must be >= 0");
    if (p.max_terms < 1) throw std::runtime_error("config: max_terms must be >= 1");
    if (p.mc_samples < 2) throw std::runtime_error("config: mc_samples must be >= 2");
    if (!(p.c_min > 0.0) || !(p.c_max >= p.c_min))
        throw std::runtime_error("config: need 0 < c_min <= c_max");
    if (!(p.prior_variance > 0.0))
        throw std::runtime_error("config: prior_variance must be positive");
    return cfg;
}

TruthFactory make_truth_factory(const ExperimentConfig& cfg) {
    if (cfg.truth == "sparse-linear") {
        const int m = cfg.alternatives;
        const double f = cfg.noise_fraction;
        return [m, f](std::uint64_t seed) { return gen_sparse_linear_truth(m, f, seed); };
    }
    if (cfg.truth == "ss-anova") {
        const int m = cfg.alternatives;
        return [m](std::uint64_t seed) { return gen_ssanova_truth(m, seed); };
    }
    const TestFunction fn = test_function_from_name(cfg.truth);
    const int m = cfg.alternatives;
    const double sd = cfg.noise_sd;
    const int ambient = cfg.ambient_dim;
    return [fn, m, sd, ambient](std::uint64_t seed) {
        return gen_test_function_truth(fn, m, sd, ambient, seed);
    };
}

RunConfig make_run_config(const ExperimentConfig& cfg) {
    RunConfig rc;
    rc.name = cfg.name;
    rc.policies = cfg.policies;
    rc.budget = cfg.budget;
    rc.reps = cfg.reps;
    rc.seed = cfg.seed;
    rc.policy = cfg.policy;
    rc.checkpoint_rounds = cfg.checkpoint_rounds;
    rc.threads = cfg.threads;
    return rc;
}

}  // namespace sparsekg
