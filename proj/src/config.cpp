#include "qdi/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qdi/io.hpp"

namespace qdi {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& raw,
                            const std::string& want) {
    throw config_error("key '" + key + "': value '" + raw + "' is not " + want);
}

double to_double(const std::string& key, const std::string& raw) {
    char* end = nullptr;
    const double v = std::strtod(raw.c_str(), &end);
    if (end == raw.c_str() || *end != '\0' || !std::isfinite(v))
        bad_value(key, raw, "a finite number");
    return v;
}

long long to_int(const std::string& key, const std::string& raw) {
    char* end = nullptr;
    const long long v = std::strtoll(raw.c_str(), &end, 10);
    if (end == raw.c_str() || *end != '\0') bad_value(key, raw, "an integer");
    return v;
}

uint64_t to_u64(const std::string& key, const std::string& raw) {
    if (!raw.empty() && raw[0] == '-') bad_value(key, raw, "a non-negative integer");
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw.c_str(), &end, 10);
    if (end == raw.c_str() || *end != '\0') bad_value(key, raw, "a non-negative integer");
    return v;
}

bool to_bool(const std::string& key, const std::string& raw) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    bad_value(key, raw, "'true' or 'false'");
}

std::string check_enum(const std::string& key, const std::string& raw,
                       std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (raw == a) return raw;
    std::string list;
    for (const char* a : allowed) {
        if (!list.empty()) list += " | ";
        list += a;
    }
    throw config_error("key '" + key + "': value '" + raw + "' not one of " + list);
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

struct KeyDef {
    std::string name;
    std::function<void(RunConfig&, const std::string&)> set;
    // empty getter = write-only sugar, never echoed
    std::function<std::string(const RunConfig&)> get;
};

#define NUM_KEY(key, field, cond, want)                                              \
    KeyDef{key,                                                                      \
           [](RunConfig& c, const std::string& raw) {                                \
               const double v = to_double(key, raw);                                 \
               if (!(cond)) bad_value(key, raw, want);                               \
               c.field = v;                                                          \
           },                                                                        \
           [](const RunConfig& c) { return format_double(c.field); }}

#define INT_KEY(key, field, cond, want)                                              \
    KeyDef{key,                                                                      \
           [](RunConfig& c, const std::string& raw) {                                \
               const long long v = to_int(key, raw);                                 \
               if (!(cond)) bad_value(key, raw, want);                               \
               c.field = static_cast<int>(v);                                        \
           },                                                                        \
           [](const RunConfig& c) { return std::to_string(c.field); }}

#define ENUM_KEY(key, field, ...)                                                    \
    KeyDef{key,                                                                      \
           [](RunConfig& c, const std::string& raw) {                                \
               c.field = check_enum(key, raw, {__VA_ARGS__});                        \
           },                                                                        \
           [](const RunConfig& c) { return quoted(c.field); }}

#define STR_KEY(key, field)                                                          \
    KeyDef{key, [](RunConfig& c, const std::string& raw) { c.field = raw; },         \
           [](const RunConfig& c) { return quoted(c.field); }}

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> table = {
        INT_KEY("grid.n", grid_n, v >= 8 && v <= 32768 && v % 2 == 0,
                "an even sample count in [8, 32768]"),
        NUM_KEY("grid.half_extent", grid_half_extent, v > 0, "a positive extent"),
        ENUM_KEY("pump.model", pump_model, "gaussian", "sinc"),
        NUM_KEY("pump.sigma_p", pump_sigma_p, v > 0, "a positive momentum spread"),
        NUM_KEY("pump.L", pump_L, v > 0, "a positive crystal parameter"),
        KeyDef{"pump.sigma_p_L",
               [](RunConfig& c, const std::string& raw) {
                   const double v = to_double("pump.sigma_p_L", raw);
                   if (v <= 0) bad_value("pump.sigma_p_L", raw, "a positive product");
                   c.pump_sigma_p = c.pump_L = std::sqrt(v);
               },
               nullptr},
        ENUM_KEY("basis.family", basis_family, "hermite_gauss", "laguerre_gauss"),
        INT_KEY("basis.max_total_order", basis_max_total_order, v >= 0 && v <= 64,
                "an order in [0, 64]"),
        NUM_KEY("basis.waist", basis_waist, v >= 0, "a non-negative waist (0 = auto)"),
        INT_KEY("decompose.rank", decompose_rank, v >= 1 && v <= 1 << 20, "a positive rank"),
        ENUM_KEY("matter.kind", matter_kind, "pgm", "uniform", "point", "annulus",
                 "annulus_phase", "random"),
        STR_KEY("matter.magnitude", matter_magnitude),
        STR_KEY("matter.phase", matter_phase),
        NUM_KEY("matter.point_x", matter_point_x, std::isfinite(v), "finite"),
        NUM_KEY("matter.point_y", matter_point_y, std::isfinite(v), "finite"),
        NUM_KEY("matter.phase_pitch", matter_phase_pitch, v > 0, "a positive pitch"),
        INT_KEY("matter.render_n", matter_render_n, v >= 16 && v <= 8192,
                "a raster size in [16, 8192]"),
        INT_KEY("imaging.order_p", imaging_order_p, v == 1 || v == 2, "1 or 2"),
        INT_KEY("imaging.truncation", imaging_truncation, v >= 1, "a positive mode count"),
        ENUM_KEY("imaging.scheme", imaging_scheme, "natural", "flattened"),
        ENUM_KEY("imaging.detector_sign", imaging_detector_sign, "auto", "negated", "direct"),
        KeyDef{"imaging.sweep",
               [](RunConfig& c, const std::string& raw) {
                   c.imaging_sweep = to_bool("imaging.sweep", raw);
               },
               [](const RunConfig& c) { return std::string(c.imaging_sweep ? "true" : "false"); }},
        NUM_KEY("specresolve.omega", specresolve_omega, v >= 0, "a non-negative detuning"),
        ENUM_KEY("specresolve.convention", specresolve_convention, "radial", "x_projection"),
        NUM_KEY("gates.signal_center", gates_signal_center, v > 0, "a positive frequency"),
        NUM_KEY("gates.signal_fwhm", gates_signal_fwhm, v > 0, "a positive width"),
        NUM_KEY("gates.idler_center", gates_idler_center, v > 0, "a positive frequency"),
        NUM_KEY("gates.idler_fwhm", gates_idler_fwhm, v > 0, "a positive width"),
        NUM_KEY("gates.pump_sum_fwhm", gates_pump_sum_fwhm, v > 0, "a positive width"),
        NUM_KEY("gates.pump_sum_center", gates_pump_sum_center, v != 0,
                "a positive frequency (negative = signal + idler centers)"),
        INT_KEY("farfield.n_radial", farfield_n_radial, v >= 2 && v <= 4096,
                "a radial count in [2, 4096]"),
        INT_KEY("farfield.n_angular", farfield_n_angular, v >= 4 && v <= 16384,
                "an angular count in [4, 16384]"),
        INT_KEY("farfield.n_omega", farfield_n_omega, v >= 1 && v <= 65536,
                "a frequency count in [1, 65536]"),
        NUM_KEY("farfield.omega_min", farfield_omega_min, v >= 0, "a non-negative frequency"),
        NUM_KEY("farfield.omega_max", farfield_omega_max, v >= 0, "a non-negative frequency"),
        NUM_KEY("farfield.disk_radius", farfield_disk_radius, v >= 0,
                "a non-negative radius (0 = grid half extent)"),
        NUM_KEY("farfield.c_light", farfield_c_light, v > 0, "a positive speed"),
        KeyDef{"run.seed",
               [](RunConfig& c, const std::string& raw) { c.run_seed = to_u64("run.seed", raw); },
               [](const RunConfig& c) { return std::to_string(c.run_seed); }},
        STR_KEY("output.dir", output_dir),
        NUM_KEY("tol.gram_error", tol_gram_error, v > 0, "a positive tolerance"),
        NUM_KEY("tol.weight_sum", tol_weight_sum, v > 0, "a positive tolerance"),
        NUM_KEY("tol.norm_check", tol_norm_check, v > 0, "a positive tolerance"),
    };
    return table;
}

#undef NUM_KEY
#undef INT_KEY
#undef ENUM_KEY
#undef STR_KEY

int levenshtein(const std::string& a, const std::string& b) {
    std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = static_cast<int>(i);
        for (size_t j = 1; j <= b.size(); ++j) {
            const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

const KeyDef* find_key(const std::string& name) {
    for (const auto& k : key_table())
        if (k.name == name) return &k;
    return nullptr;
}

std::string nearest_key(const std::string& name) {
    int best = 1 << 30;
    std::string who;
    for (const auto& k : key_table()) {
        const int d = levenshtein(name, k.name);
        if (d < best) {
            best = d;
            who = k.name;
        }
    }
    return who;
}

void cross_validate(RunConfig& cfg, const std::set<std::string>& seen,
                    const std::string& origin) {
    if (seen.count("pump.sigma_p_L") && (seen.count("pump.sigma_p") || seen.count("pump.L")))
        throw config_error(origin +
                           ": pump.sigma_p_L already fixes both pump parameters, drop the "
                           "explicit pump.sigma_p / pump.L");
    if (!cfg.matter_magnitude.empty() && !seen.count("matter.kind")) cfg.matter_kind = "pgm";
    if (cfg.matter_kind == "pgm" && cfg.matter_magnitude.empty())
        throw config_error(origin + ": matter.kind = pgm needs a matter.magnitude path");
    if (cfg.matter_kind != "pgm" && !cfg.matter_magnitude.empty())
        throw config_error(origin + ": matter.magnitude only applies to matter.kind = pgm");
    if (cfg.matter_kind != "pgm" && !cfg.matter_phase.empty())
        throw config_error(origin + ": matter.phase only applies to matter.kind = pgm");
    if (cfg.farfield_omega_min > 0 && cfg.farfield_omega_max > 0 &&
        cfg.farfield_omega_max < cfg.farfield_omega_min)
        throw config_error(origin + ": farfield frequency window is inverted");
    if (cfg.output_dir.empty()) throw config_error(origin + ": output.dir must not be empty");
    if (cfg.imaging_truncation > cfg.decompose_rank)
        throw config_error(origin + ": imaging.truncation exceeds decompose.rank");
}

std::vector<std::string> echo_lines(const RunConfig& cfg) {
    std::vector<std::string> lines;
    for (const auto& k : key_table())
        if (k.get) lines.push_back(k.name + " = " + k.get(cfg));
    std::sort(lines.begin(), lines.end());
    return lines;
}

// key prefixes (or exact keys) each stage's outputs depend on
std::vector<std::string> stage_prefixes(const std::string& stage) {
    const std::vector<std::string> dec = {"grid.", "pump.", "decompose.", "tol."};
    auto plus = [](std::vector<std::string> a, std::initializer_list<const char*> b) {
        for (const char* s : b) a.push_back(s);
        return a;
    };
    // basis.* only steers the reference gallery, which no later stage reads
    if (stage == "decompose") return plus(dec, {"basis."});
    if (stage == "couple") return plus(dec, {"matter.", "run.seed"});
    if (stage == "image") return plus(dec, {"matter.", "run.seed", "imaging."});
    if (stage == "farfield")
        return plus(dec, {"matter.", "run.seed", "imaging.", "gates.", "farfield."});
    if (stage == "specresolve")
        return {"grid.", "matter.", "run.seed", "specresolve.", "tol."};
    throw config_error("unknown pipeline stage '" + stage + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        const std::string where = origin + ":" + std::to_string(lineno);
        if (eq == std::string::npos)
            throw config_error(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = unquote(trim(line.substr(eq + 1)));
        if (key.empty()) throw config_error(where + ": empty key");
        const KeyDef* def = find_key(key);
        if (!def)
            throw config_error(where + ": unknown key '" + key + "', nearest is '" +
                               nearest_key(key) + "'");
        if (value.empty() && trim(line.substr(eq + 1)) != "\"\"")
            throw config_error(where + ": key '" + key + "' has no value");
        if (!seen.insert(key).second)
            throw config_error(where + ": duplicate key '" + key + "'");
        def->set(cfg, value);
    }
    cross_validate(cfg, seen, origin);
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    RunConfig cfg = parse_config_text(read_text(path), path);
    namespace fs = std::filesystem;
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](std::string& p) {
        if (p.empty()) return;
        fs::path fp(p);
        if (fp.is_relative()) fp = base / fp;
        p = fp.string();
        if (!fs::exists(fp))
            throw config_error(path + ": referenced file '" + p + "' does not exist");
    };
    resolve(cfg.matter_magnitude);
    resolve(cfg.matter_phase);
    return cfg;
}

std::string canonical_echo(const RunConfig& cfg) {
    std::string out;
    for (const auto& l : echo_lines(cfg)) {
        out += l;
        out += '\n';
    }
    return out;
}

std::string stage_echo(const RunConfig& cfg, const std::string& stage) {
    const auto prefixes = stage_prefixes(stage);
    std::string out = "stage " + stage + "\n";
    for (const auto& l : echo_lines(cfg)) {
        const std::string key = l.substr(0, l.find(" = "));
        for (const auto& p : prefixes) {
            const bool hit = p.back() == '.' ? key.compare(0, p.size(), p) == 0 : key == p;
            if (hit) {
                out += l;
                out += '\n';
                break;
            }
        }
    }
    return out;
}

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const auto& k : key_table()) out.push_back(k.name);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace qdi
