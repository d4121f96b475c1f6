#include "corseg/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "corseg/errors.hpp"

namespace corseg {

void MeshOptions::validate() const {
    if (smooth_lambda < 0.0 || smooth_lambda > 1.0)
        throw input_error("mesh smoothing lambda must be in [0, 1]");
    if (smooth_passes < 0) throw input_error("mesh smoothing passes must be >= 0");
}

void AppConfig::validate() const {
    if (schema != 1)
        throw input_error("unsupported config schema " + std::to_string(schema) +
                          " (this build reads schema 1)");
    pipeline.validate();
    if (!(sections.step_mm > 0) || !(sections.halfwidth_mm > 0) || sections.directions < 1 ||
        !(sections.distal_fraction > 0) || sections.distal_fraction > 1)
        throw input_error("invalid [sections] values");
    mesh.validate();
}

AppConfig default_config() { return AppConfig{}; }

// ----------------------------------------------------------- TOML subset --

namespace {

struct TomlValue {
    enum class Kind { integer, real, boolean, text, numbers } kind;
    std::int64_t i = 0;
    double f = 0.0;
    bool b = false;
    std::string s;
    std::vector<double> arr;
    int line = 0;
};

struct TomlDoc {
    std::map<std::string, TomlValue> values;
    std::string source;

    [[noreturn]] void fail(int line, const std::string& msg) const {
        throw input_error(source + ":" + std::to_string(line) + ": " + msg);
    }
};

bool valid_key_segment(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
    return true;
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
        } else if (c == '"') {
            in_string = true;
        } else if (c == '#') {
            return line.substr(0, i);
        }
    }
    return line;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// from_chars does not accept a leading '+', so strip one first.
bool parse_integer(const std::string& s, std::int64_t& out) {
    if (s.empty()) return false;
    std::size_t start = s[0] == '+' ? 1 : 0;
    std::size_t digits = (start < s.size() && s[start] == '-') ? start + 1 : start;
    if (digits == s.size()) return false;
    for (std::size_t i = digits; i < s.size(); ++i)
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    auto [p, ec] = std::from_chars(s.data() + start, s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    std::size_t start = s[0] == '+' ? 1 : 0;
    if (start == s.size()) return false;
    auto [p, ec] = std::from_chars(s.data() + start, s.data() + s.size(), out);
    return ec == std::errc() && p == s.data() + s.size();
}

std::string parse_string_literal(const TomlDoc& doc, int line, const std::string& s) {
    if (s.size() < 2 || s.front() != '"' || s.back() != '"')
        doc.fail(line, "malformed string " + s);
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        char c = s[i];
        if (c == '"') doc.fail(line, "unexpected '\"' inside string " + s);
        if (c != '\\') {
            out += c;
            continue;
        }
        if (i + 2 >= s.size()) doc.fail(line, "dangling escape in string " + s);
        char e = s[++i];
        switch (e) {
            case '\\': out += '\\'; break;
            case '"': out += '"'; break;
            case 'n': out += '\n'; break;
            case 't': out += '\t'; break;
            default: doc.fail(line, std::string("unsupported escape '\\") + e + "'");
        }
    }
    return out;
}

TomlValue parse_value(const TomlDoc& doc, int line, const std::string& raw) {
    TomlValue v;
    v.line = line;
    std::string s = trim(raw);
    if (s.empty()) doc.fail(line, "missing value");

    if (s.front() == '"') {
        v.kind = TomlValue::Kind::text;
        v.s = parse_string_literal(doc, line, s);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = TomlValue::Kind::boolean;
        v.b = s == "true";
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']') doc.fail(line, "array must open and close on one line");
        v.kind = TomlValue::Kind::numbers;
        std::string body = trim(s.substr(1, s.size() - 2));
        if (body.empty()) return v;
        std::stringstream ss(body);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            double d;
            std::int64_t i;
            if (parse_integer(part, i))
                v.arr.push_back(static_cast<double>(i));
            else if (parse_real(part, d))
                v.arr.push_back(d);
            else
                doc.fail(line, "array element '" + part + "' is not a number");
        }
        return v;
    }
    if (parse_integer(s, v.i)) {
        v.kind = TomlValue::Kind::integer;
        return v;
    }
    if (parse_real(s, v.f)) {
        v.kind = TomlValue::Kind::real;
        return v;
    }
    doc.fail(line, "cannot parse value '" + s + "'");
}

TomlDoc parse_toml(const std::string& text, const std::string& source) {
    TomlDoc doc;
    doc.source = source;
    std::istringstream is(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = trim(strip_comment(line));
        if (s.empty()) continue;

        if (s.front() == '[') {
            if (s.back() != ']') doc.fail(lineno, "malformed section header '" + s + "'");
            std::string name = trim(s.substr(1, s.size() - 2));
            std::stringstream ss(name);
            std::string seg;
            while (std::getline(ss, seg, '.'))
                if (!valid_key_segment(trim(seg)))
                    doc.fail(lineno, "invalid section name '" + name + "'");
            section = name;
            continue;
        }

        std::size_t eq = s.find('=');
        if (eq == std::string::npos) doc.fail(lineno, "expected 'key = value', got '" + s + "'");
        std::string key = trim(s.substr(0, eq));
        if (!valid_key_segment(key)) doc.fail(lineno, "invalid key '" + key + "'");
        std::string full = section.empty() ? key : section + "." + key;
        if (doc.values.count(full)) doc.fail(lineno, "duplicate key '" + full + "'");
        doc.values.emplace(full, parse_value(doc, lineno, s.substr(eq + 1)));
    }
    return doc;
}

// Typed consumption with an unknown-key sweep at the end.
struct Reader {
    const TomlDoc& doc;
    std::set<std::string> used;

    const TomlValue* find(const std::string& key) {
        auto it = doc.values.find(key);
        if (it == doc.values.end()) return nullptr;
        used.insert(key);
        return &it->second;
    }

    void get(const std::string& key, double& out) {
        const TomlValue* v = find(key);
        if (!v) return;
        if (v->kind == TomlValue::Kind::real)
            out = v->f;
        else if (v->kind == TomlValue::Kind::integer)
            out = static_cast<double>(v->i);
        else
            doc.fail(v->line, "'" + key + "' must be a number");
    }

    void get(const std::string& key, int& out) {
        const TomlValue* v = find(key);
        if (!v) return;
        if (v->kind != TomlValue::Kind::integer)
            doc.fail(v->line, "'" + key + "' must be an integer");
        out = static_cast<int>(v->i);
    }

    void get(const std::string& key, bool& out) {
        const TomlValue* v = find(key);
        if (!v) return;
        if (v->kind != TomlValue::Kind::boolean)
            doc.fail(v->line, "'" + key + "' must be true or false");
        out = v->b;
    }

    void get(const std::string& key, std::vector<double>& out) {
        const TomlValue* v = find(key);
        if (!v) return;
        if (v->kind != TomlValue::Kind::numbers)
            doc.fail(v->line, "'" + key + "' must be a number array");
        out = v->arr;
    }

    void get_point(const std::string& key, WorldPoint& out) {
        const TomlValue* v = find(key);
        if (!v) return;
        if (v->kind != TomlValue::Kind::numbers || v->arr.size() != 3)
            doc.fail(v->line, "'" + key + "' must be a 3-element number array");
        out = {v->arr[0], v->arr[1], v->arr[2]};
    }

    void reject_unused() const {
        for (const auto& [key, value] : doc.values)
            if (!used.count(key))
                doc.fail(value.line, "unknown configuration key '" + key + "'");
    }
};

void read_stage(Reader& r, const std::string& prefix, StageParams& s) {
    r.get(prefix + ".a", s.curvature_factor);
    r.get(prefix + ".iterations", s.iterations);
    r.get(prefix + ".data_weight", s.data_weight);
    r.get(prefix + ".shape_weight", s.shape_weight);
    r.get(prefix + ".label_weight", s.label_weight);
}

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, p);
}

void write_stage(std::ostream& os, const char* name, const StageParams& s) {
    os << "[levelset." << name << "]\n";
    os << "a = " << fmt(s.curvature_factor) << "\n";
    os << "iterations = " << s.iterations << "\n";
    os << "data_weight = " << fmt(s.data_weight) << "\n";
    os << "shape_weight = " << fmt(s.shape_weight) << "\n";
    os << "label_weight = " << fmt(s.label_weight) << "\n\n";
}

} // namespace

AppConfig config_from_toml(const std::string& text, const std::string& source_name) {
    TomlDoc doc = parse_toml(text, source_name);
    Reader r{doc, {}};
    AppConfig cfg;

    {
        const TomlValue* v = r.find("schema");
        if (!v) throw input_error(source_name + ": missing 'schema' (expected schema = 1)");
        if (v->kind != TomlValue::Kind::integer) doc.fail(v->line, "'schema' must be an integer");
        cfg.schema = static_cast<int>(v->i);
    }

    ThresholdConfig& t = cfg.pipeline.thresholds;
    r.get("thresholds.l_thres", t.l_thres);
    r.get("thresholds.cp_thres", t.cp_thres);
    r.get("thresholds.ncp_thres", t.ncp_thres);
    r.get("thresholds.epsilon", t.epsilon);
    r.get("thresholds.wi", t.wi);
    r.get("thresholds.lumen_gate_center", t.lumen_gate_center);
    r.get("thresholds.outer_gate_center", t.outer_gate_center);
    r.get("thresholds.gate_cutoff", t.gate_cutoff);
    r.get("thresholds.gate_slope", t.gate_slope);
    r.get("thresholds.candidate_hu_floor", t.candidate_hu_floor);
    r.get("thresholds.candidate_distance", t.candidate_distance);
    r.get("thresholds.bell_exponent", t.bell_exponent);
    r.get("thresholds.lumen_center_offset", t.lumen_center_offset);
    r.get("thresholds.lumen_halfwidth_min", t.lumen_halfwidth_min);
    r.get("thresholds.lumen_halfwidth_max", t.lumen_halfwidth_max);
    r.get("thresholds.outer_center_min", t.outer_center_min);
    r.get("thresholds.outer_center_max", t.outer_center_max);
    r.get("thresholds.outer_slope", t.outer_slope);
    r.get("thresholds.plaque_slope", t.plaque_slope);

    FrangiParams& fr = cfg.pipeline.frangi;
    r.get("vesselness.scales_mm", fr.scales_mm);
    r.get("vesselness.alpha", fr.alpha);
    r.get("vesselness.beta", fr.beta);
    r.get("vesselness.gamma", fr.gamma);
    r.get("vesselness.bright_tubes", fr.bright_tubes);

    r.get("centerline.speed_floor", cfg.pipeline.speed_floor);
    r.get("centerline.backtrace_step_voxels", cfg.pipeline.backtrace_step_voxels);
    r.get("centerline.smooth_window", cfg.pipeline.smooth_window);
    r.get("centerline.recenter_iterations", cfg.pipeline.recenter_iterations);
    r.get("centerline.recenter_radius_mm", cfg.pipeline.recenter_radius_mm);

    r.get("levelset.time_step", cfg.pipeline.time_step);
    r.get("levelset.prior_tube_radius_mm", cfg.pipeline.prior_tube_radius_mm);
    r.get("levelset.label_magnitude", cfg.pipeline.label_magnitude);
    r.get("levelset.outer_roi_dilation", cfg.pipeline.outer_roi_dilation);
    r.get("levelset.pass2_band_dilation", cfg.pipeline.pass2_band_dilation);
    read_stage(r, "levelset.lumen_pass1", cfg.pipeline.lumen_pass1);
    read_stage(r, "levelset.lumen_pass2", cfg.pipeline.lumen_pass2);
    read_stage(r, "levelset.outer_pass1", cfg.pipeline.outer_pass1);
    read_stage(r, "levelset.outer_pass2", cfg.pipeline.outer_pass2);
    read_stage(r, "levelset.plaque", cfg.pipeline.plaque);

    r.get_point("seeds.start", cfg.pipeline.seeds.start);
    r.get_point("seeds.end", cfg.pipeline.seeds.end);

    r.get("sections.step_mm", cfg.sections.step_mm);
    r.get("sections.distal_fraction", cfg.sections.distal_fraction);
    r.get("sections.directions", cfg.sections.directions);
    r.get("sections.halfwidth_mm", cfg.sections.halfwidth_mm);

    r.get("mesh.smooth_lambda", cfg.mesh.smooth_lambda);
    r.get("mesh.smooth_passes", cfg.mesh.smooth_passes);

    r.reject_unused();
    cfg.validate();
    return cfg;
}

std::string config_to_toml(const AppConfig& cfg) {
    std::ostringstream os;
    os << "schema = " << cfg.schema << "\n\n";

    const ThresholdConfig& t = cfg.pipeline.thresholds;
    os << "[thresholds]\n";
    os << "l_thres = " << fmt(t.l_thres) << "\n";
    os << "cp_thres = " << fmt(t.cp_thres) << "\n";
    os << "ncp_thres = " << fmt(t.ncp_thres) << "\n";
    os << "epsilon = " << fmt(t.epsilon) << "\n";
    os << "wi = " << fmt(t.wi) << "\n";
    os << "lumen_gate_center = " << fmt(t.lumen_gate_center) << "\n";
    os << "outer_gate_center = " << fmt(t.outer_gate_center) << "\n";
    os << "gate_cutoff = " << fmt(t.gate_cutoff) << "\n";
    os << "gate_slope = " << fmt(t.gate_slope) << "\n";
    os << "candidate_hu_floor = " << fmt(t.candidate_hu_floor) << "\n";
    os << "candidate_distance = " << fmt(t.candidate_distance) << "\n";
    os << "bell_exponent = " << fmt(t.bell_exponent) << "\n";
    os << "lumen_center_offset = " << fmt(t.lumen_center_offset) << "\n";
    os << "lumen_halfwidth_min = " << fmt(t.lumen_halfwidth_min) << "\n";
    os << "lumen_halfwidth_max = " << fmt(t.lumen_halfwidth_max) << "\n";
    os << "outer_center_min = " << fmt(t.outer_center_min) << "\n";
    os << "outer_center_max = " << fmt(t.outer_center_max) << "\n";
    os << "outer_slope = " << fmt(t.outer_slope) << "\n";
    os << "plaque_slope = " << fmt(t.plaque_slope) << "\n\n";

    const FrangiParams& fr = cfg.pipeline.frangi;
    os << "[vesselness]\n";
    os << "scales_mm = [";
    for (std::size_t i = 0; i < fr.scales_mm.size(); ++i)
        os << (i ? ", " : "") << fmt(fr.scales_mm[i]);
    os << "]\n";
    os << "alpha = " << fmt(fr.alpha) << "\n";
    os << "beta = " << fmt(fr.beta) << "\n";
    os << "gamma = " << fmt(fr.gamma) << "\n";
    os << "bright_tubes = " << (fr.bright_tubes ? "true" : "false") << "\n\n";

    os << "[centerline]\n";
    os << "speed_floor = " << fmt(cfg.pipeline.speed_floor) << "\n";
    os << "backtrace_step_voxels = " << fmt(cfg.pipeline.backtrace_step_voxels) << "\n";
    os << "smooth_window = " << cfg.pipeline.smooth_window << "\n";
    os << "recenter_iterations = " << cfg.pipeline.recenter_iterations << "\n";
    os << "recenter_radius_mm = " << fmt(cfg.pipeline.recenter_radius_mm) << "\n\n";

    os << "[levelset]\n";
    os << "time_step = " << fmt(cfg.pipeline.time_step) << "\n";
    os << "prior_tube_radius_mm = " << fmt(cfg.pipeline.prior_tube_radius_mm) << "\n";
    os << "label_magnitude = " << fmt(cfg.pipeline.label_magnitude) << "\n";
    os << "outer_roi_dilation = " << cfg.pipeline.outer_roi_dilation << "\n";
    os << "pass2_band_dilation = " << cfg.pipeline.pass2_band_dilation << "\n\n";

    write_stage(os, "lumen_pass1", cfg.pipeline.lumen_pass1);
    write_stage(os, "lumen_pass2", cfg.pipeline.lumen_pass2);
    write_stage(os, "outer_pass1", cfg.pipeline.outer_pass1);
    write_stage(os, "outer_pass2", cfg.pipeline.outer_pass2);
    write_stage(os, "plaque", cfg.pipeline.plaque);

    const SeedPair& sp = cfg.pipeline.seeds;
    os << "[seeds]\n";
    os << "start = [" << fmt(sp.start.x) << ", " << fmt(sp.start.y) << ", " << fmt(sp.start.z)
       << "]\n";
    os << "end = [" << fmt(sp.end.x) << ", " << fmt(sp.end.y) << ", " << fmt(sp.end.z) << "]\n\n";

    os << "[sections]\n";
    os << "step_mm = " << fmt(cfg.sections.step_mm) << "\n";
    os << "distal_fraction = " << fmt(cfg.sections.distal_fraction) << "\n";
    os << "directions = " << cfg.sections.directions << "\n";
    os << "halfwidth_mm = " << fmt(cfg.sections.halfwidth_mm) << "\n\n";

    os << "[mesh]\n";
    os << "smooth_lambda = " << fmt(cfg.mesh.smooth_lambda) << "\n";
    os << "smooth_passes = " << cfg.mesh.smooth_passes << "\n";
    return os.str();
}

AppConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw input_error("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return config_from_toml(buf.str(), path);
}

void save_config(const AppConfig& cfg, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw input_error("cannot open '" + path + "' for writing");
    os << config_to_toml(cfg);
    if (!os) throw input_error("failed while writing '" + path + "'");
}

} // namespace corseg
