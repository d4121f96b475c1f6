// corseg: semi-automatic coronary vessel segmentation from CTA volumes.
//
// Subcommands cover the full pipeline (segment) and its stages in isolation
// (vesselness, centerline, memberships, mesh), plus measurement (metrics,
// compare) and synthetic data (phantom). Every run writes a manifest JSON
// next to its outputs recording inputs (with SHA-256), outputs, the
// effective configuration, and the outcome, including failures.
//
// Exit codes: 0 success, 1 input/usage errors, 2 numeric failures.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "corseg/config.hpp"
#include "corseg/errors.hpp"
#include "corseg/fast_marching.hpp"
#include "corseg/mesh.hpp"
#include "corseg/metrics.hpp"
#include "corseg/parallel.hpp"
#include "corseg/phantom.hpp"
#include "corseg/pipeline.hpp"
#include "corseg/sha256.hpp"
#include "corseg/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kTool = "corseg";
constexpr const char* kVersion = "1.0.0";

// ------------------------------------------------------------ manifest ----

class RunRecorder {
public:
    RunRecorder(std::string command, std::vector<std::string> argv)
        : command_(std::move(command)), argv_(std::move(argv)) {}

    // Directory outputs get <dir>/manifest.json, file outputs a sibling
    // <stem>.manifest.json.
    void anchor_directory(const std::string& dir) {
        fs::create_directories(dir);
        manifest_path_ = (fs::path(dir) / "manifest.json").string();
    }
    void anchor_file(const std::string& file) {
        fs::path p(file);
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        fs::path m = p.parent_path() / (p.stem().string() + ".manifest.json");
        manifest_path_ = m.string();
    }

    void add_input(const std::string& path) {
        std::string digest;
        try {
            digest = corseg::sha256_file_hex(path);
        } catch (const corseg::error&) {
            digest = "unreadable";
        }
        inputs_.push_back({{"path", path}, {"sha256", digest}});
    }
    void add_output(const std::string& path) { outputs_.push_back(path); }
    void set_config(const corseg::AppConfig& cfg) { config_toml_ = corseg::config_to_toml(cfg); }
    void add_timing(const std::string& name, double ms) {
        timings_.push_back({{"name", name}, {"milliseconds", ms}});
    }
    void set_extra(const std::string& key, ordered_json value) {
        extra_[key] = std::move(value);
    }

    void finish_ok() { write("ok", "", ""); }
    void finish_error(const std::string& type, const std::string& message) {
        write("error", type, message);
    }

private:
    void write(const std::string& status, const std::string& type, const std::string& message) {
        if (manifest_path_.empty()) return;  // failed before any output location was known
        ordered_json m;
        m["schema"] = 1;
        m["tool"] = kTool;
        m["version"] = kVersion;
        m["command"] = command_;
        m["argv"] = argv_;
        m["status"] = status;
        if (status != "ok") m["error"] = {{"type", type}, {"message", message}};
        m["threads"] = corseg::thread_count();
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        if (!config_toml_.empty()) m["config_toml"] = config_toml_;
        if (!timings_.empty()) m["timings"] = timings_;
        for (auto& [k, v] : extra_.items()) m[k] = v;
        try {
            std::ofstream os(manifest_path_);
            os << m.dump(2) << "\n";
        } catch (...) {
            // manifest writing must never mask the real outcome
        }
    }

    std::string command_;
    std::vector<std::string> argv_;
    std::string manifest_path_;
    ordered_json inputs_ = ordered_json::array();
    std::vector<std::string> outputs_;
    std::string config_toml_;
    ordered_json timings_ = ordered_json::array();
    ordered_json extra_ = ordered_json::object();
};

// -------------------------------------------------------------- helpers ---

corseg::WorldPoint parse_triple(const std::string& text, const char* what) {
    corseg::WorldPoint p;
    double v[3];
    std::stringstream ss(text);
    std::string part;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, part, ','))
            throw corseg::input_error(std::string(what) + " must be three comma-separated numbers");
        try {
            v[i] = std::stod(part);
        } catch (const std::exception&) {
            throw corseg::input_error(std::string(what) + ": '" + part + "' is not a number");
        }
    }
    if (std::getline(ss, part, ','))
        throw corseg::input_error(std::string(what) + " must be three comma-separated numbers");
    p = {v[0], v[1], v[2]};
    return p;
}

struct SeedArgs {
    std::string start_mm, end_mm;       // "x,y,z" world millimetres
    std::string start_voxel, end_voxel; // "i,j,k" indices

    void add_options(CLI::App* cmd) {
        cmd->add_option("--start", start_mm, "start seed as x,y,z in mm");
        cmd->add_option("--end", end_mm, "end seed as x,y,z in mm");
        cmd->add_option("--start-voxel", start_voxel, "start seed as i,j,k voxel indices");
        cmd->add_option("--end-voxel", end_voxel, "end seed as i,j,k voxel indices");
    }

    corseg::SeedPair resolve(const corseg::VoxelGrid& volume) const {
        auto one = [&](const std::string& mm, const std::string& voxel,
                       const char* which) -> corseg::WorldPoint {
            if (!mm.empty() && !voxel.empty())
                throw corseg::input_error(std::string("give --") + which + " or --" + which +
                                          "-voxel, not both");
            if (mm.empty() && voxel.empty())
                throw corseg::input_error(std::string("missing --") + which + " (or --" + which +
                                          "-voxel)");
            if (!mm.empty()) return parse_triple(mm, which);
            corseg::WorldPoint idx = parse_triple(voxel, which);
            int i = static_cast<int>(std::llround(idx.x));
            int j = static_cast<int>(std::llround(idx.y));
            int k = static_cast<int>(std::llround(idx.z));
            if (!volume.dims().contains(i, j, k))
                throw corseg::bounds_error(std::string(which) + " voxel (" + std::to_string(i) +
                                           ", " + std::to_string(j) + ", " + std::to_string(k) +
                                           ") is outside the volume");
            return volume.voxel_to_world(i, j, k);
        };
        return {one(start_mm, start_voxel, "start"), one(end_mm, end_voxel, "end")};
    }
};

corseg::AppConfig load_or_default(const std::string& config_path, RunRecorder& rec) {
    if (config_path.empty()) return corseg::default_config();
    rec.add_input(config_path);
    return corseg::load_config(config_path);
}

void write_centerline_csv(const corseg::Centerline& line, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw corseg::input_error("cannot open '" + path + "' for writing");
    os << "x_mm,y_mm,z_mm\n";
    char buf[128];
    for (const corseg::WorldPoint& p : line.points) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%.9g\n", p.x, p.y, p.z);
        os << buf;
    }
    if (!os) throw corseg::input_error("failed while writing '" + path + "'");
}

corseg::Centerline read_centerline_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw corseg::input_error("cannot open centerline '" + path + "'");
    corseg::Centerline line;
    std::string row;
    int lineno = 0;
    while (std::getline(is, row)) {
        ++lineno;
        std::string s = row;
        if (!s.empty() && s.back() == '\r') s.pop_back();
        if (s.empty()) continue;
        if (lineno == 1 && s.find_first_not_of("xyz_m,") == std::string::npos) continue;
        try {
            line.points.push_back(parse_triple(s, "centerline row"));
        } catch (const corseg::input_error&) {
            throw corseg::input_error("'" + path + "' line " + std::to_string(lineno) +
                                      ": expected x,y,z");
        }
    }
    if (line.points.size() < 2)
        throw corseg::input_error("'" + path + "' holds fewer than 2 centerline points");
    line.rebuild_arclength();
    return line;
}

double ms_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
}

corseg::TriangleMesh surface_for(const corseg::VoxelGrid& phi, const char* label,
                                 const corseg::MeshOptions& opts) {
    corseg::TriangleMesh mesh = corseg::marching_cubes(phi, 0.0);
    mesh.label = label;
    if (opts.smooth_passes > 0)
        mesh = corseg::laplacian_smooth(mesh, opts.smooth_lambda, opts.smooth_passes);
    return mesh;
}

// ---------------------------------------------------------- subcommands ---

struct SegmentArgs {
    std::string input, output, config;
    SeedArgs seeds;
};

void run_segment(const SegmentArgs& a, RunRecorder& rec) {
    rec.anchor_directory(a.output);
    rec.add_input(a.input);
    corseg::AppConfig cfg = load_or_default(a.config, rec);
    rec.set_config(cfg);

    corseg::VoxelGrid volume = corseg::read_volume(a.input);
    corseg::SeedPair seeds = a.seeds.resolve(volume);
    corseg::SegmentationResult res = corseg::run_pipeline(volume, seeds, cfg.pipeline);
    for (const corseg::StageTiming& t : res.timings) rec.add_timing(t.name, t.milliseconds);

    fs::path out(a.output);
    auto emit_mask = [&](const corseg::BinaryMask& m, const char* name) {
        std::string p = (out / (std::string(name) + ".nrrd")).string();
        corseg::write_mask(m, p);
        rec.add_output(p);
    };
    auto emit_phi = [&](const corseg::VoxelGrid& g, const char* name) {
        std::string p = (out / (std::string(name) + ".nrrd")).string();
        corseg::write_volume(g, p);
        rec.add_output(p);
    };
    emit_mask(res.lumen_mask, "lumen");
    emit_mask(res.outer_mask, "outer");
    emit_mask(res.plaque_mask, "plaque");
    emit_phi(res.phi_lumen, "phi_lumen");
    emit_phi(res.phi_outer, "phi_outer");
    emit_phi(res.phi_plaque, "phi_plaque");

    std::string cl = (out / "centerline.csv").string();
    write_centerline_csv(res.centerline, cl);
    rec.add_output(cl);

    auto t0 = std::chrono::steady_clock::now();
    auto emit_mesh = [&](const corseg::VoxelGrid& phi, const char* name) {
        std::string p = (out / (std::string(name) + ".stl")).string();
        corseg::write_stl_binary(surface_for(phi, name, cfg.mesh), p);
        rec.add_output(p);
    };
    emit_mesh(res.phi_lumen, "lumen");
    emit_mesh(res.phi_outer, "outer");
    if (!res.plaque_mask.empty()) emit_mesh(res.phi_plaque, "plaque");
    rec.add_timing("meshes", ms_since(t0));

    t0 = std::chrono::steady_clock::now();
    corseg::VesselReport report;
    report.sections =
        corseg::slice_sections(res.lumen_mask, res.outer_mask, res.centerline, cfg.sections);
    report.metrics = corseg::summarize_sections(report.sections, cfg.sections);
    report.mean_lumen_hu = res.mean_lumen_hu;
    report.median_lumen_hu = res.median_lumen_hu;
    rec.add_timing("report", ms_since(t0));

    std::string rp = (out / "report.json").string();
    corseg::write_report_json(report, rp);
    rec.add_output(rp);
    std::string sc = (out / "sections.csv").string();
    corseg::write_sections_csv(report.sections, sc);
    rec.add_output(sc);

    std::printf("segmented %s: lumen %lld voxels, outer %lld, plaque %lld, %zu sections\n",
                a.input.c_str(), static_cast<long long>(res.lumen_mask.count()),
                static_cast<long long>(res.outer_mask.count()),
                static_cast<long long>(res.plaque_mask.count()), report.sections.size());
}

struct CenterlineArgs {
    std::string input, output, config;
    SeedArgs seeds;
};

void run_centerline(const CenterlineArgs& a, RunRecorder& rec) {
    rec.anchor_file(a.output);
    rec.add_input(a.input);
    corseg::AppConfig cfg = load_or_default(a.config, rec);
    rec.set_config(cfg);

    corseg::VoxelGrid volume = corseg::read_volume(a.input);
    corseg::SeedPair seeds = a.seeds.resolve(volume);

    auto t0 = std::chrono::steady_clock::now();
    corseg::VoxelGrid vessel = corseg::frangi_vesselness(volume, cfg.pipeline.frangi);
    rec.add_timing("vesselness", ms_since(t0));

    corseg::CenterlineOptions opts;
    opts.speed_floor = cfg.pipeline.speed_floor;
    opts.backtrace_step_voxels = cfg.pipeline.backtrace_step_voxels;
    opts.smooth_window = cfg.pipeline.smooth_window;
    t0 = std::chrono::steady_clock::now();
    corseg::Centerline line =
        corseg::extract_centerline(volume, vessel, seeds, cfg.pipeline.thresholds, opts);
    rec.add_timing("centerline", ms_since(t0));

    write_centerline_csv(line, a.output);
    rec.add_output(a.output);
    std::printf("centerline: %zu points, %.2f mm\n", line.points.size(), line.total_length());
}

struct MembershipArgs {
    std::string input, output, config;
    SeedArgs seeds;
};

void run_memberships(const MembershipArgs& a, RunRecorder& rec) {
    rec.anchor_directory(a.output);
    rec.add_input(a.input);
    corseg::AppConfig cfg = load_or_default(a.config, rec);
    rec.set_config(cfg);

    corseg::VoxelGrid volume = corseg::read_volume(a.input);
    corseg::SeedPair seeds = a.seeds.resolve(volume);

    corseg::VoxelGrid vessel = corseg::frangi_vesselness(volume, cfg.pipeline.frangi);
    corseg::CenterlineOptions opts;
    opts.speed_floor = cfg.pipeline.speed_floor;
    opts.backtrace_step_voxels = cfg.pipeline.backtrace_step_voxels;
    opts.smooth_window = cfg.pipeline.smooth_window;
    corseg::Centerline line =
        corseg::extract_centerline(volume, vessel, seeds, cfg.pipeline.thresholds, opts);

    corseg::VoxelGrid d1 = corseg::distance_to_polyline(volume, line);
    double mean_hu = corseg::mean_lumen_intensity(volume, d1, cfg.pipeline.thresholds);
    double median_hu = corseg::compute_ml(volume, vessel, cfg.pipeline.thresholds);
    corseg::TissueFields fields =
        corseg::compute_tissue_fields(volume, d1, mean_hu, cfg.pipeline.thresholds);

    fs::path out(a.output);
    auto emit = [&](const corseg::VoxelGrid& g, const char* name) {
        std::string p = (out / (std::string(name) + ".nrrd")).string();
        corseg::write_volume(g, p);
        rec.add_output(p);
    };
    emit(fields.f1, "f1");
    emit(fields.f2_outer, "f2_outer");
    emit(fields.f2_plaque, "f2_plaque");

    corseg::MembershipParams mp =
        corseg::make_membership_params(mean_hu, cfg.pipeline.thresholds);
    ordered_json stats;
    stats["schema"] = 1;
    stats["mean_lumen_hu"] = mean_hu;
    stats["median_lumen_hu"] = median_hu;
    stats["lumen_center_hu"] = mp.lumen_center;
    stats["lumen_half_width_hu"] = mp.lumen_half_width;
    stats["outer_center_hu"] = mp.outer_center;
    stats["plaque_center_hu"] = mp.plaque_center;
    std::string sp = (out / "stats.json").string();
    std::ofstream os(sp);
    if (!os) throw corseg::input_error("cannot open '" + sp + "' for writing");
    os << stats.dump(2) << "\n";
    rec.add_output(sp);

    std::printf("memberships: mean lumen %.1f HU, median %.1f HU\n", mean_hu, median_hu);
}

struct VesselnessArgs {
    std::string input, output, config;
};

void run_vesselness(const VesselnessArgs& a, RunRecorder& rec) {
    rec.anchor_file(a.output);
    rec.add_input(a.input);
    corseg::AppConfig cfg = load_or_default(a.config, rec);
    rec.set_config(cfg);

    corseg::VoxelGrid volume = corseg::read_volume(a.input);
    auto t0 = std::chrono::steady_clock::now();
    corseg::VoxelGrid vessel = corseg::frangi_vesselness(volume, cfg.pipeline.frangi);
    rec.add_timing("vesselness", ms_since(t0));
    corseg::write_volume(vessel, a.output);
    rec.add_output(a.output);
    std::printf("vesselness map written to %s\n", a.output.c_str());
}

struct MeshArgs {
    std::string input, output, label = "surface";
    double iso = 0.0;
    bool iso_set = false;
    int smooth_passes = -1;  // -1 = from config
    std::string config;
};

void run_mesh(const MeshArgs& a, RunRecorder& rec) {
    rec.anchor_file(a.output);
    rec.add_input(a.input);
    corseg::AppConfig cfg = load_or_default(a.config, rec);
    rec.set_config(cfg);

    corseg::VoxelGrid field = corseg::read_volume(a.input);
    double iso = a.iso;
    if (!a.iso_set) {
        bool binary = true;
        for (double v : field.values())
            if (v != 0.0 && v != 1.0) {
                binary = false;
                break;
            }
        if (binary) iso = 0.5;  // 0/1 masks: surface at half coverage
    }

    corseg::TriangleMesh mesh = corseg::marching_cubes(field, iso);
    mesh.label = a.label;
    int passes = a.smooth_passes >= 0 ? a.smooth_passes : cfg.mesh.smooth_passes;
    if (passes > 0) mesh = corseg::laplacian_smooth(mesh, cfg.mesh.smooth_lambda, passes);
    corseg::write_mesh(mesh, a.output);
    rec.add_output(a.output);

    rec.set_extra("mesh", ordered_json{{"vertices", mesh.vertices.size()},
                                       {"triangles", mesh.triangles.size()},
                                       {"surface_area_mm2", corseg::surface_area(mesh)},
                                       {"signed_volume_mm3", corseg::signed_volume(mesh)},
                                       {"watertight", corseg::is_watertight(mesh)}});
    std::printf("mesh: %zu vertices, %zu triangles -> %s\n", mesh.vertices.size(),
                mesh.triangles.size(), a.output.c_str());
}

struct MetricsArgs {
    std::string lumen, outer, centerline, output, csv, config;
};

void run_metrics(const MetricsArgs& a, RunRecorder& rec) {
    rec.anchor_file(a.output);
    rec.add_input(a.lumen);
    rec.add_input(a.outer);
    rec.add_input(a.centerline);
    corseg::AppConfig cfg = load_or_default(a.config, rec);
    rec.set_config(cfg);

    corseg::BinaryMask lumen = corseg::read_mask(a.lumen);
    corseg::BinaryMask outer = corseg::read_mask(a.outer);
    corseg::Centerline line = read_centerline_csv(a.centerline);

    corseg::VesselReport report;
    report.sections = corseg::slice_sections(lumen, outer, line, cfg.sections);
    report.metrics = corseg::summarize_sections(report.sections, cfg.sections);
    corseg::write_report_json(report, a.output);
    rec.add_output(a.output);
    if (!a.csv.empty()) {
        corseg::write_sections_csv(report.sections, a.csv);
        rec.add_output(a.csv);
    }
    std::printf("metrics: MLA %.3f mm^2, MLD %.3f mm, DS1 %.3f, DS2 %.3f, PB %.3f +- %.3f\n",
                report.metrics.mla_mm2, report.metrics.mld_mm, report.metrics.ds1,
                report.metrics.ds2, report.metrics.plaque_burden_mean,
                report.metrics.plaque_burden_sd);
}

struct CompareArgs {
    std::string a, b, output;
};

void run_compare(const CompareArgs& args, RunRecorder& rec) {
    rec.anchor_file(args.output);
    rec.add_input(args.a);
    rec.add_input(args.b);

    corseg::BinaryMask ma = corseg::read_mask(args.a);
    corseg::BinaryMask mb = corseg::read_mask(args.b);
    double d = corseg::dice(ma, mb);
    ordered_json j;
    j["schema"] = 1;
    j["a"] = args.a;
    j["b"] = args.b;
    j["dice"] = d;
    if (!ma.empty() && !mb.empty())
        j["hausdorff_mm"] = corseg::hausdorff_mm(ma, mb);
    else
        j["hausdorff_mm"] = nullptr;
    j["voxels_a"] = ma.count();
    j["voxels_b"] = mb.count();

    std::ofstream os(args.output);
    if (!os) throw corseg::input_error("cannot open '" + args.output + "' for writing");
    os << j.dump(2) << "\n";
    rec.add_output(args.output);
    if (j["hausdorff_mm"].is_null())
        std::printf("dice %.6f (hausdorff undefined for an empty mask)\n", d);
    else
        std::printf("dice %.6f, hausdorff %.4f mm\n", d, j["hausdorff_mm"].get<double>());
}

struct PhantomArgs {
    std::string recipe, output;
    bool list = false;
};

void run_phantom(const PhantomArgs& a, RunRecorder& rec) {
    if (a.list) {
        for (const corseg::PhantomSpec& spec : corseg::default_recipes())
            std::printf("%s\n", spec.name.c_str());
        return;
    }
    if (a.recipe.empty()) throw corseg::input_error("missing --recipe (or use --list)");
    if (a.output.empty()) throw corseg::input_error("missing --output directory");
    rec.anchor_directory(a.output);

    corseg::PhantomSpec spec = corseg::recipe_by_name(a.recipe);
    auto t0 = std::chrono::steady_clock::now();
    corseg::PhantomVolume ph = corseg::generate(spec);
    rec.add_timing("generate", ms_since(t0));

    fs::path out(a.output);
    std::string vol = (out / "volume.nrrd").string();
    corseg::write_volume(ph.image, vol);
    rec.add_output(vol);
    auto emit_mask = [&](const corseg::BinaryMask& m, const char* name) {
        std::string p = (out / (std::string(name) + ".nrrd")).string();
        corseg::write_mask(m, p);
        rec.add_output(p);
    };
    emit_mask(ph.truth.lumen, "truth_lumen");
    emit_mask(ph.truth.outer, "truth_outer");
    emit_mask(ph.truth.plaque, "truth_plaque");

    std::string cl = (out / "truth_centerline.csv").string();
    write_centerline_csv(ph.truth.centerline, cl);
    rec.add_output(cl);

    ordered_json truth;
    truth["schema"] = 1;
    truth["recipe"] = spec.name;
    truth["seeds"] = {{"start", {ph.truth.seeds.start.x, ph.truth.seeds.start.y,
                                 ph.truth.seeds.start.z}},
                      {"end", {ph.truth.seeds.end.x, ph.truth.seeds.end.y, ph.truth.seeds.end.z}}};
    truth["ds2"] = ph.truth.ds2;
    truth["mla_mm2"] = ph.truth.mla_mm2;
    truth["mld_mm"] = ph.truth.mld_mm;
    ordered_json secs = ordered_json::array();
    for (const corseg::TrueSection& s : ph.truth.sections)
        secs.push_back({{"s_mm", s.s_mm},
                        {"lumen_radius_mm", s.lumen_radius_mm},
                        {"lumen_area_mm2", s.lumen_area_mm2},
                        {"outer_radius_mm", s.outer_radius_mm},
                        {"outer_area_mm2", s.outer_area_mm2}});
    truth["sections"] = std::move(secs);
    std::string tp = (out / "truth.json").string();
    {
        std::ofstream os(tp);
        if (!os) throw corseg::input_error("cannot open '" + tp + "' for writing");
        os << truth.dump(2) << "\n";
    }
    rec.add_output(tp);

    std::printf("phantom '%s': %d x %d x %d voxels -> %s\n", spec.name.c_str(),
                ph.image.dims().nx, ph.image.dims().ny, ph.image.dims().nz, a.output.c_str());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"coronary vessel segmentation from CTA volumes"};
    app.set_version_flag("--version", std::string(kTool) + " " + kVersion);
    app.require_subcommand(1);
    int jobs = 0;
    app.add_option("--jobs", jobs, "worker threads (0 = auto)");

    SegmentArgs seg;
    CLI::App* c_seg = app.add_subcommand("segment", "run the full segmentation pipeline");
    c_seg->fallthrough();
    c_seg->add_option("--input,-i", seg.input, "input volume (.nrrd/.nhdr/.json/.raw)")
        ->required();
    c_seg->add_option("--output,-o", seg.output, "output directory")->required();
    c_seg->add_option("--config,-c", seg.config, "TOML configuration file");
    seg.seeds.add_options(c_seg);

    CenterlineArgs cl;
    CLI::App* c_cl = app.add_subcommand("centerline", "extract the centerline only");
    c_cl->fallthrough();
    c_cl->add_option("--input,-i", cl.input, "input volume")->required();
    c_cl->add_option("--output,-o", cl.output, "output centerline CSV")->required();
    c_cl->add_option("--config,-c", cl.config, "TOML configuration file");
    cl.seeds.add_options(c_cl);

    MembershipArgs mem;
    CLI::App* c_mem = app.add_subcommand("memberships", "compute gated tissue memberships");
    c_mem->fallthrough();
    c_mem->add_option("--input,-i", mem.input, "input volume")->required();
    c_mem->add_option("--output,-o", mem.output, "output directory")->required();
    c_mem->add_option("--config,-c", mem.config, "TOML configuration file");
    mem.seeds.add_options(c_mem);

    VesselnessArgs ves;
    CLI::App* c_ves = app.add_subcommand("vesselness", "compute the tubular-structure map");
    c_ves->fallthrough();
    c_ves->add_option("--input,-i", ves.input, "input volume")->required();
    c_ves->add_option("--output,-o", ves.output, "output volume file")->required();
    c_ves->add_option("--config,-c", ves.config, "TOML configuration file");

    MeshArgs mesh;
    CLI::App* c_mesh = app.add_subcommand("mesh", "extract a surface from a level set or mask");
    c_mesh->fallthrough();
    c_mesh->add_option("--input,-i", mesh.input, "level-set or mask volume")->required();
    c_mesh->add_option("--output,-o", mesh.output, "output mesh (.stl/.obj/.ply)")->required();
    c_mesh->add_option("--label", mesh.label, "surface label stored in the mesh");
    CLI::Option* iso_opt =
        c_mesh->add_option("--iso", mesh.iso, "iso level (default 0; 0.5 for 0/1 masks)");
    c_mesh->add_option("--smooth-passes", mesh.smooth_passes, "smoothing passes (overrides config)");
    c_mesh->add_option("--config,-c", mesh.config, "TOML configuration file");

    MetricsArgs met;
    CLI::App* c_met = app.add_subcommand("metrics", "cross-section metrics from masks");
    c_met->fallthrough();
    c_met->add_option("--lumen", met.lumen, "lumen mask volume")->required();
    c_met->add_option("--outer", met.outer, "outer-wall mask volume")->required();
    c_met->add_option("--centerline", met.centerline, "centerline CSV")->required();
    c_met->add_option("--output,-o", met.output, "output report JSON")->required();
    c_met->add_option("--csv", met.csv, "also write per-section CSV here");
    c_met->add_option("--config,-c", met.config, "TOML configuration file");

    CompareArgs cmp;
    CLI::App* c_cmp = app.add_subcommand("compare", "dice and hausdorff between two masks");
    c_cmp->fallthrough();
    c_cmp->add_option("--a", cmp.a, "first mask")->required();
    c_cmp->add_option("--b", cmp.b, "second mask")->required();
    c_cmp->add_option("--output,-o", cmp.output, "output JSON")->required();

    PhantomArgs ph;
    CLI::App* c_ph = app.add_subcommand("phantom", "generate a synthetic vessel volume");
    c_ph->fallthrough();
    c_ph->add_option("--recipe", ph.recipe, "recipe name (see --list)");
    c_ph->add_option("--output,-o", ph.output, "output directory");
    c_ph->add_flag("--list", ph.list, "list available recipes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message
        return 1;
    }
    mesh.iso_set = iso_opt->count() > 0;
    corseg::set_thread_count(jobs);

    std::string command;
    std::vector<std::string> args(argv + 1, argv + argc);
    if (app.got_subcommand(c_seg)) command = "segment";
    else if (app.got_subcommand(c_cl)) command = "centerline";
    else if (app.got_subcommand(c_mem)) command = "memberships";
    else if (app.got_subcommand(c_ves)) command = "vesselness";
    else if (app.got_subcommand(c_mesh)) command = "mesh";
    else if (app.got_subcommand(c_met)) command = "metrics";
    else if (app.got_subcommand(c_cmp)) command = "compare";
    else command = "phantom";

    RunRecorder rec(command, args);
    try {
        if (command == "segment") run_segment(seg, rec);
        else if (command == "centerline") run_centerline(cl, rec);
        else if (command == "memberships") run_memberships(mem, rec);
        else if (command == "vesselness") run_vesselness(ves, rec);
        else if (command == "mesh") run_mesh(mesh, rec);
        else if (command == "metrics") run_metrics(met, rec);
        else if (command == "compare") run_compare(cmp, rec);
        else run_phantom(ph, rec);
        rec.finish_ok();
        return 0;
    } catch (const corseg::numeric_error& e) {
        rec.finish_error("numeric_error", e.what());
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const corseg::input_error& e) {
        rec.finish_error("input_error", e.what());
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const corseg::error& e) {
        rec.finish_error("error", e.what());
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        rec.finish_error("internal_error", e.what());
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 2;
    }
}
