#include "corseg/volume_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "corseg/errors.hpp"

namespace corseg {

namespace {

namespace fs = std::filesystem;

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string ext_of(const std::string& path) { return lower(fs::path(path).extension().string()); }

enum class Dtype { f64, f32, i16, u16, i32, u8 };

std::size_t dtype_size(Dtype t) {
    switch (t) {
        case Dtype::f64: return 8;
        case Dtype::f32: return 4;
        case Dtype::i16:
        case Dtype::u16: return 2;
        case Dtype::i32: return 4;
        case Dtype::u8: return 1;
    }
    return 0;
}

Dtype dtype_from_name(const std::string& name, const std::string& context) {
    std::string t = lower(trim(name));
    if (t == "double" || t == "float64") return Dtype::f64;
    if (t == "float" || t == "float32") return Dtype::f32;
    if (t == "short" || t == "short int" || t == "signed short" || t == "int16" ||
        t == "int16_t")
        return Dtype::i16;
    if (t == "ushort" || t == "unsigned short" || t == "uint16" || t == "uint16_t")
        return Dtype::u16;
    if (t == "int" || t == "signed int" || t == "int32" || t == "int32_t") return Dtype::i32;
    if (t == "uchar" || t == "unsigned char" || t == "uint8" || t == "uint8_t") return Dtype::u8;
    throw input_error(context + ": unsupported sample type '" + trim(name) + "'");
}

template <typename T>
void decode_into(const std::vector<char>& bytes, std::vector<double>& out) {
    const T* src = reinterpret_cast<const T*>(bytes.data());
    std::size_t n = bytes.size() / sizeof(T);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<double>(src[i]);
}

std::vector<double> decode_scalars(const std::vector<char>& bytes, Dtype t) {
    std::vector<double> out;
    switch (t) {
        case Dtype::f64: decode_into<double>(bytes, out); break;
        case Dtype::f32: decode_into<float>(bytes, out); break;
        case Dtype::i16: decode_into<std::int16_t>(bytes, out); break;
        case Dtype::u16: decode_into<std::uint16_t>(bytes, out); break;
        case Dtype::i32: decode_into<std::int32_t>(bytes, out); break;
        case Dtype::u8: decode_into<std::uint8_t>(bytes, out); break;
    }
    return out;
}

struct RawImage {
    GridDims dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    WorldPoint origin{0.0, 0.0, 0.0};
    std::vector<double> scalars;
};

// ---------------------------------------------------------------- NRRD ----

std::array<double, 3> parse_nrrd_vector(const std::string& text, const std::string& context) {
    std::string s = trim(text);
    if (s.size() < 2 || s.front() != '(' || s.back() != ')')
        throw input_error(context + ": malformed vector '" + text + "'");
    std::array<double, 3> v{};
    std::stringstream ss(s.substr(1, s.size() - 2));
    std::string part;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(ss, part, ','))
            throw input_error(context + ": vector '" + text + "' needs 3 components");
        try {
            v[static_cast<std::size_t>(i)] = std::stod(trim(part));
        } catch (const std::exception&) {
            throw input_error(context + ": bad vector component '" + trim(part) + "'");
        }
    }
    if (std::getline(ss, part, ','))
        throw input_error(context + ": vector '" + text + "' has more than 3 components");
    return v;
}

struct NrrdHeader {
    Dtype type = Dtype::f64;
    GridDims dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    WorldPoint origin{0.0, 0.0, 0.0};
    std::string data_file;  // empty when attached
};

NrrdHeader parse_nrrd_header(std::istream& is, const std::string& path) {
    std::string ctx = "'" + path + "'";
    std::string line;
    if (!std::getline(is, line)) throw input_error(ctx + ": empty file");
    line = trim(line);
    if (line.rfind("NRRD000", 0) != 0 || line.size() != 8 || line[7] < '1' || line[7] > '5')
        throw input_error(ctx + ": not an NRRD file (bad magic '" + line + "')");

    NrrdHeader h;
    bool saw_sizes = false, saw_type = false, saw_encoding = false;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) break;                 // header/data separator
        if (line[0] == '#') continue;            // comment
        if (line.find(":=") != std::string::npos) continue;  // key-value metadata

        std::size_t colon = line.find(": ");
        if (colon == std::string::npos)
            throw input_error(ctx + ": malformed header line '" + line + "'");
        std::string field = lower(trim(line.substr(0, colon)));
        std::string value = trim(line.substr(colon + 2));

        if (field == "type") {
            h.type = dtype_from_name(value, ctx);
            saw_type = true;
        } else if (field == "dimension") {
            if (trim(value) != "3") throw input_error(ctx + ": only 3-D volumes are supported");
        } else if (field == "space dimension") {
            if (trim(value) != "3")
                throw input_error(ctx + ": only 3-D world spaces are supported");
        } else if (field == "space") {
            // Named spaces imply 3 axes for the ones we accept; reject others.
            std::string v = lower(value);
            if (v.find("left-posterior-superior") == std::string::npos &&
                v != "lps" && v != "right-anterior-superior" && v != "ras")
                throw input_error(ctx + ": unsupported space '" + value + "'");
        } else if (field == "sizes") {
            std::stringstream ss(value);
            if (!(ss >> h.dims.nx >> h.dims.ny >> h.dims.nz))
                throw input_error(ctx + ": bad sizes '" + value + "'");
            int extra;
            if (ss >> extra) throw input_error(ctx + ": only 3-D volumes are supported");
            saw_sizes = true;
        } else if (field == "space directions") {
            std::stringstream ss(value);
            std::string tok;
            std::vector<std::string> vecs;
            while (ss >> tok) vecs.push_back(tok);
            if (vecs.size() != 3)
                throw input_error(ctx + ": space directions must list 3 vectors");
            for (int axis = 0; axis < 3; ++axis) {
                std::array<double, 3> v = parse_nrrd_vector(vecs[static_cast<std::size_t>(axis)], ctx);
                for (int c = 0; c < 3; ++c) {
                    if (c == axis) continue;
                    if (std::abs(v[static_cast<std::size_t>(c)]) > 1e-12)
                        throw input_error(ctx + ": only axis-aligned space directions are supported");
                }
                double d = v[static_cast<std::size_t>(axis)];
                if (!(d > 0)) throw input_error(ctx + ": space directions must be positive");
                h.spacing[static_cast<std::size_t>(axis)] = d;
            }
        } else if (field == "spacings") {
            std::stringstream ss(value);
            if (!(ss >> h.spacing[0] >> h.spacing[1] >> h.spacing[2]))
                throw input_error(ctx + ": bad spacings '" + value + "'");
        } else if (field == "space origin") {
            std::array<double, 3> v = parse_nrrd_vector(value, ctx);
            h.origin = {v[0], v[1], v[2]};
        } else if (field == "kinds") {
            if (lower(value) != "domain domain domain")
                throw input_error(ctx + ": kinds must be 'domain domain domain'");
        } else if (field == "endian") {
            if (lower(value) != "little")
                throw input_error(ctx + ": big-endian data is not supported");
        } else if (field == "encoding") {
            if (lower(value) != "raw")
                throw input_error(ctx + ": encoding '" + value + "' is not supported (raw only)");
            saw_encoding = true;
        } else if (field == "data file" || field == "datafile") {
            h.data_file = value;
        } else if (field == "content" || field == "measurement frame") {
            // informative; ignored
        } else {
            throw input_error(ctx + ": unsupported header field '" + field + "'");
        }
    }
    if (!saw_type) throw input_error(ctx + ": missing 'type' field");
    if (!saw_sizes) throw input_error(ctx + ": missing 'sizes' field");
    if (!saw_encoding) throw input_error(ctx + ": missing 'encoding' field");
    if (h.dims.nx < 1 || h.dims.ny < 1 || h.dims.nz < 1)
        throw input_error(ctx + ": sizes must be positive");
    return h;
}

std::vector<char> read_exact_payload(std::istream& is, std::size_t bytes,
                                     const std::string& path) {
    std::vector<char> buf(bytes);
    is.read(buf.data(), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(is.gcount()) != bytes)
        throw input_error("'" + path + "': data is shorter than the header promises");
    char probe;
    if (is.read(&probe, 1))
        throw input_error("'" + path + "': trailing bytes after the voxel data");
    return buf;
}

RawImage read_nrrd(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw input_error("cannot open '" + path + "'");
    NrrdHeader h = parse_nrrd_header(is, path);

    std::size_t count = static_cast<std::size_t>(h.dims.count());
    std::size_t bytes = count * dtype_size(h.type);
    std::vector<char> payload;
    if (h.data_file.empty()) {
        payload = read_exact_payload(is, bytes, path);
    } else {
        fs::path data = fs::path(path).parent_path() / h.data_file;
        std::ifstream ds(data, std::ios::binary);
        if (!ds) throw input_error("cannot open data file '" + data.string() + "'");
        payload = read_exact_payload(ds, bytes, data.string());
    }

    RawImage img;
    img.dims = h.dims;
    img.spacing = h.spacing;
    img.origin = h.origin;
    img.scalars = decode_scalars(payload, h.type);
    return img;
}

void write_nrrd_header(std::ostream& os, const GridDims& d, const std::array<double, 3>& sp,
                       const WorldPoint& org, const char* type, const std::string& data_file) {
    os << "NRRD0004\n";
    os << "type: " << type << "\n";
    os << "dimension: 3\n";
    os << "space dimension: 3\n";
    os << "sizes: " << d.nx << " " << d.ny << " " << d.nz << "\n";
    os.precision(17);
    os << "space directions: (" << sp[0] << ",0,0) (0," << sp[1] << ",0) (0,0," << sp[2] << ")\n";
    os << "space origin: (" << org.x << "," << org.y << "," << org.z << ")\n";
    os << "kinds: domain domain domain\n";
    os << "endian: little\n";
    os << "encoding: raw\n";
    if (!data_file.empty()) os << "data file: " << data_file << "\n";
    os << "\n";
}

void write_nrrd(const std::string& path, const GridDims& d, const std::array<double, 3>& sp,
                const WorldPoint& org, const char* type, const char* bytes, std::size_t n_bytes) {
    std::string ext = ext_of(path);
    if (ext == ".nhdr") {
        fs::path raw = fs::path(path);
        raw.replace_extension(".raw");
        {
            std::ofstream os(path, std::ios::binary);
            if (!os) throw input_error("cannot open '" + path + "' for writing");
            write_nrrd_header(os, d, sp, org, type, raw.filename().string());
            if (!os) throw input_error("failed while writing '" + path + "'");
        }
        std::ofstream ds(raw, std::ios::binary);
        if (!ds) throw input_error("cannot open '" + raw.string() + "' for writing");
        ds.write(bytes, static_cast<std::streamsize>(n_bytes));
        if (!ds) throw input_error("failed while writing '" + raw.string() + "'");
    } else {
        std::ofstream os(path, std::ios::binary);
        if (!os) throw input_error("cannot open '" + path + "' for writing");
        write_nrrd_header(os, d, sp, org, type, "");
        os.write(bytes, static_cast<std::streamsize>(n_bytes));
        if (!os) throw input_error("failed while writing '" + path + "'");
    }
}

// ------------------------------------------------------- raw + sidecar ----

struct SidecarPaths {
    fs::path json;
    fs::path raw;
};

SidecarPaths sidecar_paths(const std::string& path) {
    fs::path p(path);
    SidecarPaths sp;
    if (ext_of(path) == ".json") {
        sp.json = p;
        sp.raw = p;
        sp.raw.replace_extension(".raw");
    } else {
        sp.raw = p;
        sp.json = p;
        sp.json.replace_extension(".json");
    }
    return sp;
}

RawImage read_sidecar(const std::string& path) {
    SidecarPaths sp = sidecar_paths(path);
    std::ifstream js(sp.json);
    if (!js) throw input_error("cannot open sidecar '" + sp.json.string() + "'");
    nlohmann::json j;
    try {
        js >> j;
    } catch (const nlohmann::json::exception& e) {
        throw input_error("'" + sp.json.string() + "': invalid JSON (" + e.what() + ")");
    }
    std::string ctx = "'" + sp.json.string() + "'";

    auto need = [&](const char* key) -> const nlohmann::json& {
        if (!j.contains(key)) throw input_error(ctx + ": missing '" + key + "'");
        return j.at(key);
    };

    RawImage img;
    try {
        auto dims = need("dims");
        if (!dims.is_array() || dims.size() != 3)
            throw input_error(ctx + ": 'dims' must be a 3-element array");
        img.dims = {dims[0].get<int>(), dims[1].get<int>(), dims[2].get<int>()};
        auto spacing = need("spacing");
        if (!spacing.is_array() || spacing.size() != 3)
            throw input_error(ctx + ": 'spacing' must be a 3-element array");
        for (int a = 0; a < 3; ++a)
            img.spacing[static_cast<std::size_t>(a)] = spacing[static_cast<std::size_t>(a)].get<double>();
        auto origin = need("origin");
        if (!origin.is_array() || origin.size() != 3)
            throw input_error(ctx + ": 'origin' must be a 3-element array");
        img.origin = {origin[0].get<double>(), origin[1].get<double>(), origin[2].get<double>()};

        std::string endian = j.value("endianness", std::string("little"));
        if (lower(endian) != "little")
            throw input_error(ctx + ": big-endian data is not supported");
        Dtype t = dtype_from_name(need("dtype").get<std::string>(), ctx);
        double slope = j.value("rescale_slope", 1.0);
        double intercept = j.value("rescale_intercept", 0.0);

        if (img.dims.nx < 1 || img.dims.ny < 1 || img.dims.nz < 1)
            throw input_error(ctx + ": dims must be positive");
        for (double s : img.spacing)
            if (!(s > 0)) throw input_error(ctx + ": spacing must be positive");

        std::ifstream ds(sp.raw, std::ios::binary);
        if (!ds) throw input_error("cannot open '" + sp.raw.string() + "'");
        std::size_t bytes = static_cast<std::size_t>(img.dims.count()) * dtype_size(t);
        std::vector<char> payload = read_exact_payload(ds, bytes, sp.raw.string());
        img.scalars = decode_scalars(payload, t);
        if (slope != 1.0 || intercept != 0.0)
            for (double& v : img.scalars) v = slope * v + intercept;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(ctx + ": invalid field (" + e.what() + ")");
    }
    return img;
}

void write_sidecar(const std::string& path, const GridDims& d, const std::array<double, 3>& sp,
                   const WorldPoint& org, const char* dtype, const char* bytes,
                   std::size_t n_bytes) {
    SidecarPaths out = sidecar_paths(path);
    nlohmann::ordered_json j;
    j["dims"] = {d.nx, d.ny, d.nz};
    j["spacing"] = {sp[0], sp[1], sp[2]};
    j["origin"] = {org.x, org.y, org.z};
    j["dtype"] = dtype;
    j["endianness"] = "little";
    j["rescale_slope"] = 1.0;
    j["rescale_intercept"] = 0.0;
    j["data"] = out.raw.filename().string();
    {
        std::ofstream os(out.json);
        if (!os) throw input_error("cannot open '" + out.json.string() + "' for writing");
        os << j.dump(2) << "\n";
        if (!os) throw input_error("failed while writing '" + out.json.string() + "'");
    }
    std::ofstream ds(out.raw, std::ios::binary);
    if (!ds) throw input_error("cannot open '" + out.raw.string() + "' for writing");
    ds.write(bytes, static_cast<std::streamsize>(n_bytes));
    if (!ds) throw input_error("failed while writing '" + out.raw.string() + "'");
}

RawImage read_any(const std::string& path) {
    std::string ext = ext_of(path);
    if (ext == ".nrrd" || ext == ".nhdr") return read_nrrd(path);
    if (ext == ".json" || ext == ".raw") return read_sidecar(path);
    if (ext == ".dcm" || ext == ".dicom")
        throw input_error("DICOM input is not supported; convert to NRRD or raw+JSON first");
    throw input_error("unsupported volume format '" + ext + "' (use .nrrd, .nhdr, .json, or .raw)");
}

} // namespace

VoxelGrid read_volume(const std::string& path) {
    RawImage img = read_any(path);
    VoxelGrid g(img.dims, img.spacing, img.origin, GridKind::intensity);
    if (img.scalars.size() != g.values().size())
        throw input_error("'" + path + "': sample count does not match sizes");
    g.values() = std::move(img.scalars);
    return g;
}

void write_volume(const VoxelGrid& grid, const std::string& path) {
    const char* bytes = reinterpret_cast<const char*>(grid.values().data());
    std::size_t n = grid.values().size() * sizeof(double);
    std::string ext = ext_of(path);
    if (ext == ".nrrd" || ext == ".nhdr")
        write_nrrd(path, grid.dims(), grid.spacing(), grid.origin(), "double", bytes, n);
    else if (ext == ".json" || ext == ".raw")
        write_sidecar(path, grid.dims(), grid.spacing(), grid.origin(), "double", bytes, n);
    else
        throw input_error("unsupported volume format '" + ext +
                          "' (use .nrrd, .nhdr, .json, or .raw)");
}

BinaryMask read_mask(const std::string& path) {
    RawImage img = read_any(path);
    BinaryMask m(img.dims, img.spacing, img.origin);
    if (img.scalars.size() != m.values.size())
        throw input_error("'" + path + "': sample count does not match sizes");
    for (std::size_t i = 0; i < m.values.size(); ++i)
        m.values[i] = img.scalars[i] != 0.0 ? 1 : 0;
    return m;
}

void write_mask(const BinaryMask& mask, const std::string& path) {
    const char* bytes = reinterpret_cast<const char*>(mask.values.data());
    std::size_t n = mask.values.size();
    std::string ext = ext_of(path);
    if (ext == ".nrrd" || ext == ".nhdr")
        write_nrrd(path, mask.dims, mask.spacing, mask.origin, "unsigned char", bytes, n);
    else if (ext == ".json" || ext == ".raw")
        write_sidecar(path, mask.dims, mask.spacing, mask.origin, "unsigned char", bytes, n);
    else
        throw input_error("unsupported volume format '" + ext +
                          "' (use .nrrd, .nhdr, .json, or .raw)");
}

} // namespace corseg
