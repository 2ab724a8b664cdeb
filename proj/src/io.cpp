#include "dbp/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbp/errors.hpp"

namespace dbp {

namespace {

std::ifstream open_for_read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return in;
}

// Parses exactly `count` finite doubles from `line`; false on anything else.
bool parse_numbers(const std::string& line, double* out, std::size_t count) {
    std::istringstream ss(line);
    ss.imbue(std::locale::classic());
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(ss >> tok)) return false;
        char* end = nullptr;
        out[i] = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size() || !std::isfinite(out[i])) return false;
    }
    std::string extra;
    return !(ss >> extra);
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
}

}  // namespace

PointCloud read_xyz(const std::string& path) {
    auto in = open_for_read(path);
    std::vector<Vec3> pts;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        line = strip_cr(line);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        Vec3 p;
        if (!parse_numbers(line, p.data(), 3))
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected three numbers, got '" + line + "'");
        pts.push_back(p);
    }
    if (pts.empty()) throw ContractError(path + ": no points found (empty cloud)");
    return PointCloud(std::move(pts), path);
}

std::string format_xyz(const PointCloud& cloud) {
    std::string out;
    out.reserve(cloud.size() * 60);
    char buf[128];
    for (const auto& p : cloud.points()) {
        std::snprintf(buf, sizeof buf, "%.12g %.12g %.12g\n", p[0], p[1], p[2]);
        out += buf;
    }
    return out;
}

void write_xyz(const PointCloud& cloud, const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent))
        throw IoError("cannot write " + path + ": directory " + parent.string() + " does not exist");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    const auto text = format_xyz(cloud);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError("failed writing " + path);
}

namespace {

struct PlyElement {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> properties;  // scalar property names; "list" marks a list
    bool has_list = false;
};

struct PlyHeader {
    std::vector<PlyElement> elements;
};

PlyHeader read_ply_header(std::istream& in, const std::string& path) {
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "ply") throw UnsupportedFormatError(path + ": not a PLY file");
    PlyHeader header;
    bool ascii = false;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        std::istringstream ss(line);
        std::string word;
        ss >> word;
        if (word == "format") {
            std::string kind;
            ss >> kind;
            if (kind != "ascii")
                throw UnsupportedFormatError(path + ": only ASCII PLY is supported (found " + kind + ")");
            ascii = true;
        } else if (word == "element") {
            PlyElement e;
            ss >> e.name >> e.count;
            header.elements.push_back(e);
        } else if (word == "property") {
            if (header.elements.empty()) throw ParseError(path + ": property before any element");
            std::string type;
            ss >> type;
            auto& e = header.elements.back();
            if (type == "list") {
                e.has_list = true;
                e.properties.push_back("list");
            } else {
                std::string name;
                ss >> name;
                e.properties.push_back(name);
            }
        } else if (word == "end_header") {
            if (!ascii) throw UnsupportedFormatError(path + ": missing format line");
            return header;
        }
        // comment / obj_info lines are ignored
    }
    throw ParseError(path + ": header has no end_header");
}

struct PlyContents {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

PlyContents read_ply(const std::string& path, bool want_faces) {
    auto in = open_for_read(path);
    const PlyHeader header = read_ply_header(in, path);
    PlyContents out;
    bool saw_vertex = false;
    std::string line;
    for (const auto& e : header.elements) {
        std::size_t ix = e.properties.size(), iy = ix, iz = ix;
        if (e.name == "vertex") {
            saw_vertex = true;
            for (std::size_t p = 0; p < e.properties.size(); ++p) {
                if (e.properties[p] == "x") ix = p;
                if (e.properties[p] == "y") iy = p;
                if (e.properties[p] == "z") iz = p;
            }
            if (ix == e.properties.size() || iy == e.properties.size() || iz == e.properties.size())
                throw UnsupportedFormatError(path + ": vertex element lacks x/y/z properties");
            if (e.has_list) throw UnsupportedFormatError(path + ": list properties on vertices are not supported");
        }
        for (std::size_t r = 0; r < e.count; ++r) {
            if (!std::getline(in, line)) throw ParseError(path + ": file ends inside element " + e.name);
            if (e.name == "vertex") {
                std::vector<double> values(e.properties.size());
                if (!parse_numbers(strip_cr(line), values.data(), values.size()))
                    throw ParseError(path + ": malformed vertex line '" + line + "'");
                out.vertices.push_back({values[ix], values[iy], values[iz]});
            } else if (want_faces && e.name == "face") {
                std::istringstream ss(line);
                std::size_t n = 0;
                ss >> n;
                std::vector<std::uint32_t> idx(n);
                for (auto& v : idx)
                    if (!(ss >> v)) throw ParseError(path + ": malformed face line '" + line + "'");
                for (std::size_t t = 1; t + 1 < n; ++t) out.triangles.push_back({idx[0], idx[t], idx[t + 1]});
            }
        }
    }
    if (!saw_vertex) throw UnsupportedFormatError(path + ": no vertex element");
    return out;
}

}  // namespace

PointCloud read_ply_ascii(const std::string& path) {
    auto contents = read_ply(path, false);
    if (contents.vertices.empty()) throw ContractError(path + ": no points found (empty cloud)");
    return PointCloud(std::move(contents.vertices), path);
}

Mesh read_ply_mesh(const std::string& path) {
    auto contents = read_ply(path, true);
    Mesh mesh{std::move(contents.vertices), std::move(contents.triangles)};
    SurfaceDescriptor{mesh}.validate();
    return mesh;
}

PointCloud read_point_cloud(const std::string& path) {
    const auto ext = std::filesystem::path(path).extension().string();
    if (ext == ".ply" || ext == ".PLY") return read_ply_ascii(path);
    return read_xyz(path);
}

SurfaceDescriptor parse_surface_spec(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string args = colon == std::string::npos ? std::string{} : spec.substr(colon + 1);
    if (colon != std::string::npos && args.empty()) throw ParseError("surface '" + spec + "': empty parameter list");
    auto numbers = [&](std::size_t count) {
        std::vector<double> v(count);
        std::string flat = args;
        for (auto& ch : flat)
            if (ch == ',') ch = ' ';
        if (!parse_numbers(flat, v.data(), count))
            throw ParseError("surface '" + spec + "': expected " + std::to_string(count) + " comma-separated numbers");
        return v;
    };
    SurfaceDescriptor s;
    if (kind == "sphere") {
        s.shape = Sphere{{0, 0, 0}, args.empty() ? 1.0 : numbers(1)[0]};
    } else if (kind == "torus") {
        Torus t;
        if (!args.empty()) {
            const auto v = numbers(2);
            t.major = v[0];
            t.minor = v[1];
        }
        s.shape = t;
    } else if (kind == "plane") {
        s.shape = Plane{};
    } else if (kind == "mesh") {
        s.shape = read_ply_mesh(args);
    } else {
        throw ParseError("unknown surface '" + spec + "' (expected sphere:r, torus:R,r, plane or mesh:file.ply)");
    }
    try {
        s.validate();
    } catch (const ContractError& e) {
        throw ParseError("surface '" + spec + "': " + e.what());
    }
    return s;
}

}  // namespace dbp
