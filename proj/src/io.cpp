#include "qdi/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace qdi {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'Q', 'D', 'I', 'F', 'F', 'C', 'F', '1'};

std::ofstream open_out(const std::string& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw io_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw io_error("cannot open: " + path);
    return in;
}

void put_u32(std::ofstream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw io_error("truncated header: " + path);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

// header check shared by both container readers; returns (n, tag)
std::pair<int, uint32_t> read_header(std::ifstream& in, const std::string& path) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw io_error("not a field container: " + path);
    const uint32_t n = get_u32(in, path);
    const uint32_t tag = get_u32(in, path);
    if (n < 8 || n > 1u << 15) throw io_error("implausible grid size in " + path);
    return {static_cast<int>(n), tag};
}

void read_doubles(std::ifstream& in, double* dst, size_t count, const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count * 8)))
        throw io_error("truncated payload: " + path);
}

}  // namespace

void write_field(const std::string& path, const ComplexField& f) {
    auto out = open_out(path, true);
    out.write(kMagic, 8);
    put_u32(out, static_cast<uint32_t>(f.grid.n));
    put_u32(out, static_cast<uint32_t>(f.space));
    static_assert(sizeof(cplx) == 16);
    out.write(reinterpret_cast<const char*>(f.v.data()),
              static_cast<std::streamsize>(f.v.size() * sizeof(cplx)));
    if (!out) throw io_error("write failed: " + path);
}

ComplexField read_field(const std::string& path, double half_extent) {
    auto in = open_in(path, true);
    auto [n, tag] = read_header(in, path);
    if (tag > 1) throw io_error("container holds a real image, not a complex field: " + path);
    ComplexField f = make_field(make_grid(n, half_extent), static_cast<Space>(tag));
    read_doubles(in, reinterpret_cast<double*>(f.v.data()), f.v.size() * 2, path);
    return f;
}

void write_real_image(const std::string& path, const RealImage& img) {
    auto out = open_out(path, true);
    out.write(kMagic, 8);
    put_u32(out, static_cast<uint32_t>(img.grid.n));
    put_u32(out, kSpaceTagRealImage);
    out.write(reinterpret_cast<const char*>(img.values.data()),
              static_cast<std::streamsize>(img.values.size()) * 8);
    if (!out) throw io_error("write failed: " + path);
}

RealImage read_real_image(const std::string& path, double half_extent) {
    auto in = open_in(path, true);
    auto [n, tag] = read_header(in, path);
    if (tag != kSpaceTagRealImage)
        throw io_error("container holds a complex field, not a real image: " + path);
    RealImage img{make_grid(n, half_extent), Eigen::VectorXd(n * n), false};
    read_doubles(in, img.values.data(), static_cast<size_t>(n) * n, path);
    return img;
}

namespace {

// next integer token, skipping whitespace and '#' comment lines
long pgm_int(std::istream& in, const std::string& path) {
    int c = in.get();
    while (c != EOF && (std::isspace(c) || c == '#')) {
        if (c == '#')
            while (c != EOF && c != '\n') c = in.get();
        c = in.get();
    }
    if (c == EOF || !std::isdigit(c)) throw io_error("malformed PGM header: " + path);
    long v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        if (v > 1 << 30) throw io_error("malformed PGM header: " + path);
        c = in.get();
    }
    return v;
}

}  // namespace

PgmImage read_pgm(const std::string& path) {
    auto in = open_in(path, true);
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    const bool binary = m1 == '5';
    if (m0 != 'P' || (m1 != '2' && m1 != '5')) throw io_error("not a P2/P5 PGM: " + path);
    PgmImage img;
    img.width = static_cast<int>(pgm_int(in, path));
    img.height = static_cast<int>(pgm_int(in, path));
    img.maxval = static_cast<int>(pgm_int(in, path));
    if (img.width <= 0 || img.height <= 0) throw io_error("bad PGM dimensions: " + path);
    if (img.maxval < 1 || img.maxval > 65535) throw io_error("bad PGM maxval: " + path);
    const size_t count = static_cast<size_t>(img.width) * img.height;
    img.px.resize(count);
    if (binary) {
        // single whitespace byte separates header and raster
        const int bytes = img.maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(count * static_cast<size_t>(bytes));
        if (!in.read(reinterpret_cast<char*>(raw.data()),
                     static_cast<std::streamsize>(raw.size())))
            throw io_error("truncated PGM raster: " + path);
        for (size_t i = 0; i < count; ++i)
            img.px[i] = bytes == 1 ? raw[i]
                                   : static_cast<uint16_t>(raw[2 * i] << 8 | raw[2 * i + 1]);
    } else {
        for (size_t i = 0; i < count; ++i) img.px[i] = static_cast<uint16_t>(pgm_int(in, path));
    }
    for (auto v : img.px)
        if (v > img.maxval) throw io_error("PGM sample exceeds maxval: " + path);
    return img;
}

void write_pgm8(const std::string& path, const Eigen::ArrayXXd& values) {
    const double lo = values.minCoeff(), hi = values.maxCoeff();
    const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
    auto out = open_out(path, true);
    out << "P5\n" << values.cols() << " " << values.rows() << "\n255\n";
    for (Eigen::Index r = 0; r < values.rows(); ++r)
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            const auto g = static_cast<unsigned char>(std::lround((values(r, c) - lo) * scale));
            out.put(static_cast<char>(g));
        }
    if (!out) throw io_error("write failed: " + path);
}

void write_image_pgm_with_range(const std::string& path, const RealImage& img) {
    const int n = img.grid.n;
    Eigen::ArrayXXd a(n, n);
    // display orientation: top raster row is the largest y
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix) a(n - 1 - iy, ix) = img.values[iy * n + ix];
    write_pgm8(path, a);
    write_text(path + ".range.txt",
               format_double(img.values.minCoeff()) + " " +
                   format_double(img.values.maxCoeff()) + "\n");
}

void write_text(const std::string& path, const std::string& content) {
    auto out = open_out(path, true);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw io_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
    auto in = open_in(path, true);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_spectrum_csv(const std::string& path, const Eigen::VectorXd& weights) {
    std::string s = "index,weight\n";
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        s += std::to_string(i) + "," + format_double(weights[i]) + "\n";
    write_text(path, s);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXcd& m,
                      const std::string& basis_note) {
    std::string s = "# basis: " + basis_note + "\n";
    s += "n,m,re,im\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            s += std::to_string(r) + "," + std::to_string(c) + "," +
                 format_double(m(r, c).real()) + "," + format_double(m(r, c).imag()) + "\n";
    write_text(path, s);
}

Eigen::MatrixXcd read_matrix_csv(const std::string& path) {
    auto in = open_in(path, false);
    std::string line;
    struct Entry {
        int r, c;
        cplx v;
    };
    std::vector<Entry> entries;
    int rows = 0, cols = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line[0] == 'n') continue;
        Entry e;
        double re = 0, im = 0;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &e.r, &e.c, &re, &im) != 4)
            throw io_error("malformed matrix row in " + path);
        e.v = cplx(re, im);
        rows = std::max(rows, e.r + 1);
        cols = std::max(cols, e.c + 1);
        entries.push_back(e);
    }
    if (entries.empty()) throw io_error("empty matrix file: " + path);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(rows, cols);
    for (const auto& e : entries) m(e.r, e.c) = e.v;
    return m;
}

uint64_t fnv1a64(const void* data, size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t fnv1a64_file(const std::string& path) {
    auto in = open_in(path, true);
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const auto got = static_cast<size_t>(in.gcount());
        for (size_t i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (got < sizeof buf) break;
    }
    return h;
}

void write_manifest(const std::string& root, const std::string& tool_version,
                    const std::string& config_echo_hash) {
    std::vector<std::string> rels;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        auto rel = fs::relative(e.path(), root).generic_string();
        if (rel == "MANIFEST.txt") continue;
        rels.push_back(rel);
    }
    std::sort(rels.begin(), rels.end());
    std::string s = "qdiff-manifest 1\ntool " + tool_version + "\nconfig " + config_echo_hash + "\n";
    for (const auto& rel : rels) {
        const auto full = (fs::path(root) / rel).string();
        char hex[20];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(full)));
        s += rel + "\t" + std::to_string(fs::file_size(full)) + "\t" + "fnv1a:" + hex + "\n";
    }
    write_text((fs::path(root) / "MANIFEST.txt").string(), s);
}

}  // namespace qdi
