#include <doctest.h>

#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "qdi/grid.hpp"
#include "qdi/imaging.hpp"
#include "qdi/io.hpp"

using namespace qdi;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path p;
    TempDir() {
        p = fs::temp_directory_path() / ("qdi_io_" + std::to_string(::getpid()) + "_" +
                                         std::to_string(counter()++));
        fs::create_directories(p);
    }
    ~TempDir() { fs::remove_all(p); }
    std::string file(const std::string& name) const { return (p / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

ComplexField patterned_field(const TransverseGrid& g, Space space) {
    ComplexField f = make_field(g, space);
    for (int iy = 0; iy < g.n; ++iy)
        for (int ix = 0; ix < g.n; ++ix)
            f.at(ix, iy) = cplx(0.25 * ix - 1.5 * iy + 0.125, iy * 0.0625 - ix * 7.0);
    return f;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("field container roundtrip is exact") {
    TempDir td;
    auto g = make_grid(16, 3.5);
    for (auto space : {Space::real_space, Space::momentum}) {
        auto f = patterned_field(g, space);
        auto path = td.file("f.bin");
        write_field(path, f);
        auto back = read_field(path, 3.5);
        CHECK(back.grid == g);
        CHECK(back.space == space);
        REQUIRE(back.v.size() == f.v.size());
        for (size_t i = 0; i < f.v.size(); ++i) CHECK(back.v[i] == f.v[i]);
    }
}

TEST_CASE("real image container roundtrip") {
    TempDir td;
    auto g = make_grid(8, 2.0);
    RealImage img{g, Eigen::VectorXd::LinSpaced(64, -3.0, 5.0), true};
    auto path = td.file("img.bin");
    write_real_image(path, img);
    auto back = read_real_image(path, 2.0);
    CHECK(back.grid == g);
    CHECK((back.values - img.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field container rejects foreign and damaged input") {
    TempDir td;
    auto bad = td.file("bad.bin");
    write_text(bad, "not a container at all");
    CHECK_THROWS_AS(read_field(bad, 1.0), io_error);
    CHECK_THROWS_AS(read_field(td.file("absent.bin"), 1.0), io_error);

    auto g = make_grid(8, 2.0);
    RealImage img{g, Eigen::VectorXd::Zero(64), false};
    auto imgp = td.file("img.bin");
    write_real_image(imgp, img);
    CHECK_THROWS_AS(read_field(imgp, 2.0), io_error);  // tag 2 is not a complex field
    auto fp = td.file("f.bin");
    write_field(fp, patterned_field(g, Space::momentum));
    CHECK_THROWS_AS(read_real_image(fp, 2.0), io_error);

    // truncated payload
    auto content = read_text(fp);
    write_text(td.file("cut.bin"), content.substr(0, content.size() / 2));
    CHECK_THROWS_AS(read_field(td.file("cut.bin"), 2.0), io_error);
}

TEST_CASE("pgm ascii parsing with comments") {
    TempDir td;
    auto p = td.file("a.pgm");
    write_text(p,
               "P2\n# a comment line\n3 2\n# another\n255\n"
               "0 128 255\n10 20 30\n");
    auto img = read_pgm(p);
    CHECK(img.width == 3);
    CHECK(img.height == 2);
    CHECK(img.maxval == 255);
    REQUIRE(img.px.size() == 6);
    CHECK(img.px[0] == 0);
    CHECK(img.px[2] == 255);
    CHECK(img.px[5] == 30);
}

TEST_CASE("pgm binary 8 and 16 bit") {
    TempDir td;
    {
        auto p = td.file("b8.pgm");
        std::ofstream out(p, std::ios::binary);
        out << "P5\n2 2\n255\n";
        const unsigned char data[4] = {0, 7, 200, 255};
        out.write(reinterpret_cast<const char*>(data), 4);
    }
    auto b8 = read_pgm(td.file("b8.pgm"));
    CHECK(b8.maxval == 255);
    CHECK(b8.px == std::vector<uint16_t>{0, 7, 200, 255});
    {
        auto p = td.file("b16.pgm");
        std::ofstream out(p, std::ios::binary);
        out << "P5\n2 1\n65535\n";
        // big-endian sample pairs: 0x0102 = 258, 0xFFFE = 65534
        const unsigned char data[4] = {0x01, 0x02, 0xFF, 0xFE};
        out.write(reinterpret_cast<const char*>(data), 4);
    }
    auto b16 = read_pgm(td.file("b16.pgm"));
    CHECK(b16.maxval == 65535);
    CHECK(b16.px == std::vector<uint16_t>{258, 65534});
}

TEST_CASE("pgm rejects malformed input") {
    TempDir td;
    auto w = [&](const char* name, const std::string& s) {
        write_text(td.file(name), s);
        return td.file(name);
    };
    CHECK_THROWS_AS(read_pgm(w("m1.pgm", "P3\n2 2\n255\n0 0 0 0")), io_error);
    CHECK_THROWS_AS(read_pgm(w("m2.pgm", "P2\n2 2\n0\n0 0 0 0")), io_error);
    CHECK_THROWS_AS(read_pgm(w("m3.pgm", "P2\n2 2\n70000\n0 0 0 0")), io_error);
    CHECK_THROWS_AS(read_pgm(w("m4.pgm", "P2\n2 2\n255\n0 0 0")), io_error);  // short
    CHECK_THROWS_AS(read_pgm(w("m5.pgm", "P2\n2 2\n255\n0 0 0 300\n")), io_error);
    CHECK_THROWS_AS(read_pgm(td.file("missing.pgm")), io_error);
}

TEST_CASE("write_pgm8 normalizes and roundtrips through read_pgm") {
    TempDir td;
    Eigen::ArrayXXd a(2, 3);
    a << -1.0, 0.0, 1.0, 3.0, -1.0, 1.0;
    auto p = td.file("o.pgm");
    write_pgm8(p, a);
    auto img = read_pgm(p);
    CHECK(img.width == 3);
    CHECK(img.height == 2);
    CHECK(img.maxval == 255);
    CHECK(img.px[0] == 0);    // min maps to 0
    CHECK(img.px[3] == 255);  // max maps to 255
    CHECK(img.px[1] == 64);   // (0 - -1)/4 * 255 rounded
}

TEST_CASE("image export records its normalization range") {
    TempDir td;
    auto g = make_grid(8, 2.0);
    RealImage img{g, Eigen::VectorXd::LinSpaced(64, -2.0, 6.0), false};
    auto p = td.file("img.pgm");
    write_image_pgm_with_range(p, img);
    auto px = read_pgm(p);
    CHECK(px.width == 8);
    CHECK(px.height == 8);
    auto range = read_text(p + ".range.txt");
    CHECK(range.find(format_double(-2.0)) != std::string::npos);
    CHECK(range.find(format_double(6.0)) != std::string::npos);
}

TEST_CASE("doubles format with full roundtrip precision") {
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.1) == "0.10000000000000001");
    for (double v : {3.14159, 1.0 / 3.0, 6.02214076e23, -0.0625, -2.5e-300}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_CASE("fnv1a64 reference vectors") {
    CHECK(fnv1a64("", 0) == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a", 1) == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a64("foobar", 6) == 0x85944171f73967e8ull);
}

TEST_CASE("file hash equals buffer hash") {
    TempDir td;
    const std::string payload = "some\nbinary-ish\x01\x02 payload";
    write_text(td.file("h.bin"), payload);
    CHECK(fnv1a64_file(td.file("h.bin")) == fnv1a64(payload.data(), payload.size()));
    CHECK_THROWS_AS(fnv1a64_file(td.file("gone.bin")), io_error);
}

TEST_CASE("matrix csv roundtrip") {
    TempDir td;
    Eigen::MatrixXcd m(2, 3);
    m << cplx(1.0, -2.0), cplx(0.1, 0.0), cplx(-7.25, 1e-17), cplx(0, 0), cplx(3, 4),
        cplx(-1.0 / 3.0, 2.0 / 7.0);
    auto p = td.file("m.csv");
    write_matrix_csv(p, m, "test-basis");
    auto back = read_matrix_csv(p);
    REQUIRE(back.rows() == 2);
    REQUIRE(back.cols() == 3);
    CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
    CHECK(read_text(p).find("test-basis") != std::string::npos);
}

TEST_CASE("spectrum csv layout") {
    TempDir td;
    Eigen::VectorXd w(3);
    w << 0.5, 0.3, 0.2;
    auto p = td.file("s.csv");
    write_spectrum_csv(p, w);
    auto text = read_text(p);
    CHECK(text.rfind("index,weight\n", 0) == 0);
    CHECK(text.find("0,0.5\n") != std::string::npos);
    CHECK(text.find("2,0.20000000000000001\n") != std::string::npos);
}

TEST_CASE("manifest is sorted, self-excluding and deterministic") {
    TempDir td;
    write_text(td.file("zeta.txt"), "zz");
    fs::create_directories(td.p / "sub");
    write_text((td.p / "sub" / "alpha.bin").string(), "aa");
    write_manifest(td.p.string(), "tool 1.0", "deadbeef");
    auto first = read_text(td.file("MANIFEST.txt"));
    write_manifest(td.p.string(), "tool 1.0", "deadbeef");
    auto second = read_text(td.file("MANIFEST.txt"));
    CHECK(first == second);
    CHECK(first.find("tool 1.0") != std::string::npos);
    CHECK(first.find("deadbeef") != std::string::npos);
    auto pa = first.find("sub/alpha.bin"), pz = first.find("zeta.txt");
    REQUIRE(pa != std::string::npos);
    REQUIRE(pz != std::string::npos);
    CHECK(pa < pz);
    CHECK(first.find("MANIFEST.txt") == std::string::npos);
    const std::string line = "sub/alpha.bin\t2\tfnv1a:";
    CHECK(first.find(line) != std::string::npos);
}

}  // TEST_SUITE
