#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "qdi/grid.hpp"
#include "qdi/imaging.hpp"

namespace qdi {

// Binary field container: 16-byte header (ASCII "QDIFFCF1", u32 n, u32
// space tag, little endian), then row-major f64 data. Tags 0 (real) and 1
// (momentum) carry n^2 (re, im) pairs; tag 2 (real_image) carries n^2
// signed singles. The grid half extent travels in the sidecar text written
// next to pipeline artifacts, not in the header.
inline constexpr uint32_t kSpaceTagRealImage = 2;

void write_field(const std::string& path, const ComplexField& f);
ComplexField read_field(const std::string& path, double half_extent);

void write_real_image(const std::string& path, const RealImage& img);
RealImage read_real_image(const std::string& path, double half_extent);

struct PgmImage {
    int width = 0, height = 0, maxval = 0;
    std::vector<uint16_t> px;  // row-major
};
PgmImage read_pgm(const std::string& path);
void write_pgm8(const std::string& path, const Eigen::ArrayXXd& values);

// 8-bit magnitude export is min-max normalized; the normalization range is
// recorded in "<path>.range.txt".
void write_image_pgm_with_range(const std::string& path, const RealImage& img);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

// CSV helpers; floats formatted "%.17g" so reruns are byte-identical.
std::string format_double(double v);
void write_spectrum_csv(const std::string& path, const Eigen::VectorXd& weights);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXcd& m,
                      const std::string& basis_note);
Eigen::MatrixXcd read_matrix_csv(const std::string& path);

// FNV-1a 64-bit, non-cryptographic, for manifest integrity lines.
uint64_t fnv1a64(const void* data, size_t bytes);
uint64_t fnv1a64_file(const std::string& path);

// Manifest: header lines, then one sorted "path<TAB>bytes<TAB>fnv1a:<hex>"
// row per file under root (manifest itself excluded).
void write_manifest(const std::string& root, const std::string& tool_version,
                    const std::string& config_echo_hash);

}  // namespace qdi
