#pragma once

#include <string>
#include <vector>

#include "vpseg/field.hpp"

namespace vpseg {

// Binary PGM (P5), maxval 255 or 65535; gray values map linearly to [0,1].
Image read_pgm_image(const std::string& path);
void write_pgm_image(const Image& img, const std::string& path, int bits = 8);

// Masks are 8-bit P5 files holding raw class indices.
HardMask read_pgm_mask(const std::string& path);
void write_pgm_mask(const HardMask& mask, const std::string& path);

// Raw little-endian float32, N x K row-major, with a JSON sidecar
// {"width":..,"height":..,"classes":..} at <path>.json.
void write_soft_segmentation(const SoftSegmentation& h, const std::string& path);
SoftSegmentation read_soft_segmentation(const std::string& path);

// Minimal CSV helpers (numeric cells, '.'-decimal, no quoting).
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_csv(const std::string& path, std::vector<std::string>* header = nullptr);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Shortest decimal round-trip formatting, used everywhere a double is
// serialized so artifacts are byte-stable.
std::string format_double(double v);

}  // namespace vpseg
