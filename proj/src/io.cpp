#include "vpseg/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vpseg {

namespace {

int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(char(c));
    c = in.get();
  }
  return tok.empty() ? EOF : 0;
}

struct PgmRaw {
  int width = 0, height = 0, maxval = 0;
  std::vector<std::uint16_t> pixels;
};

PgmRaw read_pgm_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open " + path);
  std::string tok;
  require(pgm_next_token(in, tok) == 0 && tok == "P5", ErrorKind::io, "not a binary PGM: " + path);
  PgmRaw r;
  require(pgm_next_token(in, tok) == 0, ErrorKind::io, "truncated PGM header: " + path);
  r.width = std::stoi(tok);
  require(pgm_next_token(in, tok) == 0, ErrorKind::io, "truncated PGM header: " + path);
  r.height = std::stoi(tok);
  require(pgm_next_token(in, tok) == 0, ErrorKind::io, "truncated PGM header: " + path);
  r.maxval = std::stoi(tok);
  require(r.width > 0 && r.height > 0, ErrorKind::io, "bad PGM dimensions: " + path);
  require(r.maxval == 255 || r.maxval == 65535, ErrorKind::io, "unsupported PGM maxval: " + path);
  // header tokenizer already consumed the single whitespace after maxval
  const std::size_t n = std::size_t(r.width) * r.height;
  r.pixels.resize(n);
  if (r.maxval == 255) {
    std::vector<std::uint8_t> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n));
    require(std::size_t(in.gcount()) == n, ErrorKind::io, "truncated PGM body: " + path);
    for (std::size_t i = 0; i < n; ++i) r.pixels[i] = buf[i];
  } else {
    std::vector<std::uint8_t> buf(2 * n);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(2 * n));
    require(std::size_t(in.gcount()) == 2 * n, ErrorKind::io, "truncated PGM body: " + path);
    for (std::size_t i = 0; i < n; ++i)
      r.pixels[i] = std::uint16_t((buf[2 * i] << 8) | buf[2 * i + 1]);  // big-endian per spec
  }
  return r;
}

void write_pgm_raw(const std::string& path, int width, int height, int maxval,
                   const std::vector<std::uint16_t>& pixels) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot write " + path);
  out << "P5\n" << width << " " << height << "\n" << maxval << "\n";
  const std::size_t n = pixels.size();
  if (maxval == 255) {
    std::vector<std::uint8_t> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = std::uint8_t(pixels[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(n));
  } else {
    std::vector<std::uint8_t> buf(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      buf[2 * i] = std::uint8_t(pixels[i] >> 8);
      buf[2 * i + 1] = std::uint8_t(pixels[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(2 * n));
  }
  require(bool(out), ErrorKind::io, "write failed: " + path);
}

}  // namespace

Image read_pgm_image(const std::string& path) {
  PgmRaw r = read_pgm_raw(path);
  Image img;
  img.width = r.width;
  img.height = r.height;
  img.values.resize(r.pixels.size());
  for (std::size_t i = 0; i < r.pixels.size(); ++i) img.values[i] = double(r.pixels[i]) / r.maxval;
  return img;
}

void write_pgm_image(const Image& img, const std::string& path, int bits) {
  img.validate();
  require(bits == 8 || bits == 16, ErrorKind::invalid_argument, "PGM depth must be 8 or 16");
  const int maxval = bits == 8 ? 255 : 65535;
  std::vector<std::uint16_t> px(img.values.size());
  for (std::size_t i = 0; i < img.values.size(); ++i)
    px[i] = std::uint16_t(std::lround(img.values[i] * maxval));
  write_pgm_raw(path, img.width, img.height, maxval, px);
}

HardMask read_pgm_mask(const std::string& path) {
  PgmRaw r = read_pgm_raw(path);
  require(r.maxval == 255, ErrorKind::io, "masks must be 8-bit PGM: " + path);
  HardMask m;
  m.width = r.width;
  m.height = r.height;
  m.labels.resize(r.pixels.size());
  for (std::size_t i = 0; i < r.pixels.size(); ++i) m.labels[i] = std::uint8_t(r.pixels[i]);
  return m;
}

void write_pgm_mask(const HardMask& mask, const std::string& path) {
  std::vector<std::uint16_t> px(mask.labels.begin(), mask.labels.end());
  write_pgm_raw(path, mask.width, mask.height, 255, px);
}

void write_soft_segmentation(const SoftSegmentation& h, const std::string& path) {
  h.validate();
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot write " + path);
  std::vector<float> buf(h.probs.begin(), h.probs.end());
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size() * 4));
  require(bool(out), ErrorKind::io, "write failed: " + path);
  nlohmann::json side{{"width", h.width}, {"height", h.height}, {"classes", h.n_classes}};
  write_text_file(path + ".json", side.dump() + "\n");
}

SoftSegmentation read_soft_segmentation(const std::string& path) {
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text_file(path + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, "bad sidecar for " + path + ": " + e.what());
  }
  SoftSegmentation h;
  h.width = side.at("width").get<int>();
  h.height = side.at("height").get<int>();
  h.n_classes = side.at("classes").get<int>();
  const std::size_t n = std::size_t(h.n_pixels()) * h.n_classes;
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open " + path);
  std::vector<float> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(n * 4));
  require(std::size_t(in.gcount()) == n * 4, ErrorKind::io, "truncated segmentation file: " + path);
  h.probs.assign(buf.begin(), buf.end());
  return h;
}

std::string format_double(double v) {
  char buf[64];
  // shortest representation that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
    out << "\n";
  }
  require(bool(out), ErrorKind::io, "write failed: " + path);
}

std::vector<std::vector<double>> read_csv(const std::string& path, std::vector<std::string>* header) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (first) {
      first = false;
      // header row is any line whose first cell is not numeric
      char* end = nullptr;
      std::strtod(line.c_str(), &end);
      bool numeric = end != line.c_str() && (*end == ',' || *end == '\0');
      if (!numeric) {
        while (std::getline(ss, cell, ','))
          if (header) header->push_back(cell);
        continue;
      }
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      require(end != cell.c_str(), ErrorKind::io, "non-numeric CSV cell in " + path);
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::io, "cannot write " + path);
  out << content;
  require(bool(out), ErrorKind::io, "write failed: " + path);
}

}  // namespace vpseg
