#include "vpseg/synthdata.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "vpseg/io.hpp"
#include "vpseg/rng.hpp"

namespace vpseg {

namespace {

double max_outer_semi_axis(const SynthConfig& c) {
  double total = 0.0;
  for (const auto& s : c.structures) total += s.ratio_hi;
  const double area = total * c.width * c.height;
  const double min_aspect = 0.65;
  return std::sqrt(area / (3.14159265358979323846 * min_aspect));
}

std::string index_name(const char* prefix, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%04d.%s", prefix, i, ext);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  require(width > 0 && height > 0, ErrorKind::invalid_argument, "synth dimensions must be positive");
  require(n_classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
  require(int(class_means.size()) == n_classes, ErrorKind::invalid_argument,
          "one intensity mean per class required");
  for (double m : class_means)
    require(m >= 0.0 && m <= 1.0, ErrorKind::invalid_argument, "class means must lie in [0,1]", m);
  require(noise_sigma >= 0.0, ErrorKind::invalid_argument, "noise sigma must be nonnegative");
  require(int(structures.size()) == n_classes - 1, ErrorKind::invalid_argument,
          "one structure spec per foreground class required");
  for (const auto& s : structures)
    require(0.0 < s.ratio_lo && s.ratio_lo <= s.ratio_hi && s.ratio_hi < 1.0,
            ErrorKind::invalid_argument, "bad structure ratio range");
  require(count >= 0, ErrorKind::invalid_argument, "count must be nonnegative");
  const double need = max_outer_semi_axis(*this);
  const double room = 0.5 * std::min(width, height) - 1.0;
  require(need <= room, ErrorKind::invalid_argument,
          "structures cannot fit: outer semi-axis exceeds the grid", need);
}

std::vector<SyntheticSample> generate(const SynthConfig& config) {
  config.validate();
  const int W = config.width, H = config.height, K = config.n_classes;
  const double N = double(W) * H;
  std::vector<SyntheticSample> out(config.count);

  for (int i = 0; i < config.count; ++i) {
    Rng rng = Rng::stream(config.seed, std::uint64_t(i));

    std::vector<double> ratios(K - 1);
    for (int s = 0; s < K - 1; ++s)
      ratios[s] = rng.uniform(config.structures[s].ratio_lo, config.structures[s].ratio_hi);

    const double aspect = rng.uniform(0.65, 1.0);
    const double phi = rng.uniform(0.0, 3.14159265358979323846);

    // structure s occupies the ellipse holding classes s+1..K-1
    std::vector<double> semi_a(K - 1), semi_b(K - 1);
    for (int s = 0; s < K - 1; ++s) {
      double cum = 0.0;
      for (int t = s; t < K - 1; ++t) cum += ratios[t];
      const double area = cum * N;
      semi_a[s] = std::sqrt(area / (3.14159265358979323846 * aspect));
      semi_b[s] = aspect * semi_a[s];
    }
    const double margin = semi_a[0] + 1.0;
    require(2.0 * margin < std::min(W, H), ErrorKind::invalid_argument,
            "structures cannot fit on the grid", margin);
    const double cx = rng.uniform(margin, W - 1 - margin);
    const double cy = rng.uniform(margin, H - 1 - margin);

    SyntheticSample& sample = out[i];
    sample.mask.width = W;
    sample.mask.height = H;
    sample.mask.labels.assign(std::size_t(W) * H, 0);
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double rx = dx * cphi + dy * sphi;
        const double ry = -dx * sphi + dy * cphi;
        int label = 0;
        for (int s = 0; s < K - 1; ++s) {
          const double ex = rx / semi_a[s], ey = ry / semi_b[s];
          if (ex * ex + ey * ey <= 1.0) label = s + 1;
        }
        sample.mask.labels[std::size_t(y) * W + x] = std::uint8_t(label);
      }

    sample.image.width = W;
    sample.image.height = H;
    sample.image.values.resize(std::size_t(W) * H);
    for (std::size_t n = 0; n < sample.image.values.size(); ++n) {
      double v = config.class_means[sample.mask.labels[n]];
      if (config.noise_sigma > 0.0) v += config.noise_sigma * rng.normal();
      v = std::clamp(v, 0.0, 1.0);
      sample.image.values[n] = std::round(v * 255.0) / 255.0;  // 8-bit grid
    }

    sample.volumes = mask_volumes(sample.mask, K);
  }
  return out;
}

namespace {

nlohmann::json config_to_json(const SynthConfig& c) {
  nlohmann::json structures = nlohmann::json::array();
  for (const auto& s : c.structures) structures.push_back({{"ratio_lo", s.ratio_lo}, {"ratio_hi", s.ratio_hi}});
  return nlohmann::json{{"width", c.width},
                        {"height", c.height},
                        {"classes", c.n_classes},
                        {"class_means", c.class_means},
                        {"noise_sigma", c.noise_sigma},
                        {"structures", structures},
                        {"count", c.count},
                        {"seed", c.seed}};
}

SynthConfig config_from_json(const nlohmann::json& j) {
  SynthConfig c;
  c.width = j.at("width").get<int>();
  c.height = j.at("height").get<int>();
  c.n_classes = j.at("classes").get<int>();
  c.class_means = j.at("class_means").get<std::vector<double>>();
  c.noise_sigma = j.at("noise_sigma").get<double>();
  c.structures.clear();
  for (const auto& js : j.at("structures"))
    c.structures.push_back({js.at("ratio_lo").get<double>(), js.at("ratio_hi").get<double>()});
  c.count = j.at("count").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_dataset(const std::vector<SyntheticSample>& samples, const SynthConfig& config,
                  const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "vpseg-dataset-v1";
  manifest["config"] = config_to_json(config);
  manifest["count"] = int(samples.size());
  write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");

  std::vector<std::string> header{"id"};
  const int K = samples.empty() ? config.n_classes : samples.front().volumes.n_classes();
  for (int k = 0; k < K; ++k) header.push_back("v_" + std::to_string(k));
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    write_pgm_image(samples[i].image, dir + "/" + index_name("img_", int(i), "pgm"));
    write_pgm_mask(samples[i].mask, dir + "/" + index_name("mask_", int(i), "pgm"));
    std::vector<double> row{double(i)};
    for (double v : samples[i].volumes.counts) row.push_back(v);
    rows.push_back(std::move(row));
  }
  write_csv(dir + "/volumes.csv", header, rows);
}

LoadedDataset load_dataset(const std::string& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    require(manifest.at("format").get<std::string>() == "vpseg-dataset-v1", ErrorKind::io,
            "unknown dataset format");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::io, "corrupt dataset manifest in " + dir + ": " + e.what());
  }
  LoadedDataset ds;
  ds.config = config_from_json(manifest.at("config"));
  const int count = manifest.at("count").get<int>();
  auto volume_rows = read_csv(dir + "/volumes.csv");
  require(int(volume_rows.size()) == count, ErrorKind::io, "volumes.csv row count mismatch");

  ds.samples.resize(count);
  for (int i = 0; i < count; ++i) {
    ds.samples[i].image = read_pgm_image(dir + "/" + index_name("img_", i, "pgm"));
    ds.samples[i].mask = read_pgm_mask(dir + "/" + index_name("mask_", i, "pgm"));
    const auto& row = volume_rows[i];
    require(int(row.size()) == ds.config.n_classes + 1, ErrorKind::io, "volumes.csv column mismatch");
    require(int(row[0]) == i, ErrorKind::io, "volumes.csv id mismatch");
    ds.samples[i].volumes.counts.assign(row.begin() + 1, row.end());
  }
  return ds;
}

}  // namespace vpseg
