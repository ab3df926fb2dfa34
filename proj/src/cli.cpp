#include "vpseg/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vpseg/io.hpp"
#include "vpseg/rng.hpp"
#include "vpseg/variational.hpp"

namespace vpseg {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    require(allowed.count(it.key()) > 0, ErrorKind::invalid_argument,
            "unknown config key '" + it.key() + "' in " + where);
}

template <typename T>
void read_field(const json& j, const char* key, T& target) {
  if (j.contains(key)) target = j.at(key).get<T>();
}

// Exclusive-creation lock file, removed on scope exit.
class DirLock {
public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
    std::filesystem::create_directories(dir);
    if (std::filesystem::exists(path_))
      throw Error(ErrorKind::state, "output directory is locked: " + dir);
    std::ofstream f(path_, std::ios::binary);
    require(bool(f), ErrorKind::io, "cannot create lock file in " + dir);
    f << "lock\n";
  }
  ~DirLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

private:
  std::string path_;
};

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

constexpr const char* kVersion = "0.1.0";

}  // namespace

std::string volume_source_name(VolumeSource s) {
  switch (s) {
    case VolumeSource::reg: return "reg";
    case VolumeSource::gt: return "gt";
    case VolumeSource::emp: return "emp";
  }
  return "reg";
}

VolumeSource volume_source_from_name(const std::string& name) {
  if (name == "reg") return VolumeSource::reg;
  if (name == "gt") return VolumeSource::gt;
  if (name == "emp") return VolumeSource::emp;
  throw Error(ErrorKind::invalid_argument, "unknown volume source: " + name);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::invalid_argument, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"data", "solver", "nets", "train", "eval"}, "config root");
  ExperimentConfig c;

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d,
               {"width", "height", "classes", "class_means", "noise_sigma", "structures", "count",
                "seed"},
               "data");
    read_field(d, "width", c.data.width);
    read_field(d, "height", c.data.height);
    read_field(d, "classes", c.data.n_classes);
    read_field(d, "class_means", c.data.class_means);
    read_field(d, "noise_sigma", c.data.noise_sigma);
    if (d.contains("structures")) {
      c.data.structures.clear();
      for (const auto& s : d.at("structures")) {
        check_keys(s, {"ratio_lo", "ratio_hi"}, "data.structures");
        c.data.structures.push_back({s.at("ratio_lo").get<double>(), s.at("ratio_hi").get<double>()});
      }
    }
    read_field(d, "count", c.data.count);
    read_field(d, "seed", c.data.seed);
  }

  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s, {"epsilon", "lambda", "sigma", "radius", "sinkhorn_tol", "sinkhorn_max_iter",
                   "td_iters"},
               "solver");
    read_field(s, "epsilon", c.solver.epsilon);
    read_field(s, "lambda", c.solver.lambda);
    double sigma = c.solver.kernel.sigma;
    read_field(s, "sigma", sigma);
    c.solver.kernel = make_kernel(sigma);
    read_field(s, "radius", c.solver.kernel.radius);
    read_field(s, "sinkhorn_tol", c.solver.sinkhorn_tol);
    read_field(s, "sinkhorn_max_iter", c.solver.sinkhorn_max_iter);
    read_field(s, "td_iters", c.solver.td_iters);
  }

  if (j.contains("nets")) {
    const json& n = j.at("nets");
    check_keys(n, {"seg_c1", "seg_c2", "reg_c1", "reg_c2"}, "nets");
    read_field(n, "seg_c1", c.seg.c1);
    read_field(n, "seg_c2", c.seg.c2);
    read_field(n, "reg_c1", c.reg.c1);
    read_field(n, "reg_c2", c.reg.c2);
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t,
               {"epochs", "batch_size", "lr", "plateau_patience", "lr_decay",
                "critic_steps_per_seg_step", "seed", "variant", "alpha", "beta", "critic_clip",
                "critic_lr", "n_labeled", "n_validation", "reg_pretrain_epochs", "reg_pretrain_lr"},
               "train");
    read_field(t, "epochs", c.train.epochs);
    read_field(t, "batch_size", c.train.batch_size);
    read_field(t, "lr", c.train.lr);
    read_field(t, "plateau_patience", c.train.plateau_patience);
    read_field(t, "lr_decay", c.train.lr_decay);
    read_field(t, "critic_steps_per_seg_step", c.train.critic_steps_per_seg_step);
    read_field(t, "seed", c.train.seed);
    if (t.contains("variant")) c.train.variant = variant_from_name(t.at("variant").get<std::string>());
    read_field(t, "alpha", c.train.weights.alpha);
    read_field(t, "beta", c.train.weights.beta);
    read_field(t, "critic_clip", c.train.critic_clip);
    read_field(t, "critic_lr", c.train.critic_lr);
    read_field(t, "n_labeled", c.n_labeled);
    read_field(t, "n_validation", c.n_validation);
    read_field(t, "reg_pretrain_epochs", c.train.reg_pretrain_epochs);
    read_field(t, "reg_pretrain_lr", c.train.reg_pretrain_lr);
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, {"volume_source"}, "eval");
    if (e.contains("volume_source"))
      c.eval_source = volume_source_from_name(e.at("volume_source").get<std::string>());
  }

  // derived wiring: class counts and solver/net configs flow into train
  c.seg.n_classes = c.data.n_classes;
  c.reg.n_classes = c.data.n_classes;
  c.train.solver = c.solver;
  c.train.seg = c.seg;
  c.train.reg = c.reg;
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_json_text(read_text_file(path));
}

std::string ExperimentConfig::to_json_text() const {
  json structures = json::array();
  for (const auto& s : data.structures)
    structures.push_back({{"ratio_lo", s.ratio_lo}, {"ratio_hi", s.ratio_hi}});
  json j;
  j["data"] = {{"width", data.width},
               {"height", data.height},
               {"classes", data.n_classes},
               {"class_means", data.class_means},
               {"noise_sigma", data.noise_sigma},
               {"structures", structures},
               {"count", data.count},
               {"seed", data.seed}};
  j["solver"] = {{"epsilon", solver.epsilon},
                 {"lambda", solver.lambda},
                 {"sigma", solver.kernel.sigma},
                 {"radius", solver.kernel.radius},
                 {"sinkhorn_tol", solver.sinkhorn_tol},
                 {"sinkhorn_max_iter", solver.sinkhorn_max_iter},
                 {"td_iters", solver.td_iters}};
  j["nets"] = {{"seg_c1", seg.c1}, {"seg_c2", seg.c2}, {"reg_c1", reg.c1}, {"reg_c2", reg.c2}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"lr", train.lr},
                {"plateau_patience", train.plateau_patience},
                {"lr_decay", train.lr_decay},
                {"critic_steps_per_seg_step", train.critic_steps_per_seg_step},
                {"seed", train.seed},
                {"variant", variant_name(train.variant)},
                {"alpha", train.weights.alpha},
                {"beta", train.weights.beta},
                {"critic_clip", train.critic_clip},
                {"critic_lr", train.critic_lr},
                {"n_labeled", n_labeled},
                {"n_validation", n_validation},
                {"reg_pretrain_epochs", train.reg_pretrain_epochs},
                {"reg_pretrain_lr", train.reg_pretrain_lr}};
  j["eval"] = {{"volume_source", volume_source_name(eval_source)}};
  return j.dump(2) + "\n";
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json_text()); }

int run_gen_data(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  DirLock lock(out_dir);
  std::vector<SyntheticSample> samples = generate(cfg.data);
  save_dataset(samples, cfg.data, out_dir);
  json summary{{"command", "gen-data"}, {"count", int(samples.size())}, {"dir", out_dir},
               {"config_hash", cfg.hash()}};
  out << summary.dump() << "\n";
  return 0;
}

namespace {

void save_critic(const LinearCritic& critic, const std::string& path) {
  json j{{"weights", critic.weights}, {"bias", critic.bias}, {"clip", critic.clip}};
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

int run_pretrain_reg(const std::string& config_path, const std::string& data_dir,
                     const std::string& out_dir, std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  DirLock lock(out_dir);
  LoadedDataset ds = load_dataset(data_dir);
  Split split = split_dataset(ds.samples, cfg.n_labeled, cfg.n_validation, cfg.train.seed);

  RegNetParams reg = init_reg_net(cfg.reg, Rng::stream(cfg.train.seed, 2).next_u64());
  std::vector<double> trace;
  reg = pretrain_regression(reg, split.labeled, cfg.train.reg_pretrain_epochs,
                            cfg.train.reg_pretrain_lr, &trace);
  save_params(reg.params, out_dir + "/reg.f32");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < trace.size(); ++i) rows.push_back({double(i), trace[i]});
  write_csv(out_dir + "/pretrain_loss.csv", {"epoch", "loss"}, rows);

  json summary{{"command", "pretrain-reg"},
               {"epochs", cfg.train.reg_pretrain_epochs},
               {"final_loss", trace.back()},
               {"dir", out_dir},
               {"config_hash", cfg.hash()}};
  out << summary.dump() << "\n";
  return 0;
}

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::optional<std::string>& variant, const std::optional<int>& n_labeled,
              const std::optional<std::uint64_t>& seed, const std::string& out_dir,
              std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (variant) cfg.train.variant = variant_from_name(*variant);
  if (n_labeled) cfg.n_labeled = *n_labeled;
  if (seed) cfg.train.seed = *seed;

  DirLock lock(out_dir);
  LoadedDataset ds = load_dataset(data_dir);
  Split split = split_dataset(ds.samples, cfg.n_labeled, cfg.n_validation, cfg.train.seed);
  TrainResult result = train(cfg.train, split);
  require(!result.aborted, ErrorKind::state, "training aborted: " + result.abort_reason);

  const bool gt_variant = cfg.train.variant == Variant::vpnet_gt;
  require(gt_variant || split.hidden_label_reads() == 0, ErrorKind::state,
          "hidden labels were read on a non-gt training path",
          double(split.hidden_label_reads()));

  save_params(result.seg.params, out_dir + "/seg.f32");
  save_params(result.reg.params, out_dir + "/reg.f32");
  save_critic(result.critic, out_dir + "/critic.json");
  write_history_csv(result.history, out_dir + "/history.csv");
  write_text_file(out_dir + "/config_resolved.json", cfg.to_json_text());
  json manifest{{"command", "train"},
                {"config_hash", cfg.hash()},
                {"seed", cfg.train.seed},
                {"variant", variant_name(cfg.train.variant)},
                {"n_labeled", cfg.n_labeled},
                {"n_validation", cfg.n_validation},
                {"best_epoch", result.best_epoch},
                {"best_val_dice", result.best_val_dice},
                {"hidden_label_reads", split.hidden_label_reads()},
                {"version", kVersion}};
  write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");

  json summary{{"command", "train"},
               {"variant", variant_name(cfg.train.variant)},
               {"best_epoch", result.best_epoch},
               {"best_val_dice", result.best_val_dice},
               {"hidden_label_reads", split.hidden_label_reads()},
               {"dir", out_dir}};
  out << summary.dump() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint_dir, const std::string& data_dir,
             const std::string& volume_source, const std::string& out_dir, std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(checkpoint_dir + "/config_resolved.json");
  DirLock lock(out_dir);
  LoadedDataset ds = load_dataset(data_dir);
  Split split = split_dataset(ds.samples, cfg.n_labeled, cfg.n_validation, cfg.train.seed);

  SegNetParams seg;
  seg.cfg = cfg.seg;
  seg.params = load_params(checkpoint_dir + "/seg.f32");
  RegNetParams reg;
  reg.cfg = cfg.reg;
  reg.params = load_params(checkpoint_dir + "/reg.f32");

  std::vector<VolumeVector> labeled_volumes;
  for (const auto& s : split.labeled) labeled_volumes.push_back(s.volumes);
  VolumeVector v_emp = compute_v_emp(labeled_volumes);

  VolumeSource source = volume_source_from_name(volume_source);
  MetricsReport report = evaluate(seg, &reg, cfg.solver, split.validation, source, &v_emp);
  write_metrics_csv(report, out_dir + "/metrics.csv");

  json summary{{"command", "eval"},
               {"volume_source", volume_source},
               {"mean_dice", report.mean_foreground.dice},
               {"mean_jaccard", report.mean_foreground.jaccard},
               {"mean_asd", report.mean_foreground.asd},
               {"mean_hd95", report.mean_foreground.hd95},
               {"dir", out_dir}};
  out << summary.dump() << "\n";
  return 0;
}

int run_segment(const std::string& image_path, const std::string& volumes_csv,
                const std::string& config_path, const std::string& out_path,
                const std::optional<std::string>& trace_path, std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  Image img = read_pgm_image(image_path);

  VolumeVector v;
  std::stringstream ss(volumes_csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) v.counts.push_back(std::stod(cell));
  v.validate_as_target(img.n_pixels(), 1e-6);

  RegionStats stats = init_means_from_quantiles(img, int(v.counts.size()));
  VariationalResult result = segment_variational(img, v, stats, cfg.solver);
  write_pgm_mask(result.mask, out_path);

  if (trace_path) {
    Logits o = chan_vese_costs(img, result.stats);
    SinkhornTrace strace;
    entropic_volume_projection(o, v, cfg.solver, &strace);
    std::vector<double> energies;
    td_regularized_solve(o, v, cfg.solver, nullptr, &energies);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < strace.residuals.size(); ++i)
      rows.push_back({0.0, double(i), strace.residuals[i], strace.dual_objectives[i]});
    for (std::size_t i = 0; i < energies.size(); ++i)
      rows.push_back({1.0, double(i), energies[i], 0.0});
    write_csv(*trace_path, {"phase", "iter", "value", "aux"}, rows);
  }

  VolumeVector got = mask_volumes(result.mask, int(v.counts.size()));
  json summary{{"command", "segment"},
               {"out", out_path},
               {"outer_iters", result.outer_iters_run},
               {"mask_volumes", got.counts},
               {"warnings", result.warnings}};
  out << summary.dump() << "\n";
  return 0;
}

int run_w1(const std::string& p_path, const std::string& q_path,
           const std::optional<std::string>& cost_path, std::ostream& out) {
  auto read_dist = [](const std::string& path) {
    auto rows = read_csv(path);
    require(!rows.empty(), ErrorKind::io, "empty distribution file: " + path);
    CategoricalDistribution d;
    d.p = rows.front();
    return d;
  };
  CategoricalDistribution p = read_dist(p_path);
  CategoricalDistribution q = read_dist(q_path);
  double value;
  if (cost_path) {
    auto rows = read_csv(*cost_path);
    std::vector<double> cost;
    for (const auto& r : rows) cost.insert(cost.end(), r.begin(), r.end());
    value = w1_lp_oracle(p, q, cost);
  } else {
    value = w1_categorical(p, q);
  }
  out << format_double(value) << "\n";
  json summary{{"command", "w1"}, {"value", value}};
  out << summary.dump() << "\n";
  return 0;
}

int run_gradcheck(const std::string& config_path, double rtol, std::ostream& out) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);

  // fixed small instance: an 8x8 two-class phantom
  SynthConfig synth;
  synth.width = 8;
  synth.height = 8;
  synth.n_classes = 2;
  synth.class_means = {0.3, 0.8};
  synth.noise_sigma = 0.05;
  synth.structures = {{0.10, 0.20}};
  synth.count = 1;
  synth.seed = 99;
  SyntheticSample sample = generate(synth).front();

  VPSTDConfig solver = cfg.solver;
  solver.sinkhorn_tol = 1e-10;  // keeps the iteration count stable under FD probes
  solver.td_iters = 2;

  SegNetConfig seg_cfg;
  seg_cfg.n_classes = 2;
  seg_cfg.c1 = cfg.seg.c1;
  seg_cfg.c2 = cfg.seg.c2;
  SegNetParams seg = init_seg_net(seg_cfg, 1234);

  auto seg_loss = [&](const std::vector<double>& theta) {
    SegNetParams net = seg;
    net.params.data = theta;
    SoftSegmentation h = seg_forward(net, sample.image, sample.volumes, solver);
    return supervised_loss(h, sample.mask);
  };
  std::vector<double> seg_grad;
  {
    SegTape tape;
    SoftSegmentation h = seg_forward(seg, sample.image, sample.volumes, solver, &tape);
    std::vector<double> gh = supervised_loss_grad(h, sample.mask);
    seg_grad = seg_backward(seg, tape, gh);
  }
  GradReport seg_report = grad_check(seg_loss, seg_grad, seg.params, rtol);

  RegNetConfig reg_cfg;
  reg_cfg.n_classes = 2;
  reg_cfg.c1 = cfg.reg.c1;
  reg_cfg.c2 = cfg.reg.c2;
  RegNetParams reg = init_reg_net(reg_cfg, 4321);
  auto reg_loss = [&](const std::vector<double>& theta) {
    RegNetParams net = reg;
    net.params.data = theta;
    return regression_loss(reg_forward(net, sample.image), sample.volumes);
  };
  std::vector<double> reg_grad;
  {
    RegTape tape;
    VolumeVector pred = reg_forward(reg, sample.image, &tape);
    std::vector<double> gv(pred.n_classes());
    for (int k = 0; k < pred.n_classes(); ++k) gv[k] = 2.0 * (pred.counts[k] - sample.volumes.counts[k]);
    reg_grad = reg_backward(reg, tape, gv);
  }
  GradReport reg_report = grad_check(reg_loss, reg_grad, reg.params, rtol);

  char line[160];
  out << "model  slice         max_rel_err  pass\n";
  for (const auto& model : {std::make_pair("seg", &seg_report), std::make_pair("reg", &reg_report)})
    for (const auto& s : model.second->slices) {
      std::snprintf(line, sizeof(line), "%-6s %-13s %-12.3e %s\n", model.first, s.slice.c_str(),
                    s.max_rel_err, s.max_rel_err <= rtol ? "ok" : "FAIL");
      out << line;
    }
  const bool pass = seg_report.pass && reg_report.pass;
  json summary{{"command", "gradcheck"},
               {"rtol", rtol},
               {"seg_worst", seg_report.worst()},
               {"reg_worst", reg_report.worst()},
               {"pass", pass}};
  out << summary.dump() << "\n";
  return pass ? 0 : 1;
}

}  // namespace vpseg
