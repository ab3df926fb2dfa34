#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "vpseg/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Volume-prior semi-supervised segmentation toolkit"};
  app.require_subcommand(1);

  std::string config, out, data, image, volumes, checkpoint, volume_source = "reg";
  std::string p_file, q_file;
  std::string variant;
  std::string cost_file, trace_file;
  int n_labeled = -1;
  double rtol = 1e-3;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen->add_option("--config", config)->required();
  gen->add_option("--out", out)->required();

  auto* pre = app.add_subcommand("pretrain-reg", "Pretrain the volume regressor");
  pre->add_option("--config", config)->required();
  pre->add_option("--data", data)->required();
  pre->add_option("--out", out)->required();

  auto* tr = app.add_subcommand("train", "Run the alternating semi-supervised trainer");
  tr->add_option("--config", config)->required();
  tr->add_option("--data", data)->required();
  tr->add_option("--variant", variant)->check(CLI::IsMember({"vpnet", "vpnet_gt", "vpnet_rw", "vpnet_emp"}));
  tr->add_option("--n-labeled", n_labeled);
  tr->add_option("--seed", seed)->each([&](const std::string&) { seed_given = true; });
  tr->add_option("--out", out)->required();

  auto* ev = app.add_subcommand("eval", "Evaluate a trained checkpoint");
  ev->add_option("--checkpoint", checkpoint)->required();
  ev->add_option("--data", data)->required();
  ev->add_option("--volume-source", volume_source)->check(CLI::IsMember({"reg", "gt", "emp"}));
  ev->add_option("--out", out)->required();

  auto* sg = app.add_subcommand("segment", "Variational segmentation of one image");
  sg->add_option("--image", image)->required();
  sg->add_option("--volumes", volumes)->required();
  sg->add_option("--config", config)->required();
  sg->add_option("--out", out)->required();
  sg->add_option("--trace", trace_file);

  auto* w1 = app.add_subcommand("w1", "Wasserstein-1 distance between CSV distributions");
  w1->add_option("--p", p_file)->required();
  w1->add_option("--q", q_file)->required();
  w1->add_option("--cost", cost_file);

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc->add_option("--config", config)->required();
  gc->add_option("--rtol", rtol);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return vpseg::run_gen_data(config, out, std::cout);
    if (pre->parsed()) return vpseg::run_pretrain_reg(config, data, out, std::cout);
    if (tr->parsed())
      return vpseg::run_train(config, data,
                              variant.empty() ? std::nullopt : std::optional<std::string>(variant),
                              n_labeled < 0 ? std::nullopt : std::optional<int>(n_labeled),
                              seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt, out,
                              std::cout);
    if (ev->parsed()) return vpseg::run_eval(checkpoint, data, volume_source, out, std::cout);
    if (sg->parsed())
      return vpseg::run_segment(image, volumes, config, out,
                                trace_file.empty() ? std::nullopt
                                                   : std::optional<std::string>(trace_file),
                                std::cout);
    if (w1->parsed())
      return vpseg::run_w1(p_file, q_file,
                           cost_file.empty() ? std::nullopt : std::optional<std::string>(cost_file),
                           std::cout);
    if (gc->parsed()) return vpseg::run_gradcheck(config, rtol, std::cout);
  } catch (const vpseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
