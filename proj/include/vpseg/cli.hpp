#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "vpseg/metrics.hpp"
#include "vpseg/trainer.hpp"

namespace vpseg {

// One JSON document with sections {data, solver, nets, train, eval}; every
// section and field optional, defaults materialized on load, unknown keys
// rejected.
struct ExperimentConfig {
  SynthConfig data;
  VPSTDConfig solver;
  SegNetConfig seg;
  RegNetConfig reg;
  TrainConfig train;
  int n_labeled = 8;
  int n_validation = 20;
  VolumeSource eval_source = VolumeSource::reg;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  std::string to_json_text() const;
  std::uint64_t hash() const;
};

std::string volume_source_name(VolumeSource s);
VolumeSource volume_source_from_name(const std::string& name);

// Command entry points. Each returns a process exit code and, on success,
// writes exactly one JSON summary line to `out`.
int run_gen_data(const std::string& config_path, const std::string& out_dir, std::ostream& out);

int run_pretrain_reg(const std::string& config_path, const std::string& data_dir,
                     const std::string& out_dir, std::ostream& out);

int run_train(const std::string& config_path, const std::string& data_dir,
              const std::optional<std::string>& variant, const std::optional<int>& n_labeled,
              const std::optional<std::uint64_t>& seed, const std::string& out_dir,
              std::ostream& out);

int run_eval(const std::string& checkpoint_dir, const std::string& data_dir,
             const std::string& volume_source, const std::string& out_dir, std::ostream& out);

int run_segment(const std::string& image_path, const std::string& volumes_csv,
                const std::string& config_path, const std::string& out_path,
                const std::optional<std::string>& trace_path, std::ostream& out);

int run_w1(const std::string& p_path, const std::string& q_path,
           const std::optional<std::string>& cost_path, std::ostream& out);

int run_gradcheck(const std::string& config_path, double rtol, std::ostream& out);

}  // namespace vpseg
