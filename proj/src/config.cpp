#include "zonescan/config.hpp"

#include <fstream>
#include <functional>

#include "zonescan/error.hpp"
#include "zonescan/util.hpp"

namespace zonescan {

void PipelineConfig::fill_path_defaults() {
  auto fill = [this](std::string& field, const char* leaf) {
    if (field.empty()) field = path_join(work_dir, leaf);
  };
  fill(volumes_dir, "volumes");
  fill(threat_table, "threats.csv");
  fill(masks_dir, "masks");
  fill(zones_dir, "zones");
  fill(dataset_dir, "dataset");
  fill(model_dir, "model");
  fill(reports_dir, "reports");
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);

  PipelineConfig cfg;

  auto set_bool = [](bool& field) {
    return [&field](const std::string& v) {
      const std::string s = lowercase(trim(v));
      if (s == "true" || s == "1" || s == "yes")
        field = true;
      else if (s == "false" || s == "0" || s == "no")
        field = false;
      else
        throw ConfigError("expected a boolean, got '" + v + "'");
    };
  };
  auto set_int = [](int& field) {
    return [&field](const std::string& v) { field = parse_int(v, "config"); };
  };
  auto set_u64 = [](std::uint64_t& field) {
    return [&field](const std::string& v) {
      field = std::uint64_t(std::stoull(trim(v)));
    };
  };
  auto set_double = [](double& field) {
    return [&field](const std::string& v) { field = parse_double(v, "config"); };
  };
  auto set_string = [](std::string& field) {
    return [&field](const std::string& v) { field = trim(v); };
  };

  const std::map<std::string, std::function<void(const std::string&)>> keys = {
      {"work_dir", set_string(cfg.work_dir)},
      {"volumes_dir", set_string(cfg.volumes_dir)},
      {"threat_table", set_string(cfg.threat_table)},
      {"masks_dir", set_string(cfg.masks_dir)},
      {"zones_dir", set_string(cfg.zones_dir)},
      {"dataset_dir", set_string(cfg.dataset_dir)},
      {"model_dir", set_string(cfg.model_dir)},
      {"reports_dir", set_string(cfg.reports_dir)},
      {"zone_table", set_string(cfg.zone_table)},
      {"bodies", set_int(cfg.bodies)},
      {"threats", set_int(cfg.threats)},
      {"synth_seed", set_u64(cfg.synth_seed)},
      {"nx", set_int(cfg.nx)},
      {"ny", set_int(cfg.ny)},
      {"nz", set_int(cfg.nz)},
      {"height_voxels", set_int(cfg.height_voxels)},
      {"torso_radius", set_int(cfg.torso_radius)},
      {"limb_radius", set_int(cfg.limb_radius)},
      {"noise_sigma", set_double(cfg.noise_sigma)},
      {"threat_boost", set_double(cfg.threat_boost)},
      {"sigma", set_double(cfg.sigma)},
      {"sauvola_window", set_int(cfg.sauvola_window)},
      {"sauvola_k", set_double(cfg.sauvola_k)},
      {"sauvola_r", set_double(cfg.sauvola_r)},
      {"dilation_radius", set_int(cfg.dilation_radius)},
      {"min_area", set_int(cfg.min_area)},
      {"ratio_train", set_double(cfg.ratio_train)},
      {"ratio_val", set_double(cfg.ratio_val)},
      {"ratio_test", set_double(cfg.ratio_test)},
      {"split_seed", set_u64(cfg.split_seed)},
      {"epochs", set_int(cfg.epochs)},
      {"batch_size", set_int(cfg.batch_size)},
      {"lr", set_double(cfg.lr)},
      {"momentum", set_double(cfg.momentum)},
      {"train_seed", set_u64(cfg.train_seed)},
      {"augment_flip", set_bool(cfg.augment_flip)},
      {"augment_contrast", set_bool(cfg.augment_contrast)},
      {"contrast_factor", set_double(cfg.contrast_factor)},
      {"dropout", set_bool(cfg.dropout)},
      {"dropout_rate", set_double(cfg.dropout_rate)},
      {"threads", set_int(cfg.threads)},
  };

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = line;
    const auto hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("expected key=value at line " + std::to_string(lineno) +
                        " of " + path);
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end())
      throw ConfigError("unknown config key '" + key + "' at line " +
                        std::to_string(lineno) + " of " + path);
    try {
      it->second(value);
    } catch (const Error&) {
      throw ConfigError("bad value for '" + key + "' at line " +
                        std::to_string(lineno) + " of " + path);
    }
  }
  return cfg;
}

}  // namespace zonescan
