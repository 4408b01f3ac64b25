// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The ssmflow Authors

#include "pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace ssmflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(key, trim(item)));
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma-separated list");
  return out;
}

std::string fmt_double(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt_double(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "levels", "iters", "points", "channels", "motion_channels", "k", "update", "blocks", "state_size",
      "expand", "conv_width", "seed", "loss_weights", "lr", "lr_min", "beta1", "beta2", "adam_eps",
      "weight_decay", "steps", "batch", "zero_out_proj", "zero_flow_head"};
  return keys;
}

void apply_setting(NetworkConfig& c, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in), v = trim(value_in);
  if (key == "levels") c.levels = to_size(key, v);
  else if (key == "iters") c.iterations = to_size(key, v);
  else if (key == "points") c.points = to_list<std::size_t>(key, v, to_size);
  else if (key == "channels") c.channels = to_size(key, v);
  else if (key == "motion_channels") c.motion_channels = to_size(key, v);
  else if (key == "k") c.k = to_size(key, v);
  else if (key == "update") c.update = isu::parse_update(v);
  else if (key == "blocks") c.blocks = to_size(key, v);
  else if (key == "state_size") c.state_size = to_size(key, v);
  else if (key == "expand") c.expand = to_size(key, v);
  else if (key == "conv_width") c.conv_width = to_size(key, v);
  else if (key == "seed") c.seed = to_size(key, v);
  else if (key == "loss_weights") c.loss_weights = to_list<double>(key, v, to_double);
  else if (key == "lr") c.lr = to_double(key, v);
  else if (key == "lr_min") c.lr_min = to_double(key, v);
  else if (key == "beta1") c.beta1 = to_double(key, v);
  else if (key == "beta2") c.beta2 = to_double(key, v);
  else if (key == "adam_eps") c.adam_eps = to_double(key, v);
  else if (key == "weight_decay") c.weight_decay = to_double(key, v);
  else if (key == "steps") c.steps = to_size(key, v);
  else if (key == "batch") c.batch = to_size(key, v);
  else if (key == "zero_out_proj") c.zero_out_proj = to_bool(key, v);
  else if (key == "zero_flow_head") c.zero_flow_head = to_bool(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

std::string get_setting(const NetworkConfig& c, const std::string& key) {
  if (key == "levels") return std::to_string(c.levels);
  if (key == "iters") return std::to_string(c.iterations);
  if (key == "points") return join(c.points);
  if (key == "channels") return std::to_string(c.channels);
  if (key == "motion_channels") return std::to_string(c.motion_channels);
  if (key == "k") return std::to_string(c.k);
  if (key == "update") return isu::to_string(c.update);
  if (key == "blocks") return std::to_string(c.blocks);
  if (key == "state_size") return std::to_string(c.state_size);
  if (key == "expand") return std::to_string(c.expand);
  if (key == "conv_width") return std::to_string(c.conv_width);
  if (key == "seed") return std::to_string(c.seed);
  if (key == "loss_weights") return join(c.loss_weights);
  if (key == "lr") return fmt_double(c.lr);
  if (key == "lr_min") return fmt_double(c.lr_min);
  if (key == "beta1") return fmt_double(c.beta1);
  if (key == "beta2") return fmt_double(c.beta2);
  if (key == "adam_eps") return fmt_double(c.adam_eps);
  if (key == "weight_decay") return fmt_double(c.weight_decay);
  if (key == "steps") return std::to_string(c.steps);
  if (key == "batch") return std::to_string(c.batch);
  if (key == "zero_out_proj") return c.zero_out_proj ? "true" : "false";
  if (key == "zero_flow_head") return c.zero_flow_head ? "true" : "false";
  throw ConfigError("unknown config key '" + key + "'");
}

void NetworkConfig::validate() const {
  if (levels == 0) throw ConfigError("levels must be at least 1");
  if (iterations == 0) throw ConfigError("iters must be at least 1");
  if (points.size() != levels) {
    throw ConfigError("points lists " + std::to_string(points.size()) + " counts for " + std::to_string(levels) +
                      " levels");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i] == 0) throw ConfigError("point counts must be positive");
    if (i > 0 && points[i] >= points[i - 1]) throw ConfigError("point counts must strictly decrease with depth");
  }
  if (loss_weights.size() < levels) throw ConfigError("need one loss weight per level");
  for (std::size_t i = 0; i < levels; ++i) {
    if (!(loss_weights[i] > 0.0)) throw ConfigError("loss weights must be positive");
  }
  if (channels == 0 || motion_channels == 0 || state_size == 0 || expand == 0) {
    throw ConfigError("channel widths and state size must be positive");
  }
  if (k == 0) throw ConfigError("k must be positive");
  if (conv_width % 2 == 0) throw ConfigError("conv_width must be odd");
  if (blocks == 0 && update != isu::UpdateKind::kConvGru) throw ConfigError("blocks must be at least 1");
  if (!(lr > 0.0) || lr_min < 0.0 || lr_min > lr) throw ConfigError("need 0 <= lr_min <= lr and lr > 0");
  if (batch == 0) throw ConfigError("batch must be at least 1");
}

isu::IsuOptions NetworkConfig::isu_options() const {
  isu::IsuOptions o;
  o.channels = channels;
  o.motion_channels = motion_channels;
  o.k = k;
  o.blocks = blocks;
  o.state_size = state_size;
  o.expand = expand;
  o.conv_width = conv_width;
  o.kind = update;
  o.zero_out_proj = zero_out_proj;
  o.zero_flow_head = zero_flow_head;
  return o;
}

NetworkConfig parse_config(const std::string& text, NetworkConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

NetworkConfig load_config(const std::string& path, NetworkConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const NetworkConfig& config) {
  std::string out;
  for (const auto& key : config_keys()) out += key + " = " + get_setting(config, key) + "\n";
  return out;
}

}  // namespace ssmflow
