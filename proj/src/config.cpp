#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "vakon/experiments.hpp"

namespace vakon::experiments {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

Scalar to_scalar(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  const char* begin = v.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw std::invalid_argument("config key '" + key + "': not a number: '" + value + "'");
  }
  return parsed;
}

int to_int(const std::string& key, const std::string& value) {
  const Scalar v = to_scalar(key, value);
  const int i = static_cast<int>(v);
  if (static_cast<Scalar>(i) != v) {
    throw std::invalid_argument("config key '" + key + "': not an integer: '" + value + "'");
  }
  return i;
}

bool to_bool(const std::string& key, const std::string& value) {
  std::string v = trim(value);
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: '" + value + "'");
}

std::vector<Scalar> to_list(const std::string& key, const std::string& value) {
  std::vector<Scalar> out;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) out.push_back(to_scalar(key, item));
  if (out.empty()) throw std::invalid_argument("config key '" + key + "': empty list");
  return out;
}

ConfigPoint to_point(const std::string& key, const std::string& value) {
  const std::vector<Scalar> items = to_list(key, value);
  if (items.size() != 2) {
    throw std::invalid_argument("config key '" + key + "': expected 2 components (x,theta), got " +
                                std::to_string(items.size()));
  }
  ConfigPoint q(2);
  q << items[0], items[1];
  return q;
}

std::array<Scalar, 8> to_state(const std::string& key, const std::string& value) {
  const std::vector<Scalar> items = to_list(key, value);
  if (items.size() != 8) {
    throw std::invalid_argument("config key '" + key + "': expected 8 components, got " +
                                std::to_string(items.size()));
  }
  std::array<Scalar, 8> out{};
  std::copy(items.begin(), items.end(), out.begin());
  return out;
}

}  // namespace

cartpole::CartPoleParams ExperimentConfig::params() const {
  return cartpole::CartPoleParams(M, m, l, g, hbar);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "M",          "m",           "l",
      "g",          "hbar",        "h",
      "N",          "q0",          "q1",
      "q2",         "q3",          "lam0",
      "lam1",       "state0",      "project_seed",
      "qNm1",       "qN",          "homotopy",
      "h_list",     "T",           "csv",
      "svg",        "newton_tol",  "max_iter",
      "fd_step_first", "fd_step_second", "singular_tol",
      "backtrack_max", "corrupt_partial",
  };
  return keys;
}

void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  if (key == "M") c.M = to_scalar(key, value);
  else if (key == "m") c.m = to_scalar(key, value);
  else if (key == "l") c.l = to_scalar(key, value);
  else if (key == "g") c.g = to_scalar(key, value);
  else if (key == "hbar") c.hbar = to_scalar(key, value);
  else if (key == "h") c.h = to_scalar(key, value);
  else if (key == "N") c.N = to_int(key, value);
  else if (key == "q0") c.q0 = to_point(key, value);
  else if (key == "q1") c.q1 = to_point(key, value);
  else if (key == "q2") c.q2 = to_point(key, value);
  else if (key == "q3") c.q3 = to_point(key, value);
  else if (key == "lam0") c.lam0 = to_scalar(key, value);
  else if (key == "lam1") c.lam1 = to_scalar(key, value);
  else if (key == "state0") c.state0 = to_state(key, value);
  else if (key == "project_seed") c.project_seed = to_bool(key, value);
  else if (key == "qNm1") c.qNm1 = to_point(key, value);
  else if (key == "qN") c.qN = to_point(key, value);
  else if (key == "homotopy") c.homotopy = to_int(key, value);
  else if (key == "h_list") c.h_list = to_list(key, value);
  else if (key == "T") c.T = to_scalar(key, value);
  else if (key == "csv") c.csv = trim(value);
  else if (key == "svg") c.svg = trim(value);
  else if (key == "newton_tol") c.settings.newton_tol = to_scalar(key, value);
  else if (key == "max_iter") c.settings.max_iter = to_int(key, value);
  else if (key == "fd_step_first") c.settings.fd_step_first = to_scalar(key, value);
  else if (key == "fd_step_second") c.settings.fd_step_second = to_scalar(key, value);
  else if (key == "singular_tol") c.settings.singular_tol = to_scalar(key, value);
  else if (key == "backtrack_max") c.settings.backtrack_max = to_int(key, value);
  else if (key == "corrupt_partial") c.corrupt_partial = trim(value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig parse_config_file(const std::string& path, ExperimentConfig base) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                  ": expected key=value, got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": empty key");
    }
    apply_setting(base, key, value);
  }
  return base;
}

ExperimentConfig load_config(const std::string& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides) {
  ExperimentConfig config;
  if (const char* env = std::getenv("VAKON_SETTINGS"); env != nullptr && *env != '\0') {
    config = parse_config_file(env, std::move(config));
  }
  if (!file.empty()) config = parse_config_file(file, std::move(config));
  for (const auto& [key, value] : overrides) apply_setting(config, key, value);
  return config;
}

}  // namespace vakon::experiments
