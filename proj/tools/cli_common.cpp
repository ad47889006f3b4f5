// Copyright (c) 2026 The cfwb Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli_common.hpp"

#include <charconv>
#include <fstream>

#include "cfwb/errors.hpp"

namespace cfwb::cli {

std::string fmt_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("cannot format double");
  return std::string(buf, end);
}

namespace {

std::string strip_dashes(const std::string& name) {
  std::size_t i = 0;
  while (i < name.size() && name[i] == '-') ++i;
  return name.substr(i);
}

}  // namespace

void OptionSet::add_size(const std::string& name, std::size_t& ref, const std::string& help) {
  cmd_->add_option(name, ref, help)
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fields_.emplace_back(strip_dashes(name), [&ref] { return std::to_string(ref); });
}

void OptionSet::add_u64(const std::string& name, std::uint64_t& ref, const std::string& help) {
  cmd_->add_option(name, ref, help)
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fields_.emplace_back(strip_dashes(name), [&ref] { return std::to_string(ref); });
}

void OptionSet::add_int(const std::string& name, int& ref, const std::string& help) {
  cmd_->add_option(name, ref, help)
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fields_.emplace_back(strip_dashes(name), [&ref] { return std::to_string(ref); });
}

void OptionSet::add_double(const std::string& name, double& ref, const std::string& help) {
  cmd_->add_option(name, ref, help)
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  fields_.emplace_back(strip_dashes(name), [&ref] { return fmt_double(ref); });
}

void OptionSet::add_string(const std::string& name, std::string& ref, const std::string& help,
                           bool required) {
  auto* opt = cmd_->add_option(name, ref, help)
                  ->capture_default_str()
                  ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  if (required) opt->required();
  fields_.emplace_back(strip_dashes(name), [&ref] { return ref; });
}

void OptionSet::add_sizes(const std::string& name, std::vector<std::size_t>& ref,
                          const std::string& help) {
  cmd_->add_option(name, ref, help)
      ->delimiter(',')
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  fields_.emplace_back(strip_dashes(name), [&ref] {
    std::string out;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(ref[i]);
    }
    return out;
  });
}

void OptionSet::add_strings(const std::string& name, std::vector<std::string>& ref,
                            const std::string& help) {
  cmd_->add_option(name, ref, help)
      ->delimiter(',')
      ->capture_default_str()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  fields_.emplace_back(strip_dashes(name), [&ref] {
    std::string out;
    for (std::size_t i = 0; i < ref.size(); ++i) {
      if (i) out += ',';
      out += ref[i];
    }
    return out;
  });
}

std::vector<std::pair<std::string, std::string>> OptionSet::resolved() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(fields_.size());
  for (const auto& [key, get] : fields_) out.emplace_back(key, get());
  std::sort(out.begin(), out.end());
  return out;
}

void write_manifest(const std::string& path, const std::string& command, const OptionSet& opts) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("manifest: cannot open '" + path + "'");
  os << "# cfwb manifest\n";
  os << "# command=" << command << "\n";
  for (const auto& [key, value] : opts.resolved()) os << key << '=' << value << '\n';
  if (!os) throw DataError("manifest: write to '" + path + "' failed");
}

std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> raw(argv, argv + argc);
  if (raw.size() < 2) return raw;

  // Collect config paths appearing anywhere after the subcommand.
  std::vector<std::string> config_paths;
  for (std::size_t i = 2; i < raw.size(); ++i) {
    if (raw[i] == "--config" && i + 1 < raw.size()) {
      config_paths.push_back(raw[i + 1]);
      ++i;
    } else if (raw[i].rfind("--config=", 0) == 0) {
      config_paths.push_back(raw[i].substr(9));
    }
  }
  if (config_paths.empty()) return raw;

  std::vector<std::string> synth;
  for (const auto& path : config_paths) {
    std::ifstream is(path);
    if (!is) throw DataError("config: cannot open '" + path + "'");
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      // Trim leading spaces.
      std::size_t b = line.find_first_not_of(" \t");
      if (b == std::string::npos) continue;
      line = line.substr(b);
      if (line.empty() || line[0] == '#') continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw FormatError("config: malformed line '" + line + "' in '" + path + "'");
      }
      synth.push_back("--" + line.substr(0, eq) + "=" + line.substr(eq + 1));
    }
  }

  std::vector<std::string> out;
  out.reserve(raw.size() + synth.size());
  out.push_back(raw[0]);
  out.push_back(raw[1]);
  out.insert(out.end(), synth.begin(), synth.end());
  out.insert(out.end(), raw.begin() + 2, raw.end());
  return out;
}

void add_config_option(CLI::App* cmd, std::string& sink) {
  cmd->add_option("--config", sink,
                  "key=value file merged under explicit flags (manifests are valid configs)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

}  // namespace cfwb::cli
