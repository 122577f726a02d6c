#include "tdcr/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "tdcr/errors.hpp"

namespace tdcr {

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file for hashing: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

void Manifest::add_input(const std::string& path) { inputs[path] = sha256_file(path); }
void Manifest::add_output(const std::string& path) { outputs[path] = sha256_file(path); }

std::string Manifest::to_json() const {
  nlohmann::json j;
  j["subcommand"] = subcommand;
  j["arguments"] = arguments;
  j["config_path"] = config_path;
  j["effective_config"] = effective_config;
  j["seed"] = seed;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["tool_version"] = tool_version;
  return j.dump(2) + "\n";
}

Manifest Manifest::from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    Manifest m;
    m.subcommand = j.at("subcommand").get<std::string>();
    m.arguments = j.at("arguments").get<std::vector<std::string>>();
    m.config_path = j.at("config_path").get<std::string>();
    m.effective_config = j.at("effective_config").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    m.tool_version = j.at("tool_version").get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed manifest: ") + e.what());
  }
}

void Manifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << to_json();
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<std::string> Manifest::mismatched_files() const {
  std::vector<std::string> bad;
  for (const auto* group : {&inputs, &outputs}) {
    for (const auto& [path, hash] : *group) {
      try {
        if (sha256_file(path) != hash) bad.push_back(path);
      } catch (const IoError&) {
        bad.push_back(path);
      }
    }
  }
  return bad;
}

}  // namespace tdcr
