#include "manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include "ibkd/error.hpp"

namespace ibkd::cli {

using ojson = nlohmann::ordered_json;

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open '" + path + "' for hashing");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) fail(ErrorKind::Data, "sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void RunManifest::add_input(const std::string& name, const std::string& path) {
  inputs[name] = FileEntry{path, sha256_file(path), true};
}

void RunManifest::add_output(const std::string& name, const std::string& path, bool reproducible) {
  outputs[name] = FileEntry{path, "", reproducible};
}

void RunManifest::finalize() {
  for (auto& [name, f] : outputs) f.sha256 = sha256_file(f.path);
  finished_at = utc_now();
  status = "complete";
}

namespace {

ojson files_to_json(const std::map<std::string, FileEntry>& files) {
  ojson j = ojson::object();
  for (const auto& [name, f] : files) {
    ojson e;
    e["path"] = f.path;
    e["sha256"] = f.sha256;
    e["reproducible"] = f.reproducible;
    j[name] = e;
  }
  return j;
}

std::map<std::string, FileEntry> files_from_json(const nlohmann::json& j) {
  std::map<std::string, FileEntry> out;
  for (const auto& [name, e] : j.items()) {
    out[name] = FileEntry{e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                          e.value("reproducible", true)};
  }
  return out;
}

}  // namespace

ojson RunManifest::to_json() const {
  ojson j;
  j["tool"] = "ibkd";
  j["tool_version"] = tool_version;
  j["command"] = command;
  j["status"] = status;
  j["seed"] = seed;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["args"] = args;
  j["config"] = config;
  j["inputs"] = files_to_json(inputs);
  j["outputs"] = files_to_json(outputs);
  if (!extra.empty()) j["extra"] = extra;
  return j;
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.command = j.at("command").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.status = j.value("status", "");
    m.seed = j.value("seed", std::uint64_t{0});
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    m.args = j.at("args").get<std::map<std::string, std::string>>();
    m.config = ojson::parse(j.at("config").dump());
    m.inputs = files_from_json(j.at("inputs"));
    m.outputs = files_from_json(j.at("outputs"));
    if (j.contains("extra")) m.extra = ojson::parse(j.at("extra").dump());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Format, std::string("manifest: ") + e.what());
  }
  return m;
}

void RunManifest::write(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Data, "cannot write manifest '" + path + "'");
  out << to_json().dump(2) << '\n';
  if (!out) fail(ErrorKind::Data, "failed writing manifest '" + path + "'");
}

RunManifest RunManifest::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Data, "cannot open manifest '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::Format, "manifest '" + path + "': " + e.what());
  }
  return from_json(j);
}

std::vector<std::string> changed_inputs(const RunManifest& m) {
  std::vector<std::string> out;
  for (const auto& [name, f] : m.inputs) {
    std::string now;
    try {
      now = sha256_file(f.path);
    } catch (const Error&) {
      now.clear();
    }
    if (now != f.sha256) out.push_back(name);
  }
  return out;
}

}  // namespace ibkd::cli
