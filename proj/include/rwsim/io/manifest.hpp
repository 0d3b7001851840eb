#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rwsim/core/error.hpp"
#include "rwsim/io/kv_format.hpp"

namespace rwsim::io {

inline constexpr const char* kManifestSchema = "rwsim.run-manifest/1";

inline std::string utc_timestamp(std::chrono::system_clock::time_point t = std::chrono::system_clock::now()) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes `text` to a sibling temporary file and renames it over `path`, so a
// reader sees either the old file or the complete new one.
inline void write_text_atomic(const std::string& path, const std::string& text) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw ConfigError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw ConfigError("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  Json config = Json::object();
  std::uint64_t seed = 0;
  std::string version;
  std::string started;
  std::string finished;
  std::vector<std::string> outputs;

  Json to_json() const {
    Json j;
    j["schema"] = kManifestSchema;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["seed"] = seed;
    j["version"] = version;
    j["started"] = started;
    j["finished"] = finished;
    j["outputs"] = outputs;
    return j;
  }

  // Refuses to record an output that is not on disk.
  void write(const std::string& path) const {
    for (const auto& f : outputs) {
      if (!std::filesystem::exists(f)) throw ConfigError("manifest lists missing output " + f);
    }
    write_text_atomic(path, to_json().dump(2) + "\n");
  }
};

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  const Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError(path, 1, "not a JSON object");
  if (j.value("schema", std::string{}) != kManifestSchema) throw ConfigError(path + ": unknown manifest schema");
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.argv = j.at("argv").get<std::vector<std::string>>();
  m.config = j.at("config");
  m.seed = j.at("seed").get<std::uint64_t>();
  m.version = j.at("version").get<std::string>();
  m.started = j.at("started").get<std::string>();
  m.finished = j.at("finished").get<std::string>();
  m.outputs = j.at("outputs").get<std::vector<std::string>>();
  return m;
}

}  // namespace rwsim::io
