/* Copyright 2026 The JasperCpp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "jasper/manifest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "jasper/error.h"
#include "jasper/metrics.h"

namespace jasper {
namespace data {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string utterance_id(const ManifestEntry& entry) {
  return fs::path(entry.audio_filepath).stem().string();
}

namespace {

// Resolves a manifest audio path: absolute paths pass through, relative
// paths anchor at $JASPER_DATA_ROOT when set and at the manifest's own
// directory otherwise.
std::string resolve_audio_path(const std::string& raw,
                               const fs::path& manifest_dir) {
  const fs::path p(raw);
  if (p.is_absolute()) return p.string();
  if (const char* root = std::getenv(kDataRootEnv); root != nullptr && *root != '\0') {
    return (fs::path(root) / p).string();
  }
  return (manifest_dir / p).string();
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open manifest: " + path);
  const fs::path manifest_dir = fs::path(path).parent_path();

  std::vector<ManifestEntry> entries;
  std::string line;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("manifest: invalid JSON: ") + e.what(),
                       line_no);
    }
    if (!obj.is_object()) {
      throw ParseError("manifest: line is not a JSON object", line_no);
    }
    for (const char* key : {"audio_filepath", "text", "duration"}) {
      if (!obj.contains(key)) {
        throw ParseError(std::string("manifest: missing key \"") + key + "\"",
                         line_no);
      }
    }
    if (!obj["audio_filepath"].is_string() || !obj["text"].is_string()) {
      throw ParseError(
          "manifest: \"audio_filepath\" and \"text\" must be strings",
          line_no);
    }
    if (!obj["duration"].is_number()) {
      throw ParseError("manifest: \"duration\" must be a number", line_no);
    }

    ManifestEntry entry;
    entry.audio_filepath = obj["audio_filepath"].get<std::string>();
    entry.text = obj["text"].get<std::string>();
    entry.duration = obj["duration"].get<double>();
    if (entry.audio_filepath.empty()) {
      throw ParseError("manifest: \"audio_filepath\" is empty", line_no);
    }
    if (!(entry.duration > 0.0)) {
      throw ParseError("manifest: \"duration\" must be positive, got " +
                           obj["duration"].dump(),
                       line_no);
    }
    if (eval::normalize_text(entry.text).empty()) {
      throw ParseError(
          "manifest: transcript is empty after normalization: \"" +
              entry.text + "\"",
          line_no);
    }
    entry.resolved_path = resolve_audio_path(entry.audio_filepath, manifest_dir);
    if (!fs::exists(entry.resolved_path)) {
      throw DataError("manifest line " + std::to_string(line_no) +
                      ": audio file not found: " + entry.resolved_path);
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write manifest: " + tmp);
    for (const ManifestEntry& entry : entries) {
      nlohmann::ordered_json obj;
      obj["audio_filepath"] = entry.audio_filepath;
      obj["text"] = entry.text;
      obj["duration"] = entry.duration;
      os << obj.dump() << "\n";
    }
    if (!os) throw DataError("failed writing manifest: " + tmp);
  }
  fs::rename(tmp, path);
}

}  // namespace data
}  // namespace jasper
