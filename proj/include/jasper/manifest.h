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

// Dataset manifests in the JSON-lines dialect common to ASR toolkits: one
// object per line with "audio_filepath", "text", and "duration" keys.
// Extra keys are ignored so third-party manifests load unchanged.

#ifndef JASPER_MANIFEST_H_
#define JASPER_MANIFEST_H_

#include <string>
#include <vector>

namespace jasper {
namespace data {

// Name of the environment variable that, when set, anchors relative audio
// paths.  Unset, relative paths resolve against the manifest's directory.
inline constexpr const char* kDataRootEnv = "JASPER_DATA_ROOT";

struct ManifestEntry {
  std::string audio_filepath;  // path exactly as written in the manifest
  std::string resolved_path;   // usable path after data-root resolution
  std::string text;            // transcript exactly as written
  double duration = 0.0;       // seconds
};

// Utterance identifier: the audio file's base name without extension.
// Manifests carry no explicit id field, so the stem is the stable key that
// decode outputs and evaluation reports share.
std::string utterance_id(const ManifestEntry& entry);

// Parses a JSON-lines manifest.  Each non-blank line must be one JSON
// object providing "audio_filepath" (non-empty string), "text" (string),
// and "duration" (positive number); unknown keys are ignored.  Validation
// beyond shape: the transcript must be non-empty after text normalization,
// and the audio path must resolve to an existing file.  Resolution order
// for relative paths: $JASPER_DATA_ROOT when set, else the manifest's own
// directory.  Malformed lines raise ParseError carrying the line number;
// an unreadable manifest or unresolvable audio path raises DataError.
std::vector<ManifestEntry> load_manifest(const std::string& path);

// Writes entries as JSON lines (audio_filepath, text, duration) to a
// temporary file, then renames it into place.  resolved_path is a load-time
// product and is not serialized.
void save_manifest(const std::string& path,
                   const std::vector<ManifestEntry>& entries);

}  // namespace data
}  // namespace jasper

#endif  // JASPER_MANIFEST_H_
