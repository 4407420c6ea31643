#pragma once

#include <string>
#include <vector>

namespace wss {

// One dataset case. Paths are stored relative to the manifest file and
// resolved against its directory on load.
struct ManifestRecord {
    std::string case_id;
    std::string image_path;
    std::string label_path;
    std::string annotation_path; // empty until annotated
    std::string domain = "synth";
    bool positive = false;
    int lesion_count = 0;
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

// JSON-lines manifest. Loading checks case-id uniqueness and (by default)
// that every referenced file exists.
DatasetManifest read_manifest(const std::string& path, bool check_files = true);
void write_manifest(const std::string& path, const DatasetManifest& manifest);

DatasetManifest filter_domain(const DatasetManifest& manifest, const std::string& domain);

} // namespace wss
