#include "wss/io/manifest.hpp"

#include "wss/util/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>

namespace wss {

namespace fs = std::filesystem;
using nlohmann::json;

DatasetManifest read_manifest(const std::string& path, bool check_files) {
    std::ifstream in(path);
    require(in.good(), "cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();

    auto resolve = [&](const std::string& p) -> std::string {
        if (p.empty()) return p;
        fs::path fp(p);
        if (fp.is_relative()) fp = base / fp;
        return fp.string();
    };

    DatasetManifest manifest;
    std::set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        ManifestRecord r;
        r.case_id = j.at("case_id").get<std::string>();
        r.image_path = resolve(j.at("image").get<std::string>());
        r.label_path = resolve(j.at("labels").get<std::string>());
        if (j.contains("annotation") && !j.at("annotation").is_null())
            r.annotation_path = resolve(j.at("annotation").get<std::string>());
        r.domain = j.value("domain", std::string("synth"));
        r.positive = j.value("positive", false);
        r.lesion_count = j.value("lesion_count", 0);
        require(seen.insert(r.case_id).second, "duplicate case id: " + r.case_id);
        if (check_files) {
            require(fs::exists(r.image_path), "missing image file: " + r.image_path);
            require(fs::exists(r.label_path), "missing label file: " + r.label_path);
            if (!r.annotation_path.empty())
                require(fs::exists(r.annotation_path),
                        "missing annotation file: " + r.annotation_path);
        }
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path);
    require(out.good(), "cannot write manifest: " + path);
    const fs::path base = fs::path(path).parent_path();

    auto relativize = [&](const std::string& p) -> std::string {
        if (p.empty()) return p;
        std::error_code ec;
        const fs::path rel = fs::relative(p, base, ec);
        if (!ec && !rel.empty() && rel.native()[0] != '.') return rel.string();
        return p;
    };

    for (const ManifestRecord& r : manifest.records) {
        json j;
        j["case_id"] = r.case_id;
        j["image"] = relativize(r.image_path);
        j["labels"] = relativize(r.label_path);
        if (!r.annotation_path.empty()) j["annotation"] = relativize(r.annotation_path);
        j["domain"] = r.domain;
        j["positive"] = r.positive;
        j["lesion_count"] = r.lesion_count;
        out << j.dump() << '\n';
    }
}

DatasetManifest filter_domain(const DatasetManifest& manifest, const std::string& domain) {
    if (domain.empty()) return manifest;
    DatasetManifest out;
    for (const ManifestRecord& r : manifest.records)
        if (r.domain == domain) out.records.push_back(r);
    return out;
}

} // namespace wss
