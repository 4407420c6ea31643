#include "wss/core/container.hpp"

#include "wss/util/error.hpp"

#include <json.hpp>

#include <fstream>

namespace wss {

namespace {

using nlohmann::json;

void write_header(const std::string& path, const GridSpec& g,
                  const std::vector<std::string>& channels, const std::string& dtype) {
    json h;
    h["dims"] = {g.nx, g.ny, g.nz};
    h["spacing_mm"] = {g.sx, g.sy, g.sz};
    h["channels"] = channels;
    h["dtype"] = dtype;
    h["order"] = "xyz";
    std::ofstream out(path + ".json");
    require(out.good(), "cannot write header: " + path + ".json");
    out << h.dump(2) << '\n';
}

struct Header {
    GridSpec grid;
    std::vector<std::string> channels;
    std::string dtype;
};

Header read_header(const std::string& path) {
    std::ifstream in(path + ".json");
    require(in.good(), "missing header: " + path + ".json");
    json h = json::parse(in);
    Header out;
    out.grid.nx = h.at("dims").at(0).get<int>();
    out.grid.ny = h.at("dims").at(1).get<int>();
    out.grid.nz = h.at("dims").at(2).get<int>();
    out.grid.sx = h.at("spacing_mm").at(0).get<double>();
    out.grid.sy = h.at("spacing_mm").at(1).get<double>();
    out.grid.sz = h.at("spacing_mm").at(2).get<double>();
    out.channels = h.at("channels").get<std::vector<std::string>>();
    out.dtype = h.at("dtype").get<std::string>();
    require(h.at("order").get<std::string>() == "xyz", "unsupported voxel order");
    out.grid.validate();
    return out;
}

void write_f32_payload(const std::string& path,
                       const std::vector<const std::vector<double>*>& channels) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write payload: " + path);
    std::vector<float> buf;
    for (const auto* ch : channels) {
        buf.assign(ch->begin(), ch->end());
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
}

std::vector<std::vector<double>> read_f32_payload(const std::string& path, size_t nchannels,
                                                  size_t voxels) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot read payload: " + path);
    std::vector<std::vector<double>> channels(nchannels);
    std::vector<float> buf(voxels);
    for (auto& ch : channels) {
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(voxels * sizeof(float)));
        require(in.gcount() == static_cast<std::streamsize>(voxels * sizeof(float)),
                "payload truncated: " + path);
        ch.assign(buf.begin(), buf.end());
    }
    return channels;
}

void write_u8_payload(const std::string& path, const std::vector<uint8_t>& data) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "cannot write payload: " + path);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
}

std::vector<uint8_t> read_u8_payload(const std::string& path, size_t voxels) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot read payload: " + path);
    std::vector<uint8_t> data(voxels);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(voxels));
    require(in.gcount() == static_cast<std::streamsize>(voxels), "payload truncated: " + path);
    return data;
}

} // namespace

void write_volume(const std::string& path, const IntensityVolume& volume) {
    write_header(path, volume.grid, volume.channel_names, "f32");
    std::vector<const std::vector<double>*> chans;
    for (const auto& ch : volume.channels) chans.push_back(&ch);
    write_f32_payload(path, chans);
}

void write_volume(const std::string& path, const ProbabilityVolume& volume) {
    std::vector<std::string> names;
    for (int c = 0; c < volume.num_classes; ++c) names.push_back("class" + std::to_string(c));
    write_header(path, volume.grid, names, "f32");
    std::vector<const std::vector<double>*> chans;
    for (const auto& ch : volume.probs) chans.push_back(&ch);
    write_f32_payload(path, chans);
}

void write_volume(const std::string& path, const LabelVolume& volume) {
    write_header(path, volume.grid, {"labels"}, "u8");
    write_u8_payload(path, volume.labels);
}

void write_volume(const std::string& path, const AnnotationMask& volume) {
    write_header(path, volume.grid, {"annotation"}, "u8");
    write_u8_payload(path, volume.labels);
}

IntensityVolume read_intensity_volume(const std::string& path) {
    const Header h = read_header(path);
    require(h.dtype == "f32", "expected f32 volume: " + path);
    IntensityVolume out(h.grid, h.channels);
    out.channels = read_f32_payload(path, h.channels.size(),
                                    static_cast<size_t>(h.grid.voxels()));
    return out;
}

ProbabilityVolume read_probability_volume(const std::string& path) {
    const Header h = read_header(path);
    require(h.dtype == "f32", "expected f32 volume: " + path);
    ProbabilityVolume out(h.grid, static_cast<int>(h.channels.size()));
    out.probs = read_f32_payload(path, h.channels.size(), static_cast<size_t>(h.grid.voxels()));
    return out;
}

LabelVolume read_label_volume(const std::string& path) {
    const Header h = read_header(path);
    require(h.dtype == "u8", "expected u8 volume: " + path);
    LabelVolume out(h.grid);
    out.labels = read_u8_payload(path, static_cast<size_t>(h.grid.voxels()));
    return out;
}

AnnotationMask read_annotation_mask(const std::string& path) {
    const Header h = read_header(path);
    require(h.dtype == "u8", "expected u8 volume: " + path);
    AnnotationMask out(h.grid);
    out.labels = read_u8_payload(path, static_cast<size_t>(h.grid.voxels()));
    return out;
}

} // namespace wss
