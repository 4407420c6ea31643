#include "wss/model/checkpoint.hpp"

#include "wss/util/error.hpp"

#include <fstream>
#include <sstream>

namespace wss {

void save_checkpoint(const std::string& path, const Parameters& params) {
    std::ofstream bin(path, std::ios::binary);
    require(bin.good(), "cannot write checkpoint: " + path);
    std::ofstream idx(path + ".idx");
    require(idx.good(), "cannot write checkpoint index: " + path + ".idx");
    int64_t offset = 0;
    std::vector<float> buf;
    for (const Tensor& t : params) {
        buf.assign(t.data.begin(), t.data.end());
        bin.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
        idx << t.name << ' ' << t.shape.size();
        for (int d : t.shape) idx << ' ' << d;
        idx << ' ' << offset << ' ' << t.data.size() << '\n';
        offset += static_cast<int64_t>(t.data.size());
    }
}

Parameters load_checkpoint(const std::string& path) {
    std::ifstream idx(path + ".idx");
    require(idx.good(), "missing checkpoint index: " + path + ".idx");
    std::ifstream bin(path, std::ios::binary);
    require(bin.good(), "missing checkpoint: " + path);
    Parameters params;
    std::string line;
    while (std::getline(idx, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        Tensor t;
        size_t ndim = 0, count = 0;
        int64_t offset = 0;
        ss >> t.name >> ndim;
        t.shape.resize(ndim);
        for (auto& d : t.shape) ss >> d;
        ss >> offset >> count;
        require(!ss.fail(), "malformed checkpoint index line: " + line);
        require(static_cast<int64_t>(count) == t.size(), "checkpoint shape/count mismatch");
        std::vector<float> buf(count);
        bin.seekg(offset * static_cast<int64_t>(sizeof(float)));
        bin.read(reinterpret_cast<char*>(buf.data()),
                 static_cast<std::streamsize>(count * sizeof(float)));
        require(bin.gcount() == static_cast<std::streamsize>(count * sizeof(float)),
                "checkpoint payload truncated: " + path);
        t.data.assign(buf.begin(), buf.end());
        params.push_back(std::move(t));
    }
    return params;
}

} // namespace wss
