#include "hsir/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "hsir/config_io.hpp"
#include "json.hpp"

namespace hsir {

using nlohmann::json;

namespace {
constexpr char kMagic[8] = {'H', 'S', 'I', 'R', 'C', 'K', 'P', '1'};
}

void save_checkpoint(const std::string& path, const Model& model, const OptimizerState* opt) {
    std::vector<std::pair<std::string, const Tensor*>> arrays;
    for (const auto& it : model.params.items) arrays.emplace_back(it.first, &it.second.val());
    Tensor opt_t;
    if (opt) {
        for (size_t i = 0; i < model.params.items.size(); ++i) {
            arrays.emplace_back("opt.m." + model.params.items[i].first, &opt->m[i]);
            arrays.emplace_back("opt.v." + model.params.items[i].first, &opt->v[i]);
        }
        opt_t = Tensor::scalar(static_cast<double>(opt->t));
        arrays.emplace_back("opt.t", &opt_t);
    }

    json dir = json::array();
    int64_t offset = 0;
    for (const auto& [name, t] : arrays) {
        json e;
        e["name"] = name;
        e["dtype"] = "f64";
        e["shape"] = t->dims();
        e["offset"] = offset;  // elements from payload start
        dir.push_back(e);
        offset += t->numel();
    }
    json header;
    header["format_version"] = 1;
    header["config"] = json::parse(model_config_to_json(model.cfg));
    header["seed"] = model.seed;
    header["step"] = model.step;
    header["arrays"] = dir;
    std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write checkpoint '" + path + "'");
    f.write(kMagic, 8);
    uint64_t hlen = htext.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, t] : arrays)
        f.write(reinterpret_cast<const char*>(t->data()),
                static_cast<std::streamsize>(t->numel() * 8));
    if (!f) throw DataError("write failure on checkpoint '" + path + "'");
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("'" + path + "' is not a checkpoint file");
    uint64_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 8);
    std::string htext(hlen, '\0');
    f.read(htext.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw DataError("truncated checkpoint header in '" + path + "'");

    json header;
    try {
        header = json::parse(htext);
    } catch (const json::exception& e) {
        throw DataError(std::string("bad checkpoint header: ") + e.what());
    }
    if (header.at("format_version").get<int>() != 1)
        throw DataError("unsupported checkpoint format_version");

    LoadedCheckpoint ck;
    ck.config = model_config_from_json(header.at("config").dump());
    ck.seed = header.at("seed").get<uint64_t>();
    ck.step = header.at("step").get<int64_t>();
    for (const auto& e : header.at("arrays")) {
        std::string name = e.at("name").get<std::string>();
        std::vector<int> shape = e.at("shape").get<std::vector<int>>();
        Tensor t(shape);
        f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * 8));
        if (!f)
            throw DataError("truncated checkpoint payload at array '" + name + "' in '" + path +
                            "'");
        ck.arrays.emplace_back(std::move(name), std::move(t));
    }
    return ck;
}

Model load_model(const LoadedCheckpoint& ck, OptimizerState* opt) {
    Model m(ck.config, ck.seed);
    m.step = ck.step;
    for (auto& it : m.params.items) {
        const Tensor* src = ck.find(it.first);
        if (!src) throw DataError("checkpoint is missing parameter '" + it.first + "'");
        if (src->dims() != it.second.val().dims())
            throw DataError("checkpoint parameter '" + it.first + "' has shape " +
                            src->shape_str() + ", expected " + it.second.val().shape_str());
        it.second.mutable_val() = *src;
    }
    if (opt) {
        *opt = OptimizerState::init(m.params);
        const Tensor* t = ck.find("opt.t");
        if (t) {
            opt->t = static_cast<int64_t>((*t)[0]);
            for (size_t i = 0; i < m.params.items.size(); ++i) {
                const Tensor* mm = ck.find("opt.m." + m.params.items[i].first);
                const Tensor* vv = ck.find("opt.v." + m.params.items[i].first);
                if (mm) opt->m[i] = *mm;
                if (vv) opt->v[i] = *vv;
            }
        }
    }
    return m;
}

}  // namespace hsir
