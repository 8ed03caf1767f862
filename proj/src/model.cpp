#include "hrd/model.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace hrd {

Model Model::build(const ModelConfig& cfg, uint64_t seed) {
    Model m;
    m.cfg = cfg;
    switch (cfg.family) {
        case Family::cnn: {
            CnnModel<float> net;
            net.build(cfg, seed);
            m.net = std::move(net);
            break;
        }
        case Family::cae:
        case Family::contrastive_cae: {
            CaeModel<float> net;
            net.build(cfg, seed);
            m.net = std::move(net);
            break;
        }
        case Family::mlp: {
            MlpModel<float> net;
            net.build(MlpConfig{}, seed);
            m.net = std::move(net);
            break;
        }
    }
    return m;
}

CnnModel<float>& Model::as_cnn() {
    if (auto* p = std::get_if<CnnModel<float>>(&net)) return *p;
    throw ValidationError("model is not a cnn");
}
CaeModel<float>& Model::as_cae() {
    if (auto* p = std::get_if<CaeModel<float>>(&net)) return *p;
    throw ValidationError("model is not a cae");
}
MlpModel<float>& Model::as_mlp() {
    if (auto* p = std::get_if<MlpModel<float>>(&net)) return *p;
    throw ValidationError("model is not an mlp");
}

std::vector<NamedParam<float>> Model::named_params() {
    if (auto* p = std::get_if<CnnModel<float>>(&net)) return p->named_params();
    if (auto* p = std::get_if<CaeModel<float>>(&net)) return p->named_params();
    if (auto* p = std::get_if<MlpModel<float>>(&net)) return p->named_params();
    throw ValidationError("empty model");
}

std::vector<NamedBuffer<float>> Model::named_buffers() {
    if (auto* p = std::get_if<CnnModel<float>>(&net)) return p->named_buffers();
    if (auto* p = std::get_if<CaeModel<float>>(&net)) return p->named_buffers();
    if (auto* p = std::get_if<MlpModel<float>>(&net)) return p->named_buffers();
    throw ValidationError("empty model");
}

void Model::mark_stats_ready() {
    if (auto* p = std::get_if<CnnModel<float>>(&net)) p->mark_stats_ready();
    if (auto* p = std::get_if<CaeModel<float>>(&net)) p->mark_stats_ready();
}

Tensor Model::forward(const Tensor& batch, bool train) {
    if (auto* p = std::get_if<CnnModel<float>>(&net)) return p->forward(batch, train);
    if (auto* p = std::get_if<CaeModel<float>>(&net)) return p->reconstruct(batch, train);
    if (auto* p = std::get_if<MlpModel<float>>(&net)) return p->forward(batch);
    throw ValidationError("empty model");
}

// --- config <-> json ---------------------------------------------------------

static nlohmann::json config_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["family"] = family_name(cfg.family);
    j["num_layers"] = cfg.num_layers;
    if (cfg.latent_dim > 0)
        j["latent_dim"] = cfg.latent_dim;
    else
        j["latent_dim"] = nullptr;
    j["classifier_hidden"] = cfg.classifier_hidden;
    j["margin"] = cfg.margin;
    return j;
}

static ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig cfg;
    cfg.family = family_from(j.at("family").get<std::string>());
    cfg.num_layers = j.value("num_layers", 4);
    if (j.contains("latent_dim") && !j.at("latent_dim").is_null())
        cfg.latent_dim = j.at("latent_dim").get<int64_t>();
    else
        cfg.latent_dim = 0;
    cfg.classifier_hidden = j.value("classifier_hidden", 32);
    cfg.margin = j.value("margin", 5.0);
    if (cfg.num_layers < 1 || cfg.num_layers > 6)
        throw ValidationError("num_layers must be in 1..6");
    if (cfg.latent_dim < 0) throw ValidationError("latent_dim must be positive or null");
    return cfg;
}

ModelConfig model_config_from_json_str(const std::string& json_text) {
    return config_from_json(nlohmann::json::parse(json_text));
}

std::string model_config_to_json_str(const ModelConfig& cfg) {
    return config_to_json(cfg).dump();
}

// --- checkpoint io -----------------------------------------------------------

namespace {
constexpr char kMagic[6] = {'F', 'B', 'C', 'A', 'E', '1'};
}

void save_checkpoint(Model& model, const std::string& path, uint64_t seed,
                     const std::vector<TrainLogEntry>& trace, const AdamState<float>* adam) {
    auto params = model.named_params();
    auto buffers = model.named_buffers();

    nlohmann::json header;
    header["config"] = config_to_json(model.cfg);
    header["seed"] = seed;
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& e : trace) jt.push_back({e.epoch, e.lr, e.loss});
    header["trace"] = jt;

    int64_t offset = 0;
    nlohmann::json jp = nlohmann::json::array();
    for (auto& p : params) {
        nlohmann::json e;
        e["name"] = p.name;
        e["shape"] = p.t.shape();
        e["offset"] = offset;
        jp.push_back(e);
        offset += p.t.numel() * static_cast<int64_t>(sizeof(float));
    }
    header["params"] = jp;

    nlohmann::json jb = nlohmann::json::array();
    for (auto& b : buffers) {
        nlohmann::json e;
        e["name"] = b.name;
        e["len"] = b.v->size();
        e["offset"] = offset;
        jb.push_back(e);
        offset += static_cast<int64_t>(b.v->size() * sizeof(float));
    }
    header["buffers"] = jb;

    if (adam && !adam->m.empty()) {
        nlohmann::json ja;
        ja["step"] = adam->step;
        ja["offset"] = offset;
        int64_t adam_len = 0;
        for (const auto& m : adam->m) adam_len += static_cast<int64_t>(m.size());
        ja["len"] = adam_len;
        header["adam"] = ja;
        offset += 2 * adam_len * static_cast<int64_t>(sizeof(float));
    }

    const std::string head = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    const uint32_t len = static_cast<uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (auto& p : params)
        out.write(reinterpret_cast<const char*>(p.t.ptr()),
                  static_cast<std::streamsize>(p.t.numel() * sizeof(float)));
    for (auto& b : buffers)
        out.write(reinterpret_cast<const char*>(b.v->data()),
                  static_cast<std::streamsize>(b.v->size() * sizeof(float)));
    if (adam && !adam->m.empty()) {
        for (const auto& m : adam->m)
            out.write(reinterpret_cast<const char*>(m.data()),
                      static_cast<std::streamsize>(m.size() * sizeof(float)));
        for (const auto& v : adam->v)
            out.write(reinterpret_cast<const char*>(v.data()),
                      static_cast<std::streamsize>(v.size() * sizeof(float)));
    }
}

Model load_checkpoint(const std::string& path, uint64_t* seed,
                      std::vector<TrainLogEntry>* trace, AdamState<float>* adam) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open checkpoint " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw ValidationError(path + ": not a checkpoint file");
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    if (!in) throw ValidationError(path + ": truncated header");
    nlohmann::json header = nlohmann::json::parse(head);

    const uint64_t saved_seed = header.at("seed").get<uint64_t>();
    Model model = Model::build(config_from_json(header.at("config")), saved_seed);
    if (seed) *seed = saved_seed;
    if (trace) {
        trace->clear();
        for (const auto& e : header.at("trace"))
            trace->push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>()});
    }

    auto params = model.named_params();
    const auto& jp = header.at("params");
    if (jp.size() != params.size())
        throw ValidationError(path + ": parameter manifest does not match architecture");
    for (size_t i = 0; i < params.size(); ++i) {
        if (jp[i].at("name").get<std::string>() != params[i].name)
            throw ValidationError(path + ": parameter order mismatch at " + params[i].name);
        in.read(reinterpret_cast<char*>(params[i].t.ptr()),
                static_cast<std::streamsize>(params[i].t.numel() * sizeof(float)));
    }
    auto buffers = model.named_buffers();
    const auto& jb = header.at("buffers");
    if (jb.size() != buffers.size())
        throw ValidationError(path + ": buffer manifest does not match architecture");
    for (size_t i = 0; i < buffers.size(); ++i) {
        const size_t blen = jb[i].at("len").get<size_t>();
        buffers[i].v->resize(blen);
        in.read(reinterpret_cast<char*>(buffers[i].v->data()),
                static_cast<std::streamsize>(blen * sizeof(float)));
    }
    if (!in) throw ValidationError(path + ": truncated blobs");
    model.mark_stats_ready();

    if (adam && header.contains("adam")) {
        adam->reset();
        adam->step = header.at("adam").at("step").get<int64_t>();
        adam->m.resize(params.size());
        adam->v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            adam->m[i].resize(static_cast<size_t>(params[i].t.numel()));
            in.read(reinterpret_cast<char*>(adam->m[i].data()),
                    static_cast<std::streamsize>(adam->m[i].size() * sizeof(float)));
        }
        for (size_t i = 0; i < params.size(); ++i) {
            adam->v[i].resize(static_cast<size_t>(params[i].t.numel()));
            in.read(reinterpret_cast<char*>(adam->v[i].data()),
                    static_cast<std::streamsize>(adam->v[i].size() * sizeof(float)));
        }
        if (!in) throw ValidationError(path + ": truncated adam section");
    }
    return model;
}

}  // namespace hrd
