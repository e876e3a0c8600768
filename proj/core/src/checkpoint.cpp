#include "c2f/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace c2f::model {

namespace {

constexpr char kMagic[8] = {'C', '2', 'F', 'C', 'K', 'P', 'T', '\n'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::vector<double>& v) {
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint truncated");
}

std::string task_name(TaskKind k) {
    return k == TaskKind::SingleLabel ? "single_label" : "multi_label";
}

TaskKind task_from_name(const std::string& s) {
    if (s == "single_label") return TaskKind::SingleLabel;
    if (s == "multi_label") return TaskKind::MultiLabel;
    throw std::runtime_error("checkpoint: unknown task kind '" + s + "'");
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);

    nlohmann::json meta;
    meta["embed_dim"] = ckpt.cfg.embed_dim;
    meta["num_layers"] = ckpt.cfg.num_layers;
    meta["num_heads"] = ckpt.cfg.num_heads;
    meta["mlp_ratio"] = ckpt.cfg.mlp_ratio;
    meta["num_classes"] = ckpt.cfg.num_classes;
    meta["task"] = task_name(ckpt.cfg.task_kind);
    meta["patch_h"] = ckpt.cfg.patch.height_bins;
    meta["patch_w"] = ckpt.cfg.patch.width_frames;
    meta["dropout"] = ckpt.cfg.dropout;
    meta["phase_method"] = compress::method_name(ckpt.phase.method);
    meta["phase_factor"] = ckpt.phase.factor;
    meta["grid_f"] = ckpt.params.posemb.grid_f;
    meta["grid_t"] = ckpt.params.posemb.grid_t;
    meta["kernel_width"] =
        ckpt.params.patch_kernel.rows / ckpt.cfg.patch.height_bins;
    meta["seed"] = ckpt.seed;
    meta["has_opt_state"] = ckpt.has_opt_state;
    meta["opt_step"] = ckpt.has_opt_state ? ckpt.opt.step_count : 0;
    const std::string json = meta.dump();

    os.write(kMagic, sizeof(kMagic));
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(json.size()));
    os.write(json.data(), static_cast<std::streamsize>(json.size()));

    const auto refs = tensor_refs(ckpt.params);
    write_u32(os, static_cast<std::uint32_t>(refs.size()));
    for (const auto& ref : refs) {
        write_u32(os, static_cast<std::uint32_t>(ref.name.size()));
        os.write(ref.name.data(), static_cast<std::streamsize>(ref.name.size()));
        write_u32(os, static_cast<std::uint32_t>(ref.shape.size()));
        for (int dim : ref.shape) write_u32(os, static_cast<std::uint32_t>(dim));
        write_doubles(os, *ref.data);
    }
    if (ckpt.has_opt_state) {
        if (ckpt.opt.m.size() != refs.size() || ckpt.opt.v.size() != refs.size())
            throw std::runtime_error("optimizer state does not match parameter tensors");
        for (std::size_t i = 0; i < refs.size(); ++i) {
            write_doubles(os, ckpt.opt.m[i]);
            write_doubles(os, ckpt.opt.v[i]);
        }
    }
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

    const std::uint32_t json_len = read_u32(is);
    std::string json(json_len, '\0');
    is.read(json.data(), json_len);
    if (!is) throw std::runtime_error("checkpoint truncated");
    nlohmann::json meta = nlohmann::json::parse(json);

    Checkpoint ckpt;
    ckpt.cfg.embed_dim = meta.at("embed_dim").get<int>();
    ckpt.cfg.num_layers = meta.at("num_layers").get<int>();
    ckpt.cfg.num_heads = meta.at("num_heads").get<int>();
    ckpt.cfg.mlp_ratio = meta.at("mlp_ratio").get<int>();
    ckpt.cfg.num_classes = meta.at("num_classes").get<int>();
    ckpt.cfg.task_kind = task_from_name(meta.at("task").get<std::string>());
    ckpt.cfg.patch.height_bins = meta.at("patch_h").get<int>();
    ckpt.cfg.patch.width_frames = meta.at("patch_w").get<int>();
    ckpt.cfg.dropout = meta.at("dropout").get<double>();
    ckpt.phase.method = compress::method_from_name(meta.at("phase_method").get<std::string>());
    ckpt.phase.factor = meta.at("phase_factor").get<int>();
    ckpt.seed = meta.at("seed").get<std::uint64_t>();
    ckpt.has_opt_state = meta.at("has_opt_state").get<bool>();

    const tok::GridDims grid{meta.at("grid_f").get<int>(), meta.at("grid_t").get<int>()};
    const int kernel_width = meta.at("kernel_width").get<int>();
    ckpt.params = allocate_parameters(ckpt.cfg, grid, kernel_width);

    auto refs = tensor_refs(ckpt.params);
    std::map<std::string, std::size_t> by_name;
    for (std::size_t i = 0; i < refs.size(); ++i) by_name[refs[i].name] = i;

    const std::uint32_t count = read_u32(is);
    if (count != refs.size())
        throw std::runtime_error("checkpoint tensor count does not match config");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t ndim = read_u32(is);
        std::size_t total = 1;
        for (std::uint32_t k = 0; k < ndim; ++k) total *= read_u32(is);
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint holds unknown tensor '" + name + "'");
        auto& dst = *refs[it->second].data;
        if (dst.size() != total)
            throw std::runtime_error("checkpoint tensor '" + name + "' has unexpected size");
        read_doubles(is, dst);
    }

    if (ckpt.has_opt_state) {
        ckpt.opt = make_adam_state(ckpt.params);
        ckpt.opt.step_count = meta.at("opt_step").get<long long>();
        for (std::size_t i = 0; i < refs.size(); ++i) {
            read_doubles(is, ckpt.opt.m[i]);
            read_doubles(is, ckpt.opt.v[i]);
        }
    }
    return ckpt;
}

}  // namespace c2f::model
