#include "semattn/checkpoint.hpp"

#include <cstring>

#include "semattn/errors.hpp"
#include "semattn/util/binary.hpp"
#include "semattn/util/fs.hpp"

namespace semattn {

namespace {

constexpr char kMagic[8] = {'S', 'E', 'M', 'A', 'T', 'T', 'N', '\0'};

bool in_groups(const std::string& name, const std::vector<std::string>& groups) {
    for (const auto& g : groups) {
        if (name.size() > g.size() && name.compare(0, g.size(), g) == 0 && name[g.size()] == '.') return true;
    }
    return false;
}

template <typename Fn>
void visit_state(SceneModel& model, const std::vector<std::string>& groups, Fn&& fn) {
    for (const auto& g : groups) {
        model.visit_parameters([&](const std::string& name, nn::Parameter& p) { fn(name, p.value); }, g);
        model.visit_buffers([&](const std::string& name, Tensor& t) { fn(name, t); }, g);
    }
}

}  // namespace

bool Checkpoint::has_group(const std::string& group) const {
    const auto it = tensors.lower_bound(group + ".");
    return it != tensors.end() && in_groups(it->first, {group});
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    nlohmann::json blobs = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : ckpt.tensors) {
        const std::uint64_t bytes = t.numel() * sizeof(double);
        blobs.push_back({{"name", name}, {"dtype", "f64"}, {"shape", t.shape()}, {"offset", offset}, {"nbytes", bytes}});
        offset += bytes;
    }
    const nlohmann::json header = {{"format_version", ckpt.format_version},
                                   {"model_config", to_json(ckpt.model_config)},
                                   {"stage", ckpt.stage},
                                   {"epoch", ckpt.epoch},
                                   {"seed", ckpt.seed},
                                   {"extra", ckpt.extra},
                                   {"blobs", blobs}};
    const std::string text = header.dump();
    std::string out(kMagic, sizeof(kMagic));
    util::put_le<std::uint64_t>(out, text.size());
    out += text;
    out.reserve(out.size() + offset);
    for (const auto& [name, t] : ckpt.tensors) {
        for (double v : t.values()) util::put_le<double>(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& context) {
    util::ByteReader reader(bytes, context);
    if (reader.take(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw FormatError(context + ": not a checkpoint (bad magic)");
    }
    const auto header_len = reader.get<std::uint64_t>();
    if (header_len > reader.remaining()) throw FormatError(context + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(reader.take(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(context + ": malformed header: " + e.what());
    }
    Checkpoint ckpt;
    std::uint64_t expected = 0;
    try {
        ckpt.format_version = header.at("format_version").get<int>();
        if (ckpt.format_version != kCheckpointVersion) {
            throw FormatError(context + ": unsupported format_version " + std::to_string(ckpt.format_version));
        }
        ckpt.model_config = model_config_from_json(header.at("model_config"));
        ckpt.stage = header.at("stage").get<std::string>();
        ckpt.epoch = header.at("epoch").get<int>();
        ckpt.seed = header.at("seed").get<std::uint64_t>();
        ckpt.extra = header.at("extra");
        for (const auto& b : header.at("blobs")) {
            if (b.at("dtype").get<std::string>() != "f64") throw FormatError(context + ": unsupported dtype");
            if (b.at("offset").get<std::uint64_t>() != expected) throw FormatError(context + ": blob offsets not contiguous");
            Tensor t(b.at("shape").get<std::vector<int>>());
            const auto nbytes = b.at("nbytes").get<std::uint64_t>();
            if (nbytes != t.numel() * sizeof(double)) throw FormatError(context + ": blob size does not match shape");
            expected += nbytes;
            ckpt.tensors.emplace(b.at("name").get<std::string>(), std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(context + ": malformed header: " + e.what());
    }
    if (reader.remaining() != expected) throw FormatError(context + ": payload size does not match header");
    for (auto& [name, t] : ckpt.tensors) {
        for (double& v : t.values()) v = reader.get<double>();
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    util::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    return decode_checkpoint(util::read_file(path), path.string());
}

void store_groups(SceneModel& model, Checkpoint& ckpt, const std::vector<std::string>& groups) {
    visit_state(model, groups, [&](const std::string& name, const Tensor& t) { ckpt.tensors[name] = t; });
}

void load_groups(SceneModel& model, const Checkpoint& ckpt, const std::vector<std::string>& groups) {
    visit_state(model, groups, [&](const std::string& name, Tensor& t) {
        const auto it = ckpt.tensors.find(name);
        if (it == ckpt.tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
        if (!it->second.same_shape(t)) {
            throw FormatError("checkpoint tensor '" + name + "' has shape " + it->second.shape_str() + ", model expects " +
                              t.shape_str());
        }
        t = it->second;
    });
}

std::uint64_t state_hash(SceneModel& model, const std::vector<std::string>& groups) {
    std::uint64_t h = 1469598103934665603ULL;
    visit_state(model, groups, [&h](const std::string& name, const Tensor& t) {
        for (unsigned char c : name) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        for (double v : t.values()) {
            unsigned char raw[sizeof(double)];
            std::memcpy(raw, &v, sizeof(double));
            for (unsigned char c : raw) {
                h ^= c;
                h *= 1099511628211ULL;
            }
        }
    });
    return h;
}

}  // namespace semattn
