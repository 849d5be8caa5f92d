#include "affect/nn/serialize.hpp"

#include "affect/util/sha256.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace affect::nn {

namespace {
constexpr char kMagic[] = "AFFECTCKPT1\n";
constexpr std::size_t kMagicLen = sizeof(kMagic) - 1;
} // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    nlohmann::json desc;
    desc["kind"] = ckpt.kind;
    desc["seed"] = ckpt.seed;
    desc["meta"] = nlohmann::json::parse(ckpt.meta_json);
    auto& manifest = desc["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : ckpt.tensors)
        manifest.push_back({{"name", name},
                            {"shape", {t.shape.n, t.shape.c, t.shape.h, t.shape.w}}});
    const std::string head = desc.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, static_cast<std::streamsize>(kMagicLen));
    const std::uint32_t len = static_cast<std::uint32_t>(head.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, t] : ckpt.tensors)
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[kMagicLen];
    in.read(magic, static_cast<std::streamsize>(kMagicLen));
    if (!in || std::memcmp(magic, kMagic, kMagicLen) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    std::string head(len, '\0');
    in.read(head.data(), len);
    if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);

    const auto desc = nlohmann::json::parse(head);
    Checkpoint ckpt;
    ckpt.kind = desc.at("kind").get<std::string>();
    ckpt.seed = desc.at("seed").get<std::uint64_t>();
    ckpt.meta_json = desc.at("meta").dump();
    for (const auto& entry : desc.at("tensors")) {
        const auto sh = entry.at("shape");
        Tensor t(Shape{sh[0].get<int>(), sh[1].get<int>(), sh[2].get<int>(), sh[3].get<int>()});
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated weights in " + path);
        ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return ckpt;
}

Checkpoint snapshot(const std::string& kind, std::uint64_t seed, const std::string& meta_json,
                    const ParamStore& store) {
    Checkpoint ckpt;
    ckpt.kind = kind;
    ckpt.seed = seed;
    ckpt.meta_json = meta_json;
    for (std::size_t i = 0; i < store.size(); ++i)
        ckpt.tensors.emplace_back(store.names()[i], store.params()[i].value());
    return ckpt;
}

void restore(const Checkpoint& ckpt, ParamStore& store) {
    if (ckpt.tensors.size() != store.size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < store.size(); ++i) {
        const auto& [name, t] = ckpt.tensors[i];
        if (name != store.names()[i])
            throw std::runtime_error("checkpoint: tensor order mismatch at " + name);
        if (t.shape != store.params()[i].shape())
            throw std::runtime_error("checkpoint: shape mismatch for " + name);
        store.params()[i].node()->value = t;
    }
}

std::string weights_digest(const ParamStore& store) {
    Sha256 h;
    for (const auto& p : store.params())
        h.update(p.value().data.data(), static_cast<std::size_t>(p.value().data.size()) * sizeof(double));
    return h.hex();
}

} // namespace affect::nn
