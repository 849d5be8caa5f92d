#include "affect/semantic/caption.hpp"

#include "affect/util/sha256.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace affect::sem {

namespace fs = std::filesystem;

ManifestCaptionProvider::ManifestCaptionProvider(const core::DatasetManifest& m) : manifest_(m) {}

CaptionRecord ManifestCaptionProvider::caption_image(const std::string& path) {
    for (const auto& e : manifest_.entries) {
        if (e.image_path != path) continue;
        if (!e.caption || e.caption->empty())
            throw std::runtime_error("caption: manifest has no caption for " + path);
        return CaptionRecord{path, *e.caption, name()};
    }
    throw std::runtime_error("caption: " + path + " not in manifest");
}

std::string base64_encode(const std::string& bytes) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    for (std::size_t i = 0; i < bytes.size(); i += 3) {
        std::uint32_t v = static_cast<std::uint8_t>(bytes[i]) << 16;
        if (i + 1 < bytes.size()) v |= static_cast<std::uint8_t>(bytes[i + 1]) << 8;
        if (i + 2 < bytes.size()) v |= static_cast<std::uint8_t>(bytes[i + 2]);
        out += tbl[(v >> 18) & 63];
        out += tbl[(v >> 12) & 63];
        out += i + 1 < bytes.size() ? tbl[(v >> 6) & 63] : '=';
        out += i + 2 < bytes.size() ? tbl[v & 63] : '=';
    }
    return out;
}

HttpCaptionProvider::HttpCaptionProvider(HttpCaptionConfig cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.cache_dir.empty()) fs::create_directories(fs::path(cfg_.cache_dir) / "captions");
}

CaptionRecord HttpCaptionProvider::caption_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("caption: cannot open " + path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string key = sha256_hex(bytes);

    fs::path cache_file;
    if (!cfg_.cache_dir.empty()) {
        cache_file = fs::path(cfg_.cache_dir) / "captions" / (key + ".json");
        if (fs::exists(cache_file)) {
            std::ifstream cf(cache_file);
            const auto j = nlohmann::json::parse(cf);
            return CaptionRecord{path, j.at("caption").get<std::string>(), name()};
        }
    }

    nlohmann::json req;
    req["image_b64"] = base64_encode(bytes);
    req["instruction"] = cfg_.instruction;
    const std::string body = req.dump();

    std::string last_error = "no attempt made";
    double backoff = cfg_.backoff_initial_s;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
        httplib::Client client(cfg_.host, cfg_.port);
        client.set_connection_timeout(cfg_.timeout_s, 0);
        client.set_read_timeout(cfg_.timeout_s, 0);
        auto res = client.Post(cfg_.route, body, "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        std::string caption;
        try {
            caption = nlohmann::json::parse(res->body).at("caption").get<std::string>();
        } catch (const std::exception& e) {
            last_error = std::string("bad response: ") + e.what();
            continue;
        }
        if (caption.empty()) {
            last_error = "empty caption in response";
            continue;
        }
        if (!cache_file.empty()) {
            nlohmann::json out;
            out["caption"] = caption;
            out["image_path"] = path;
            out["sha256"] = key;
            std::ofstream cf(cache_file);
            cf << out.dump(2);
        }
        return CaptionRecord{path, caption, name()};
    }
    throw std::runtime_error("caption: remote failed after " + std::to_string(cfg_.retries + 1) +
                             " attempts (" + last_error + ") for " + path);
}

} // namespace affect::sem
