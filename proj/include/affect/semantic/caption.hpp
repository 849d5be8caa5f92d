#pragma once

#include "affect/core/manifest.hpp"

#include <memory>
#include <string>

namespace affect::sem {

struct CaptionRecord {
    std::string image_path;
    std::string caption;
    std::string provider;
};

class CaptionProvider {
public:
    virtual ~CaptionProvider() = default;
    virtual CaptionRecord caption_image(const std::string& path) = 0;
    virtual std::string name() const = 0;
};

// Looks captions up in an ingested manifest; a missing caption is an error,
// never an empty string.
class ManifestCaptionProvider : public CaptionProvider {
public:
    explicit ManifestCaptionProvider(const core::DatasetManifest& m);
    CaptionRecord caption_image(const std::string& path) override;
    std::string name() const override { return "manifest"; }

private:
    core::DatasetManifest manifest_;
};

// Remote vision-language endpoint: POST {image_b64, instruction} -> {caption}.
// Responses are cached on disk under <cache_dir>/captions/<sha256>.json keyed
// by the image file content; a cache hit performs no remote call.
struct HttpCaptionConfig {
    std::string host;          // e.g. "127.0.0.1"
    int port = 80;
    std::string route = "/caption";
    std::string instruction = "Provide a descriptive caption usable as a dataset label.";
    std::string cache_dir;     // empty disables caching
    int retries = 3;
    double backoff_initial_s = 0.5; // doubles per attempt
    int timeout_s = 30;
};

class HttpCaptionProvider : public CaptionProvider {
public:
    explicit HttpCaptionProvider(HttpCaptionConfig cfg);
    CaptionRecord caption_image(const std::string& path) override;
    std::string name() const override { return "http"; }

private:
    HttpCaptionConfig cfg_;
};

std::string base64_encode(const std::string& bytes);

} // namespace affect::sem
