#pragma once

#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

namespace affect {

// Minimal SHA-256 (FIPS 180-4). Used for content-addressed caches; not a
// performance-critical path.
class Sha256 {
public:
    Sha256();
    void update(const void* data, std::size_t len);
    void update(const std::string& s) { update(s.data(), s.size()); }
    // hex digest; finalizes a copy, so the object can keep accumulating
    std::string hex() const;

private:
    void process(const std::uint8_t* block);
    std::uint32_t h_[8];
    std::uint8_t buf_[64];
    std::size_t buf_len_ = 0;
    std::uint64_t total_ = 0;
};

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);

} // namespace affect
