#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "mohsm/common.hpp"

namespace mohsm {

/// Minimal HTTP GET abstraction so fetch_series is testable without network.
class Transport {
public:
    struct Response {
        int status = 0;
        std::string body;
    };
    virtual ~Transport() = default;
    virtual Response get(const std::string& url) = 0;
};

/// Cache directory: $MOHSM_CACHE_DIR or ./.mohsm_cache.
inline std::filesystem::path fetch_cache_dir() {
    if (const char* env = std::getenv("MOHSM_CACHE_DIR")) return env;
    return ".mohsm_cache";
}

namespace detail {

inline std::string cache_key(const std::string& url) {
    std::ostringstream out;
    for (char c : url) out << (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out.str();
}

}  // namespace detail

/// Downloads a raw series file with up to 3 attempts and caches it on disk;
/// a cache hit returns the cached path without touching the transport.
inline std::filesystem::path fetch_series(const std::string& url, Transport& transport) {
    const auto dir = fetch_cache_dir();
    const auto path = dir / detail::cache_key(url);
    if (std::filesystem::exists(path)) return path;

    std::string last_error;
    for (int attempt = 1; attempt <= 3; ++attempt) {
        Transport::Response resp;
        try {
            resp = transport.get(url);
        } catch (const std::exception& e) {
            last_error = e.what();
            continue;
        }
        if (resp.status == 200) {
            std::filesystem::create_directories(dir);
            std::ofstream out(path, std::ios::binary);
            if (!out) throw IoError("cannot write cache file: " + path.string());
            out.write(resp.body.data(), static_cast<std::streamsize>(resp.body.size()));
            if (!out) throw IoError("write failed: " + path.string());
            return path;
        }
        last_error = "HTTP status " + std::to_string(resp.status);
    }
    throw IoError("fetch failed after 3 attempts for " + url + ": " + last_error);
}

}  // namespace mohsm
