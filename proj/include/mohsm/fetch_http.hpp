#pragma once

#include <httplib.h>

#include <string>

#include "mohsm/fetch.hpp"

namespace mohsm {

/// Default cpp-httplib transport (plain HTTP; redirects followed).
class HttpTransport final : public Transport {
public:
    Response get(const std::string& url) override {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw IoError("malformed URL: " + url);
        const auto host_start = scheme_end + 3;
        const auto path_start = url.find('/', host_start);
        const std::string origin = url.substr(0, path_start == std::string::npos
                                                     ? url.size()
                                                     : path_start);
        const std::string path =
            path_start == std::string::npos ? "/" : url.substr(path_start);
        httplib::Client client(origin);
        client.set_follow_location(true);
        auto res = client.Get(path);
        if (!res) throw IoError("connection failed: " + url);
        return {res->status, res->body};
    }
};

}  // namespace mohsm
