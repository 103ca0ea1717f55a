#include "patchforge/oracle_server.hpp"

#include <iostream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "patchforge/base64.hpp"
#include "patchforge/errors.hpp"
#include "patchforge/png_io.hpp"

namespace patchforge {

struct OracleStubServer::Impl {
    httplib::Server server;
};

OracleStubServer::OracleStubServer(EmbedFn embed, bool log_requests)
    : impl_(std::make_unique<Impl>()), embed_(std::move(embed)), log_requests_(log_requests) {}

OracleStubServer::~OracleStubServer() { stop(); }

bool OracleStubServer::start(int port) {
    auto& srv = impl_->server;

    srv.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
        served_.fetch_add(1);
        if (fail_budget_.load() > 0) {
            fail_budget_.fetch_sub(1);
            res.status = 500;
            res.set_content(R"({"error":"injected failure"})", "application/json");
            return;
        }
        auto reject = [&res](const std::string& msg) {
            res.status = 400;
            nlohmann::json err;
            err["error"] = msg;
            res.set_content(err.dump(), "application/json");
        };
        nlohmann::json body;
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception&) {
            reject("request body is not valid JSON");
            return;
        }
        if (!body.contains("image_png_b64") || !body["image_png_b64"].is_string()) {
            reject("missing image_png_b64 field");
            return;
        }
        const std::string model = body.value("model", "default");
        FaceImage image;
        try {
            auto png_bytes = base64_decode(body["image_png_b64"].get<std::string>());
            image = FaceImage(png::to_rgb_tensor(png::decode(png_bytes)));
        } catch (const Error& e) {
            reject(std::string("cannot decode image: ") + e.what());
            return;
        }
        Tensor emb;
        try {
            emb = embed_(image, model);
        } catch (const Error& e) {
            reject(std::string("embedding failed: ") + e.what());
            return;
        }
        if (log_requests_)
            std::clog << "serve-oracle: embed model=" << model << " dim=" << emb.size() << "\n";
        nlohmann::json resp;
        resp["embedding"] = emb.v;
        if (truncate_.load() && !resp["embedding"].empty()) resp["embedding"].erase(0);
        resp["model"] = model;
        resp["dim"] = emb.size();
        res.set_content(resp.dump(), "application/json");
    });

    if (port == 0) {
        port_ = srv.bind_to_any_port("127.0.0.1");
        if (port_ < 0) return false;
    } else {
        if (!srv.bind_to_port("127.0.0.1", port)) return false;
        port_ = port;
    }
    thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
    srv.wait_until_ready();
    return true;
}

void OracleStubServer::stop() {
    if (thread_.joinable()) {
        impl_->server.stop();
        thread_.join();
    }
}

}  // namespace patchforge
