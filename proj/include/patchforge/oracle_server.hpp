#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "patchforge/image.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {

// Loopback embedding service speaking the /v1/embed wire protocol.
// Ships for integration tests and the serve-oracle CLI command.
class OracleStubServer {
public:
    using EmbedFn = std::function<Tensor(const FaceImage&, const std::string& model)>;

    explicit OracleStubServer(EmbedFn embed, bool log_requests = false);
    ~OracleStubServer();

    OracleStubServer(const OracleStubServer&) = delete;
    OracleStubServer& operator=(const OracleStubServer&) = delete;

    // Binds and serves on a background thread; returns false if the port
    // is unavailable. port 0 picks a free port (see bound_port()).
    bool start(int port);
    void stop();
    int bound_port() const { return port_; }

    // Test hooks: fail the next n requests with HTTP 500, or truncate the
    // reported embedding to provoke protocol errors.
    void fail_next(int n) { fail_budget_.store(n); }
    void set_truncate_response(bool on) { truncate_.store(on); }

    std::uint64_t requests_served() const { return served_.load(); }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    EmbedFn embed_;
    bool log_requests_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> fail_budget_{0};
    std::atomic<bool> truncate_{false};
    std::atomic<std::uint64_t> served_{0};
};

}  // namespace patchforge
