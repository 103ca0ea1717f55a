#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>
#include <vector>

#include "patchforge/autodiff.hpp"
#include "patchforge/image.hpp"
#include "patchforge/tensor.hpp"

namespace patchforge {

// Unit-norm feature vector from a face-recognition oracle.
struct Embedding {
    Tensor vector;
    std::string model_id;
};

// Exact query metering: one increment per successful embed completion,
// atomic so interleaved callers stay consistent.
class QueryLog {
public:
    struct Record {
        std::chrono::system_clock::time_point timestamp;
        std::string model_id;
        std::string purpose;
    };

    std::uint64_t count() const { return count_.load(std::memory_order_relaxed); }

    void record(const std::string& model_id, const std::string& purpose) {
        std::lock_guard<std::mutex> lock(mutex_);
        records_.push_back({std::chrono::system_clock::now(), model_id, purpose});
        count_.fetch_add(1, std::memory_order_relaxed);
    }

    void reset() {
        std::lock_guard<std::mutex> lock(mutex_);
        records_.clear();
        count_.store(0, std::memory_order_relaxed);
    }

    std::vector<Record> records() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return records_;
    }

private:
    std::atomic<std::uint64_t> count_{0};
    mutable std::mutex mutex_;
    std::vector<Record> records_;
};

struct FRDecision {
    double similarity = 0.0;
    double threshold = 0.0;
    bool match = false;
};

// Black-box face recognition interface. embed() meters exactly one query
// per successful completion; transport failures do not count.
class FrOracle {
public:
    virtual ~FrOracle() = default;

    virtual std::string model_id() const = 0;
    virtual std::size_t embedding_dim() const = 0;

    Embedding embed(const FaceImage& image, const std::string& purpose = "embed");

    QueryLog& query_log() { return log_; }
    const QueryLog& query_log() const { return log_; }

protected:
    // May throw TransportError / ProtocolError; result is renormalized by embed().
    virtual Tensor raw_embed(const FaceImage& image) = 0;

    QueryLog log_;
};

// Oracles whose embedding admits backpropagation (local stand-ins).
// embed_ad still counts as one metered query.
class DifferentiableFrOracle : public FrOracle {
public:
    virtual ad::Var embed_ad(ad::Graph& g, ad::Var image,
                             const std::string& purpose = "embed") = 0;
};

// Seeded linear oracle: normalize(M . flatten(image)).
class LinearFrOracle : public DifferentiableFrOracle {
public:
    LinearFrOracle(std::size_t dim, std::size_t image_size, std::uint64_t seed,
                   std::string model_id = "linear-standin");
    // explicit [dim, image_size] projection, for structured stand-ins
    LinearFrOracle(Tensor matrix, std::string model_id = "linear-standin");

    std::string model_id() const override { return model_id_; }
    std::size_t embedding_dim() const override { return dim_; }
    ad::Var embed_ad(ad::Graph& g, ad::Var image, const std::string& purpose) override;

    const Tensor& matrix() const { return matrix_; }

protected:
    Tensor raw_embed(const FaceImage& image) override;

private:
    std::size_t dim_;
    Tensor matrix_;
    std::string model_id_;
};

// Client for the embedding-service wire protocol (POST /v1/embed).
class RemoteFrOracle : public FrOracle {
public:
    struct Options {
        std::string host = "127.0.0.1";
        int port = 0;
        std::string model_id = "remote";
        std::size_t expected_dim = 0;  // 0 -> accept any consistent dim
        int max_attempts = 3;
        double backoff_start_s = 0.5;  // doubled per retry
    };

    explicit RemoteFrOracle(Options opts);

    std::string model_id() const override { return opts_.model_id; }
    std::size_t embedding_dim() const override { return opts_.expected_dim; }

protected:
    Tensor raw_embed(const FaceImage& image) override;

private:
    Options opts_;
};

double cosine_similarity(const Embedding& a, const Embedding& b);

// match iff similarity >= threshold (inclusive rule)
FRDecision verify(const Embedding& a, const Embedding& b, double threshold);

// Accuracy-maximizing threshold over all midpoints between consecutive
// sorted observed similarities; ties break toward the larger threshold.
double calibrate_threshold(
    const std::vector<std::tuple<Embedding, Embedding, bool>>& labeled_pairs);

// One embedding per oracle; member failures surface the member id.
std::vector<Embedding> ensemble_embed(const std::vector<std::shared_ptr<FrOracle>>& oracles,
                                      const FaceImage& image);

}  // namespace patchforge
