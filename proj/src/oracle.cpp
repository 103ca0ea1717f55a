#include "patchforge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "patchforge/base64.hpp"
#include "patchforge/png_io.hpp"
#include "patchforge/rng.hpp"

namespace patchforge {

Embedding FrOracle::embed(const FaceImage& image, const std::string& purpose) {
    Tensor raw = raw_embed(image);  // may throw before metering
    const double nrm = l2_norm(raw);
    if (nrm < 1e-12) throw InputError("oracle returned a zero-norm embedding");
    raw *= 1.0 / nrm;
    log_.record(model_id(), purpose);
    return {std::move(raw), model_id()};
}

LinearFrOracle::LinearFrOracle(std::size_t dim, std::size_t image_size, std::uint64_t seed,
                               std::string model_id)
    : dim_(dim), model_id_(std::move(model_id)) {
    if (dim == 0 || image_size == 0) throw ConfigError("LinearFrOracle: zero dimension");
    Rng rng(seed);
    matrix_ = Tensor({dim, image_size}, 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(image_size));
    for (auto& x : matrix_.v) x = scale * rng.gaussian();
}

LinearFrOracle::LinearFrOracle(Tensor matrix, std::string model_id)
    : dim_(0), matrix_(std::move(matrix)), model_id_(std::move(model_id)) {
    if (matrix_.shape.size() != 2 || matrix_.shape[0] == 0 || matrix_.shape[1] == 0)
        throw ConfigError("LinearFrOracle: matrix must be [dim, image_size]");
    dim_ = matrix_.shape[0];
}

Tensor LinearFrOracle::raw_embed(const FaceImage& image) {
    if (image.pixels.size() != matrix_.shape[1])
        throw ConfigError("LinearFrOracle: image size does not match oracle matrix");
    Tensor out({dim_}, 0.0);
    for (std::size_t r = 0; r < dim_; ++r) {
        double acc = 0.0;
        const double* row = &matrix_.v[r * matrix_.shape[1]];
        for (std::size_t i = 0; i < image.pixels.size(); ++i) acc += row[i] * image.pixels.v[i];
        out.v[r] = acc;
    }
    return out;
}

ad::Var LinearFrOracle::embed_ad(ad::Graph& g, ad::Var image, const std::string& purpose) {
    if (g.value(image).size() != matrix_.shape[1])
        throw ConfigError("LinearFrOracle: image size does not match oracle matrix");
    ad::Var emb = g.normalize_l2(g.matvec(matrix_, image));
    log_.record(model_id_, purpose);
    return emb;
}

RemoteFrOracle::RemoteFrOracle(Options opts) : opts_(std::move(opts)) {
    if (opts_.port <= 0) throw ConfigError("RemoteFrOracle: invalid port");
    if (opts_.max_attempts < 1) throw ConfigError("RemoteFrOracle: max_attempts must be >= 1");
}

Tensor RemoteFrOracle::raw_embed(const FaceImage& image) {
    nlohmann::json req;
    req["image_png_b64"] = base64_encode(png::encode(png::from_rgb_tensor(image.pixels)));
    req["model"] = opts_.model_id;
    const std::string body = req.dump();

    std::string last_error;
    double backoff = opts_.backoff_start_s;
    for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
            backoff *= 2.0;
        }
        httplib::Client client(opts_.host, opts_.port);
        client.set_connection_timeout(5, 0);
        auto res = client.Post("/v1/embed", body, "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            if (res->status >= 400 && res->status < 500) {
                std::string msg = res->body;
                try {
                    msg = nlohmann::json::parse(res->body).value("error", res->body);
                } catch (const nlohmann::json::exception&) {
                }
                throw ProtocolError("embedding service rejected request (" +
                                    std::to_string(res->status) + "): " + msg);
            }
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json resp;
        try {
            resp = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProtocolError(std::string("embedding service returned invalid JSON: ") + e.what());
        }
        if (!resp.contains("embedding") || !resp["embedding"].is_array() || !resp.contains("dim"))
            throw ProtocolError("embedding service response missing required fields");
        std::vector<double> values;
        for (const auto& x : resp["embedding"]) {
            if (!x.is_number()) throw ProtocolError("embedding service returned non-numeric entry");
            values.push_back(x.get<double>());
        }
        if (resp["dim"].get<std::size_t>() != values.size())
            throw ProtocolError("embedding service dim field disagrees with vector length");
        if (opts_.expected_dim != 0 && values.size() != opts_.expected_dim)
            throw ProtocolError("embedding service returned unexpected dimension " +
                                std::to_string(values.size()));
        std::size_t dim = values.size();
        return Tensor({dim}, std::move(values));
    }
    throw TransportError("embedding service unreachable after " +
                         std::to_string(opts_.max_attempts) + " attempts: " + last_error);
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.vector.size() != b.vector.size())
        throw InputError("cosine_similarity: embedding dimension mismatch");
    double d = dot(a.vector, b.vector);
    return std::min(1.0, std::max(-1.0, d));
}

FRDecision verify(const Embedding& a, const Embedding& b, double threshold) {
    const double sim = cosine_similarity(a, b);
    return {sim, threshold, sim >= threshold};
}

double calibrate_threshold(
    const std::vector<std::tuple<Embedding, Embedding, bool>>& labeled_pairs) {
    std::size_t positives = 0, negatives = 0;
    std::vector<std::pair<double, bool>> sims;
    sims.reserve(labeled_pairs.size());
    for (const auto& [a, b, same] : labeled_pairs) {
        sims.emplace_back(cosine_similarity(a, b), same);
        (same ? positives : negatives)++;
    }
    if (positives == 0 || negatives == 0)
        throw CalibrationError("calibration requires both positive and negative pairs");

    std::vector<double> sorted;
    sorted.reserve(sims.size());
    for (const auto& [s, same] : sims) sorted.push_back(s);
    std::sort(sorted.begin(), sorted.end());
    // midpoints between distinct consecutive similarities; duplicates add
    // no decision boundary and would skew the larger-threshold tie rule
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<double> candidates;
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
    // inseparable data has a single distinct similarity; use it directly
    if (candidates.empty()) candidates.push_back(sorted.front());

    double best_threshold = candidates.front();
    std::size_t best_correct = 0;
    for (double tau : candidates) {
        std::size_t correct = 0;
        for (const auto& [s, same] : sims)
            if ((s >= tau) == same) ++correct;
        if (correct > best_correct || (correct == best_correct && tau > best_threshold)) {
            best_correct = correct;
            best_threshold = tau;
        }
    }
    return best_threshold;
}

std::vector<Embedding> ensemble_embed(const std::vector<std::shared_ptr<FrOracle>>& oracles,
                                      const FaceImage& image) {
    if (oracles.empty()) throw InputError("ensemble_embed: no oracles");
    std::vector<Embedding> out;
    out.reserve(oracles.size());
    for (const auto& o : oracles) {
        try {
            out.push_back(o->embed(image, "ensemble"));
        } catch (const Error& e) {
            throw Error("ensemble member '" + o->model_id() + "' failed: " + e.what());
        }
    }
    return out;
}

}  // namespace patchforge
