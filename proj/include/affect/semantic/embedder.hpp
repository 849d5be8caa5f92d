#pragma once

#include "affect/core/image.hpp"
#include "affect/nn/layers.hpp"
#include "affect/nn/serialize.hpp"

#include <Eigen/Core>

#include <vector>

namespace affect::sem {

struct SemanticEmbedding {
    Eigen::VectorXd vector;
};

// a.b / (|a||b|), in [-1,1]
double cosine_similarity(const SemanticEmbedding& a, const SemanticEmbedding& b);

// Joint-embedding provider: the encoder half of a small convolutional
// autoencoder trained on the experiment corpus. Any external embedding model
// can be substituted behind embed(); the in-process network is the one the
// optimization objectives differentiate through.
class Embedder {
public:
    static constexpr int kInput = 32; // analysis resolution
    static constexpr int kDim = 32;

    explicit Embedder(std::uint64_t seed);

    struct TrainReport {
        std::vector<double> loss_per_epoch;
        double final_mse = 0.0;
    };
    TrainReport train(const std::vector<core::Image>& corpus, int epochs, double lr,
                      int batch_size = 16);

    SemanticEmbedding embed(const core::Image& img) const;
    // differentiable path; x is [1,3,h,w] in [0,1], output [1,kDim,1,1]
    nn::Var embed_var(const nn::Var& x) const;

    bool trained() const { return trained_; }
    nn::Checkpoint checkpoint() const;
    static Embedder from_checkpoint(const nn::Checkpoint& ckpt);
    std::string weights_digest() const { return nn::weights_digest(params_); }

private:
    nn::Var decode_var(const nn::Var& z) const;
    void build(std::uint64_t seed);

    nn::ParamStore params_;
    std::uint64_t seed_;
    bool trained_ = false;
    // encoder
    nn::Var e1w_, e1b_, e2w_, e2b_, e3w_, e3b_;
    // decoder
    nn::Var d0w_, d0b_, d1w_, d1b_, d2w_, d2b_, d3w_, d3b_;
};

} // namespace affect::sem
