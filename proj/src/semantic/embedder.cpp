#include "affect/semantic/embedder.hpp"

#include "affect/transforms/diff_transforms.hpp"
#include "affect/util/rng.hpp"

#include <nlohmann/json.hpp>

#include <numeric>
#include <stdexcept>

namespace affect::sem {

using nn::Var;

double cosine_similarity(const SemanticEmbedding& a, const SemanticEmbedding& b) {
    if (a.vector.size() != b.vector.size())
        throw std::invalid_argument("cosine: dimension mismatch");
    const double na = a.vector.norm(), nb = b.vector.norm();
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("cosine: zero-norm embedding");
    return a.vector.dot(b.vector) / (na * nb);
}

Embedder::Embedder(std::uint64_t seed) : seed_(seed) { build(seed); }

void Embedder::build(std::uint64_t seed) {
    Rng rng(splitmix64(seed ^ 0xE3BEDDE2ULL));
    auto conv = [&](const char* name, int oc, int ic) {
        Var w = params_.add(std::string(name) + ".w", nn::init_conv(oc, ic, 3, 3, rng));
        Var b = params_.add(std::string(name) + ".b", nn::Tensor(nn::Shape{oc, 1, 1, 1}));
        return std::pair{w, b};
    };
    std::tie(e1w_, e1b_) = conv("enc1", 12, 3);
    std::tie(e2w_, e2b_) = conv("enc2", 24, 12);
    std::tie(e3w_, e3b_) = conv("enc3", kDim, 24);
    d0w_ = params_.add("dec0.w", nn::init_linear(24 * 4 * 4, kDim, rng));
    d0b_ = params_.add("dec0.b", nn::Tensor(nn::Shape{24 * 4 * 4, 1, 1, 1}));
    std::tie(d1w_, d1b_) = conv("dec1", 16, 24);
    std::tie(d2w_, d2b_) = conv("dec2", 12, 16);
    std::tie(d3w_, d3b_) = conv("dec3", 3, 12);
}

Var Embedder::embed_var(const Var& x) const {
    Var h = nn::bilinear_resize(x, kInput, kInput);
    h = nn::avgpool2(nn::silu(nn::conv2d(h, e1w_, e1b_, 1)));  // 16
    h = nn::avgpool2(nn::silu(nn::conv2d(h, e2w_, e2b_, 1)));  // 8
    h = nn::avgpool2(nn::silu(nn::conv2d(h, e3w_, e3b_, 1)));  // 4
    return nn::global_avg_pool(h);                             // [n,kDim]
}

Var Embedder::decode_var(const Var& z) const {
    const int n = z.shape().n;
    Var h = nn::silu(nn::linear(z, d0w_, d0b_));
    h = nn::reshape(h, nn::Shape{n, 24, 4, 4});
    h = nn::silu(nn::conv2d(nn::upsample2(h), d1w_, d1b_, 1));  // 8
    h = nn::silu(nn::conv2d(nn::upsample2(h), d2w_, d2b_, 1));  // 16
    h = nn::sigmoid(nn::conv2d(nn::upsample2(h), d3w_, d3b_, 1)); // 32
    return h;
}

Embedder::TrainReport Embedder::train(const std::vector<core::Image>& corpus, int epochs,
                                      double lr, int batch_size) {
    if (corpus.empty()) throw std::invalid_argument("embedder: empty corpus");
    // pre-resize once
    std::vector<nn::Tensor> data;
    data.reserve(corpus.size());
    for (const auto& img : corpus) {
        const core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
        data.push_back(tx::image_to_tensor(core::resize_bilinear(rgb, kInput, kInput)));
    }

    nn::Adam opt(params_.params(), lr);
    Rng rng(splitmix64(seed_ ^ 0x7EA1));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with the run rng keeps epochs deterministic
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const int bn = static_cast<int>(std::min<std::size_t>(batch_size, order.size() - start));
            nn::Tensor batch(nn::Shape{bn, 3, kInput, kInput});
            for (int i = 0; i < bn; ++i)
                batch.data.segment(static_cast<Eigen::Index>(i) * 3 * kInput * kInput,
                                   3 * kInput * kInput) = data[order[start + i]].data;
            Var x = Var::constant(batch);
            Var loss = nn::mse_loss(decode_var(embed_var(x)), x);
            nn::backward(loss);
            opt.step();
            epoch_loss += loss.scalar_value();
            ++batches;
        }
        report.loss_per_epoch.push_back(epoch_loss / batches);
    }
    report.final_mse = report.loss_per_epoch.empty() ? 0.0 : report.loss_per_epoch.back();
    trained_ = true;
    return report;
}

SemanticEmbedding Embedder::embed(const core::Image& img) const {
    if (!trained_) throw std::logic_error("embedder: not trained");
    const core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
    const Var z = embed_var(Var::constant(tx::image_to_tensor(rgb)));
    SemanticEmbedding e;
    e.vector = Eigen::VectorXd::Map(z.value().data.data(), z.value().size());
    if (!e.vector.allFinite() || e.vector.norm() == 0.0)
        throw std::runtime_error("embedder: invalid embedding");
    return e;
}

nn::Checkpoint Embedder::checkpoint() const {
    nlohmann::json meta;
    meta["input"] = kInput;
    meta["dim"] = kDim;
    meta["trained"] = trained_;
    return nn::snapshot("embedder", seed_, meta.dump(), params_);
}

Embedder Embedder::from_checkpoint(const nn::Checkpoint& ckpt) {
    if (ckpt.kind != "embedder") throw std::runtime_error("checkpoint kind mismatch: " + ckpt.kind);
    Embedder e(ckpt.seed);
    nn::restore(ckpt, e.params_);
    e.trained_ = nlohmann::json::parse(ckpt.meta_json).value("trained", true);
    return e;
}

} // namespace affect::sem
