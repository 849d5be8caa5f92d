#include "affect/adapters/parametric.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <stdexcept>

namespace affect::adapters {

using nn::Var;

AdaptationResult optimize_params(const core::Image& img, const core::EmotionReference& ref,
                                 const reg::PixelRegressor& R, const sem::Embedder& embedder,
                                 const ParametricOptions& opts) {
    if (opts.w1 < 0 || opts.w2 < 0) throw std::invalid_argument("optimize_params: negative weights");
    if (opts.iters < 1) throw std::invalid_argument("optimize_params: iters must be >= 1");
    ref.validate();
    opts.bounds.validate();
    if (!R.trained() || !embedder.trained())
        throw std::logic_error("optimize_params: models must be trained");

    const Var x = Var::constant(tx::image_to_tensor(img));
    const Var target_emb = Var::constant(embedder.embed_var(x).value());
    nn::Tensor ref_t(nn::Shape{1, 2, 1, 1});
    ref_t.data[0] = ref.valence_ref;
    ref_t.data[1] = ref.arousal_ref;
    const Var ref_v = Var::constant(ref_t);

    tx::ParamVars vars = tx::ParamVars::leaves(tx::identity_params(), true);
    nn::Adam opt(vars.list(), opts.lr, 0.9, 0.0);

    auto objective = [&] {
        Var out = tx::transform_chain(x, vars);
        Var loss = Var::scalar(0.0);
        if (opts.w1 > 0) {
            Var sim = nn::cosine_sim(target_emb, embedder.embed_var(out));
            loss = nn::add(loss, nn::scale(nn::add_const(nn::scale(sim, -1.0), 1.0), opts.w1));
        }
        if (opts.w2 > 0)
            loss = nn::add(loss, nn::scale(nn::euclidean(ref_v, R.predict_var(out)), opts.w2));
        return loss;
    };

    AdaptationResult result;
    tx::TransformParams best = vars.to_params();
    double best_loss = std::numeric_limits<double>::infinity();
    double best_at_window_start = best_loss;
    int window_count = 0;

    for (int it = 0; it < opts.iters; ++it) {
        Var loss = objective();
        const double value = loss.scalar_value();
        if (!std::isfinite(value)) break; // keep the last finite iterate
        result.loss_trace.push_back(value);
        if (value < best_loss) {
            best_loss = value;
            best = vars.to_params();
        }
        if (++window_count >= opts.stop_window) {
            if (best_loss > best_at_window_start - opts.stop_tol) break;
            best_at_window_start = best_loss;
            window_count = 0;
        }
        nn::backward(loss);
        opt.step();
        vars.project(opts.bounds);
    }

    result.adapted = tx::apply_transforms(img, best, opts.bounds);
    result.emotion_before = R.predict(img);
    result.emotion_after = R.predict(result.adapted);

    nlohmann::json code = nlohmann::json::parse(best.to_json());
    code["objective"] = best_loss;
    code["w1"] = opts.w1;
    code["w2"] = opts.w2;
    result.params_or_code = code.dump();
    result.validate();
    return result;
}

} // namespace affect::adapters
