#include "affect/diffusion/guidance.hpp"

#include "affect/util/sha256.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace affect::diffusion {

namespace fs = std::filesystem;
using nn::Var;

void GuidanceConfig::validate() const {
    if (cfg_scale < 0.0 || guidance_scale < 0.0)
        throw std::invalid_argument("guidance config: scales must be nonnegative");
    reference.validate();
}

nn::Tensor guidance_score(const reg::GuidanceRegressor& g, const DenoiserModel& dm,
                          const nn::Tensor& z_t, int t, const NoiseSchedule& schedule,
                          const core::EmotionReference& ref) {
    if (!(z_t.shape == dm.latent_shape()))
        throw std::invalid_argument("guidance_score: latent shape mismatch, got " + z_t.shape.str());
    Var z = Var::leaf(z_t, true);
    Var u = dm.mid_var(z, {schedule.orig_t(t)}, Var::constant(dm.null_embedding()));
    nn::Tensor target(nn::Shape{1, 2, 1, 1});
    target.data[0] = ref.valence_ref;
    target.data[1] = ref.arousal_ref;
    Var d2 = nn::sum_squares(nn::sub(Var::constant(target), g.predict_var(u)));
    nn::backward(d2);
    nn::Tensor out(z_t.shape);
    if (z.grad().data.size() > 0) out.data = -z.grad().data; // descent direction
    if (!out.data.isFinite().all()) throw std::runtime_error("guidance_score: non-finite gradient");
    return out;
}

nn::Tensor dual_conditioned_step(const nn::Tensor& z_t, int t, const nn::Tensor& cond,
                                 const nn::Tensor& null_t, const GuidanceConfig& cfg,
                                 const DenoiserModel& dm, const reg::GuidanceRegressor* g,
                                 const NoiseSchedule& schedule) {
    cfg.validate();
    const double w = cfg.cfg_scale, s = cfg.guidance_scale;
    const int orig_t = schedule.orig_t(t);

    nn::Tensor eps_hat;
    if (w == 1.0) {
        eps_hat = dm.eps(z_t, orig_t, cond);
    } else if (w == 0.0) {
        eps_hat = dm.eps(z_t, orig_t, null_t);
    } else {
        eps_hat = dm.eps(z_t, orig_t, cond);
        const nn::Tensor eps_u = dm.eps(z_t, orig_t, null_t);
        eps_hat.data = w * eps_hat.data + (1.0 - w) * eps_u.data;
    }
    if (s != 0.0) {
        if (!g) throw std::invalid_argument("dual step: guidance scale set but no regressor");
        const nn::Tensor score = guidance_score(*g, dm, z_t, t, schedule, cfg.reference);
        // score is a latent-space descent direction; the DDIM epsilon
        // coefficient is negative, so subtracting moves z_{t-1} along it
        eps_hat.data -= s * score.data;
    }
    return ddim_step(z_t, t, schedule, eps_hat);
}

std::string inversion_cache_key(const nn::Tensor& z0, const std::string& caption_text,
                                double nto_scale, int nto_iters, const NoiseSchedule& schedule,
                                const DenoiserModel& dm) {
    Sha256 h;
    h.update(z0.data.data(), static_cast<std::size_t>(z0.data.size()) * sizeof(double));
    h.update(caption_text);
    h.update(&nto_scale, sizeof(nto_scale));
    h.update(&nto_iters, sizeof(nto_iters));
    h.update(schedule.digest());
    h.update(dm.weights_digest());
    return h.hex();
}

namespace {

void write_tensor(std::ofstream& out, const nn::Tensor& t) {
    const int sh[4] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    out.write(reinterpret_cast<const char*>(sh), sizeof(sh));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

nn::Tensor read_tensor(std::ifstream& in) {
    int sh[4];
    in.read(reinterpret_cast<char*>(sh), sizeof(sh));
    nn::Tensor t(nn::Shape{sh[0], sh[1], sh[2], sh[3]});
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    return t;
}

bool load_products(const fs::path& file, int T, InversionProducts& out) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return false;
    char magic[8];
    in.read(magic, 8);
    if (!in || std::string(magic, 8) != "AFFINV1\n") return false;
    out.trajectory.T = T;
    out.trajectory.z.clear();
    for (int k = 0; k <= T; ++k) out.trajectory.z.push_back(read_tensor(in));
    out.trajectory.cond = read_tensor(in);
    out.nulls.null_embeddings.clear();
    for (int k = 0; k < T; ++k) out.nulls.null_embeddings.push_back(read_tensor(in));
    std::uint32_t n_steps = 0;
    in.read(reinterpret_cast<char*>(&n_steps), 4);
    out.nulls.steps.resize(n_steps);
    for (auto& s : out.nulls.steps) {
        in.read(reinterpret_cast<char*>(&s.t), sizeof(s.t));
        in.read(reinterpret_cast<char*>(&s.initial), sizeof(s.initial));
        in.read(reinterpret_cast<char*>(&s.final), sizeof(s.final));
        char r = 0;
        in.read(&r, 1);
        s.reduced = r != 0;
    }
    return static_cast<bool>(in);
}

void save_products(const fs::path& file, const InversionProducts& p) {
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary);
    out.write("AFFINV1\n", 8);
    for (const auto& z : p.trajectory.z) write_tensor(out, z);
    write_tensor(out, p.trajectory.cond);
    for (const auto& e : p.nulls.null_embeddings) write_tensor(out, e);
    const std::uint32_t n_steps = static_cast<std::uint32_t>(p.nulls.steps.size());
    out.write(reinterpret_cast<const char*>(&n_steps), 4);
    for (const auto& s : p.nulls.steps) {
        out.write(reinterpret_cast<const char*>(&s.t), sizeof(s.t));
        out.write(reinterpret_cast<const char*>(&s.initial), sizeof(s.initial));
        out.write(reinterpret_cast<const char*>(&s.final), sizeof(s.final));
        const char r = s.reduced ? 1 : 0;
        out.write(&r, 1);
    }
}

} // namespace

InversionProducts invert_with_cache(const nn::Tensor& z0, const nn::Tensor& cond,
                                    const std::string& cache_key, const std::string& cache_dir,
                                    const DenoiserModel& dm, const NoiseSchedule& schedule,
                                    const NullTextConfig& nto_cfg, bool use_null_text) {
    InversionProducts p;
    fs::path file;
    if (!cache_dir.empty()) {
        file = fs::path(cache_dir) / "inv" / (cache_key + ".bin");
        if (load_products(file, schedule.T, p)) {
            p.from_cache = true;
            return p;
        }
    }
    p.trajectory = ddim_invert(z0, cond, schedule, dm);
    if (use_null_text) {
        p.nulls = null_text_optimize(p.trajectory, cond, dm, schedule, nto_cfg);
    } else {
        p.nulls.null_embeddings.assign(static_cast<std::size_t>(schedule.T), dm.null_embedding());
    }
    if (!file.empty()) save_products(file, p);
    return p;
}

adapters::AdaptationResult adapt_image_diffusion(const core::Image& img,
                                                 const std::optional<std::string>& caption,
                                                 const core::EmotionReference& ref,
                                                 const AdaptOptions& opts, const DenoiserModel& dm,
                                                 const reg::GuidanceRegressor* g,
                                                 const NoiseSchedule& schedule) {
    schedule.validate();
    GuidanceConfig cfg = opts.guidance;
    cfg.reference = ref;
    cfg.validate();
    if (cfg.guidance_scale > 0 && !g)
        throw std::invalid_argument("diffusion adapt: guidance requested without a regressor");
    const bool text_conditioned = cfg.cfg_scale != 0.0 || opts.use_null_text;
    if (text_conditioned && (!caption || caption->empty()))
        throw std::invalid_argument("diffusion adapt: text conditioning requested but caption missing");

    const nn::Tensor z0 = dm.encode(img);
    const std::string caption_text = caption.value_or("");
    const nn::Tensor cond = dm.text_embedding(caption_text);
    const double nto_scale = opts.nto_scale > 0 ? opts.nto_scale : cfg.cfg_scale;

    NullTextConfig nto_cfg;
    nto_cfg.guidance_scale = nto_scale;
    nto_cfg.inner_iters = opts.nto_iters;
    nto_cfg.lr = opts.nto_lr;

    const std::string key = inversion_cache_key(z0, caption_text, nto_scale,
                                                opts.use_null_text ? opts.nto_iters : 0, schedule, dm);
    const InversionProducts inv =
        invert_with_cache(z0, cond, key, opts.cache_dir, dm, schedule, nto_cfg, opts.use_null_text);

    auto emotion_of = [&](const nn::Tensor& z) {
        if (!g) return core::EmotionRating{};
        // nearly-clean probe: scale to the first step's alpha, no noise
        nn::Tensor probe = z;
        probe.data *= std::sqrt(schedule.alpha(1));
        return g->predict_emotion_mid(dm.mid(probe, schedule.orig_t(1), dm.null_embedding()));
    };

    adapters::AdaptationResult result;
    result.emotion_before = emotion_of(z0);

    nn::Tensor cur = inv.trajectory.z.back();
    for (int t = schedule.T; t >= 1; --t) {
        cur = dual_conditioned_step(cur, t, cond, inv.nulls.at(t), cfg, dm, g, schedule);
        if (g) {
            nn::Tensor target(nn::Shape{1, 2, 1, 1});
            target.data[0] = ref.valence_ref;
            target.data[1] = ref.arousal_ref;
            const auto pred =
                g->predict_emotion_mid(dm.mid(cur, schedule.orig_t(std::max(t - 1, 1)), dm.null_embedding()));
            result.loss_trace.push_back(std::hypot(pred.valence - ref.valence_ref,
                                                   pred.arousal - ref.arousal_ref));
        }
    }
    result.adapted = dm.decode(cur);
    result.emotion_after = emotion_of(dm.encode(result.adapted));

    nlohmann::json code;
    code["cache_key"] = key;
    code["cfg_scale"] = cfg.cfg_scale;
    code["guidance_scale"] = cfg.guidance_scale;
    code["nto_scale"] = nto_scale;
    code["steps"] = schedule.T;
    code["from_cache"] = inv.from_cache;
    result.params_or_code = code.dump();
    return result;
}

} // namespace affect::diffusion
