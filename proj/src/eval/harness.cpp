#include "affect/eval/harness.hpp"

#include "affect/core/image_io.hpp"
#include "affect/transforms/diff_transforms.hpp"
#include "affect/util/rng.hpp"
#include "affect/util/svg_plot.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

namespace affect::eval {

namespace fs = std::filesystem;

Method method_from_string(const std::string& s) {
    if (s == "parametric") return Method::parametric;
    if (s == "style") return Method::style;
    if (s == "diffusion") return Method::diffusion;
    if (s == "cg_only" || s == "cg") return Method::cg_only;
    if (s == "manual") return Method::manual;
    if (s == "grayscale") return Method::grayscale;
    if (s == "original") return Method::original;
    throw std::invalid_argument("unknown method: " + s);
}

std::string to_string(Method m) {
    switch (m) {
        case Method::parametric: return "parametric";
        case Method::style: return "style";
        case Method::diffusion: return "diffusion";
        case Method::cg_only: return "cg_only";
        case Method::manual: return "manual";
        case Method::grayscale: return "grayscale";
        case Method::original: return "original";
    }
    return "?";
}

void ModelSet::require(Method m) const {
    if (!regressor || !regressor->trained())
        throw std::invalid_argument("model set: trained pixel regressor required");
    switch (m) {
        case Method::parametric:
            if (!embedder || !embedder->trained())
                throw std::invalid_argument("model set: trained embedder required");
            break;
        case Method::style:
            if (!disentangler || !disentangler->trained())
                throw std::invalid_argument("model set: trained disentangler required");
            break;
        case Method::diffusion:
        case Method::cg_only:
            if (!denoiser || !denoiser->trained() || !guidance || !guidance->trained() || !sampler)
                throw std::invalid_argument("model set: denoiser, guidance regressor and sampler required");
            break;
        default: break;
    }
}

FeatureFn ModelSet::feature_fn() const {
    const reg::PixelRegressor* r = regressor;
    return [r](const core::Image& img) { return r->features(img); };
}

std::string ModelSet::embedder_id() const {
    return "pixel-regressor/gap" + std::to_string(reg::PixelRegressor::kFeat) + "/" +
           regressor->weights_digest().substr(0, 12);
}

std::string BackboneSymmetryFeatures::name() const {
    return "backbone-conv2/" + r_->weights_digest().substr(0, 12);
}

metrics::PlaneXd BackboneSymmetryFeatures::feature_map(const core::Image& img, int channel) const {
    const core::Image rgb = img.channels() == 1 ? core::gray_to_rgb(img) : img;
    const nn::Var f = r_->early_features_var(
        nn::Var::constant(tx::image_to_tensor(core::resize_bilinear(rgb, 64, 64))));
    const auto& t = f.value();
    metrics::PlaneXd out(t.shape.h, t.shape.w);
    for (int y = 0; y < t.shape.h; ++y)
        for (int x = 0; x < t.shape.w; ++x) out(y, x) = t(0, channel, y, x);
    return out;
}

void SweepConfig::validate() const {
    if (weights.empty()) throw std::invalid_argument("sweep: weight list must be nonempty");
    if (similarity_weight < 0) throw std::invalid_argument("sweep: similarity weight negative");
    for (double w : weights)
        if (w < 0) throw std::invalid_argument("sweep: negative adaptation weight");
    reference.validate();
    if (method == Method::manual && manual_params_path.empty())
        throw std::invalid_argument("sweep: manual method needs a parameter file");
}

namespace {

struct Corpus {
    core::DatasetManifest manifest;
    std::vector<core::Image> images;
    metrics::CorpusStats stats;
};

Corpus load_corpus(const std::string& manifest_path, const std::string& scales_path) {
    Corpus c;
    c.manifest = core::normalize_ratings(core::ingest_manifest(manifest_path, scales_path));
    std::vector<double> raw;
    for (const auto& e : c.manifest.entries) {
        c.images.push_back(core::load_image(e.image_path));
        raw.push_back(metrics::lowfreq_energy_raw(c.images.back()));
    }
    c.stats = metrics::compute_corpus_stats(raw);
    return c;
}

void parallel_for(int jobs, std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n_threads = std::min<int>(jobs, static_cast<int>(count));
    for (int t = 0; t < n_threads; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

core::Image adapt_one(Method method, const core::Image& img,
                      const std::optional<std::string>& caption,
                      const core::EmotionReference& ref, double similarity_weight, double weight,
                      int iters, std::uint64_t seed, const std::string& cache_dir,
                      const tx::TransformParams* manual_params, const ModelSet& models) {
    switch (method) {
        case Method::original: return img;
        case Method::grayscale: return core::gray_to_rgb(core::rgb_to_gray(img));
        case Method::manual: return tx::apply_transforms(img, *manual_params);
        case Method::parametric: {
            adapters::ParametricOptions opts;
            opts.w1 = similarity_weight;
            opts.w2 = weight;
            opts.iters = iters;
            opts.seed = seed;
            return adapters::optimize_params(img, ref, *models.regressor, *models.embedder, opts)
                .adapted;
        }
        case Method::style: {
            adapters::StyleOptions opts;
            opts.w1 = similarity_weight;
            opts.w2 = weight;
            opts.iters = iters;
            opts.seed = seed;
            return adapters::optimize_style(img, ref, *models.regressor, *models.disentangler, opts)
                .adapted;
        }
        case Method::diffusion:
        case Method::cg_only: {
            diffusion::AdaptOptions opts;
            opts.guidance.cfg_scale = method == Method::cg_only ? 0.0 : similarity_weight;
            opts.guidance.guidance_scale = weight;
            opts.use_null_text = method == Method::diffusion;
            opts.cache_dir = cache_dir;
            const std::optional<std::string> cap =
                method == Method::cg_only ? std::nullopt : caption;
            return diffusion::adapt_image_diffusion(img, cap, ref, opts, *models.denoiser,
                                                    models.guidance, *models.sampler)
                .adapted;
        }
    }
    throw std::logic_error("adapt_one: unreachable");
}

struct ImageScores {
    double valence = 0, arousal = 0, emo_dist = 0, l1 = 0;
    metrics::PropertyReport props;
};

ImageScores score_image(const core::Image& adapted, const core::Image& original,
                        const core::EmotionReference& ref, const metrics::CorpusStats& stats,
                        const metrics::SymmetryFeatures& sym, const ModelSet& models,
                        const std::string& id) {
    ImageScores s;
    const auto e = models.regressor->predict(adapted);
    s.valence = e.valence;
    s.arousal = e.arousal;
    s.emo_dist = std::hypot(e.valence - ref.valence_ref, e.arousal - ref.arousal_ref);
    // reconstruction at the method's working resolution
    const core::Image ref_img =
        core::resize_bilinear(original, adapted.height(), adapted.width());
    s.l1 = core::mean_abs_diff(adapted, ref_img);
    s.props = metrics::report(adapted, stats, sym, id);
    return s;
}

std::vector<std::string> per_image_header() {
    return {"method",   "weight",    "image",        "valence",  "arousal",
            "emotion_dist", "l1",    "brightness",   "saturation", "colorfulness",
            "contrast", "blur",      "edge_orientation_entropy", "lowfreq_energy", "symmetry"};
}

std::vector<std::string> summary_header() {
    return {"method",       "weight",  "mean_valence", "mean_arousal", "mean_emotion_dist",
            "mean_l1",      "fid",     "kid",          "mean_brightness", "mean_saturation",
            "mean_colorfulness", "mean_contrast", "mean_blur", "mean_edge_orientation_entropy",
            "mean_lowfreq_energy", "mean_symmetry", "embedder", "n"};
}

} // namespace

SweepTables run_weight_sweep(const SweepConfig& cfg, const ModelSet& models) {
    cfg.validate();
    models.require(cfg.method);
    Corpus corpus = load_corpus(cfg.corpus_manifest, cfg.corpus_scales);
    const std::size_t n = corpus.images.size();
    if (n < 2) throw std::invalid_argument("sweep: corpus too small");

    std::optional<tx::TransformParams> manual_params;
    if (cfg.method == Method::manual) {
        std::ifstream in(cfg.manual_params_path);
        if (!in) throw std::runtime_error("sweep: cannot open " + cfg.manual_params_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        manual_params = tx::TransformParams::from_json(text);
    }

    BackboneSymmetryFeatures sym(*models.regressor);
    const FeatureFn feat = models.feature_fn();
    FeatureSet original_features;
    for (const auto& img : corpus.images) original_features.push_back(feat(img));

    SweepTables tables;
    tables.per_image.header = per_image_header();
    tables.summary.header = summary_header();

    const bool weight_independent = cfg.method == Method::original ||
                                    cfg.method == Method::grayscale ||
                                    cfg.method == Method::manual;

    std::vector<ImageScores> cached_scores;
    FeatureSet cached_features;
    double cached_fid = 0, cached_kid = 0;

    for (std::size_t wi = 0; wi < cfg.weights.size(); ++wi) {
        const double weight = cfg.weights[wi];
        std::vector<ImageScores> scores(n);
        FeatureSet adapted_features(n);

        if (weight_independent && wi > 0) {
            scores = cached_scores;
            adapted_features = cached_features;
        } else {
            parallel_for(cfg.jobs, n, [&](std::size_t i) {
                const auto& entry = corpus.manifest.entries[i];
                const core::Image adapted = adapt_one(
                    cfg.method, corpus.images[i], entry.caption, cfg.reference,
                    cfg.similarity_weight, weight, cfg.iters,
                    splitmix64(cfg.seed ^ (0xA0 + i)), cfg.cache_dir,
                    manual_params ? &*manual_params : nullptr, models);
                scores[i] = score_image(adapted, corpus.images[i], cfg.reference, corpus.stats,
                                        sym, models, fs::path(entry.image_path).filename().string());
                adapted_features[i] = feat(adapted);
            });
        }

        double fid, kid;
        if (weight_independent && wi > 0) {
            fid = cached_fid;
            kid = cached_kid;
        } else {
            fid = compute_fid(adapted_features, original_features);
            kid = compute_kid(adapted_features, original_features, 50, 10, cfg.seed);
            if (weight_independent) {
                cached_scores = scores;
                cached_features = adapted_features;
                cached_fid = fid;
                cached_kid = kid;
            }
        }

        double mv = 0, ma = 0, md = 0, ml = 0;
        double mprops[8] = {};
        for (std::size_t i = 0; i < n; ++i) {
            const auto& s = scores[i];
            mv += s.valence;
            ma += s.arousal;
            md += s.emo_dist;
            ml += s.l1;
            mprops[0] += s.props.brightness;
            mprops[1] += s.props.saturation;
            mprops[2] += s.props.colorfulness;
            mprops[3] += s.props.contrast;
            mprops[4] += s.props.blur;
            mprops[5] += s.props.edge_orientation_entropy;
            mprops[6] += s.props.lowfreq_energy;
            mprops[7] += s.props.symmetry;

            using csv::format_number;
            tables.per_image.rows.push_back(
                {to_string(cfg.method), format_number(weight), s.props.image_id,
                 format_number(s.valence), format_number(s.arousal), format_number(s.emo_dist),
                 format_number(s.l1), format_number(s.props.brightness),
                 format_number(s.props.saturation), format_number(s.props.colorfulness),
                 format_number(s.props.contrast), format_number(s.props.blur),
                 format_number(s.props.edge_orientation_entropy),
                 format_number(s.props.lowfreq_energy), format_number(s.props.symmetry)});
        }
        const double dn = static_cast<double>(n);
        using csv::format_number;
        tables.summary.rows.push_back(
            {to_string(cfg.method), format_number(weight), format_number(mv / dn),
             format_number(ma / dn), format_number(md / dn), format_number(ml / dn),
             format_number(fid), format_number(kid), format_number(mprops[0] / dn),
             format_number(mprops[1] / dn), format_number(mprops[2] / dn),
             format_number(mprops[3] / dn), format_number(mprops[4] / dn),
             format_number(mprops[5] / dn), format_number(mprops[6] / dn),
             format_number(mprops[7] / dn), models.embedder_id(), std::to_string(n)});
    }
    return tables;
}

SweepTables run_bidirectional(const BidirectionalConfig& cfg, const ModelSet& models) {
    if (cfg.method != Method::parametric && cfg.method != Method::style &&
        cfg.method != Method::diffusion)
        throw std::invalid_argument("bidirectional: method must be parametric, style or diffusion");
    models.require(cfg.method);
    Corpus corpus = load_corpus(cfg.corpus_manifest, cfg.corpus_scales);
    const std::size_t n = corpus.images.size();

    // reference axis: relative offsets for the optimizers, absolute extremes
    // for diffusion; 0 stands for the unadapted original in both cases
    std::vector<double> axis;
    if (cfg.method == Method::diffusion) {
        axis = {-1.0, 0.0, 1.0};
    } else {
        axis = cfg.offsets;
        axis.push_back(0.0);
        std::sort(axis.begin(), axis.end());
    }

    SweepTables tables;
    tables.per_image.header = {"method", "offset", "image",  "ref_valence",
                               "ref_arousal", "valence", "arousal"};
    tables.summary.header = {"method", "offset", "mean_valence", "mean_arousal", "n"};

    std::vector<core::EmotionRating> base(n);
    parallel_for(cfg.jobs, n, [&](std::size_t i) {
        base[i] = models.regressor->predict(corpus.images[i]);
    });

    for (double offset : axis) {
        std::vector<core::EmotionRating> adapted(n);
        std::vector<core::EmotionReference> refs(n);
        if (offset == 0.0) {
            adapted = base;
            for (std::size_t i = 0; i < n; ++i) refs[i] = {base[i].valence, base[i].arousal};
        } else {
            parallel_for(cfg.jobs, n, [&](std::size_t i) {
                core::EmotionReference ref;
                if (cfg.method == Method::diffusion) {
                    ref = {offset, offset};
                } else {
                    ref = {std::clamp(base[i].valence + offset, -1.0, 1.0),
                           std::clamp(base[i].arousal + offset, -1.0, 1.0)};
                }
                refs[i] = ref;
                const auto& entry = corpus.manifest.entries[i];
                const core::Image out = adapt_one(
                    cfg.method, corpus.images[i], entry.caption, ref, cfg.similarity_weight,
                    cfg.adaptation_weight, cfg.iters, splitmix64(cfg.seed ^ (0xB0 + i)),
                    cfg.cache_dir, nullptr, models);
                adapted[i] = models.regressor->predict(out);
            });
        }
        double mv = 0, ma = 0;
        for (std::size_t i = 0; i < n; ++i) {
            mv += adapted[i].valence;
            ma += adapted[i].arousal;
            using csv::format_number;
            tables.per_image.rows.push_back(
                {to_string(cfg.method), format_number(offset),
                 fs::path(corpus.manifest.entries[i].image_path).filename().string(),
                 format_number(refs[i].valence_ref), format_number(refs[i].arousal_ref),
                 format_number(adapted[i].valence), format_number(adapted[i].arousal)});
        }
        using csv::format_number;
        tables.summary.rows.push_back({to_string(cfg.method), format_number(offset),
                                       format_number(mv / static_cast<double>(n)),
                                       format_number(ma / static_cast<double>(n)),
                                       std::to_string(n)});
    }
    return tables;
}

csv::Table metrics_report(const std::string& manifest_path, const std::string& scales_path,
                          const ModelSet& models) {
    Corpus corpus = load_corpus(manifest_path, scales_path);
    BackboneSymmetryFeatures backbone(*models.regressor);
    metrics::GaborBank gabor;
    const metrics::SymmetryFeatures* sym =
        models.regressor && models.regressor->trained()
            ? static_cast<const metrics::SymmetryFeatures*>(&backbone)
            : static_cast<const metrics::SymmetryFeatures*>(&gabor);

    csv::Table t;
    t.header = metrics::PropertyReport::csv_header();
    for (std::size_t i = 0; i < corpus.images.size(); ++i) {
        const auto rep = metrics::report(
            corpus.images[i], corpus.stats, *sym,
            fs::path(corpus.manifest.entries[i].image_path).filename().string());
        t.rows.push_back(rep.csv_row());
    }
    return t;
}

void render_report(const std::string& in_dir, const std::string& out_dir) {
    fs::create_directories(out_dir);
    for (const auto& entry : fs::directory_iterator(in_dir)) {
        if (entry.path().extension() != ".csv") continue;
        csv::Table t;
        try {
            t = csv::read_file(entry.path().string());
        } catch (const std::exception&) {
            continue;
        }
        // locate the x axis
        int x_col = -1;
        for (std::size_t c = 0; c < t.header.size(); ++c)
            if (t.header[c] == "weight" || t.header[c] == "offset") x_col = static_cast<int>(c);
        if (x_col < 0 || t.rows.empty()) continue;
        int method_col = -1;
        for (std::size_t c = 0; c < t.header.size(); ++c)
            if (t.header[c] == "method") method_col = static_cast<int>(c);

        for (std::size_t c = 0; c < t.header.size(); ++c) {
            if (static_cast<int>(c) == x_col || static_cast<int>(c) == method_col) continue;
            // numeric columns only
            bool numeric = true;
            for (const auto& row : t.rows) {
                char* end = nullptr;
                std::strtod(row[c].c_str(), &end);
                if (end == row[c].c_str()) {
                    numeric = false;
                    break;
                }
            }
            if (!numeric) continue;

            std::map<std::string, svg::Series> series;
            for (const auto& row : t.rows) {
                const std::string key = method_col >= 0 ? row[static_cast<std::size_t>(method_col)]
                                                        : "all";
                auto& s = series[key];
                s.label = key;
                s.x.push_back(std::strtod(row[static_cast<std::size_t>(x_col)].c_str(), nullptr));
                s.y.push_back(std::strtod(row[c].c_str(), nullptr));
            }
            std::vector<svg::Series> list;
            for (auto& [k, s] : series) list.push_back(std::move(s));
            const std::string name =
                entry.path().stem().string() + "_" + t.header[c] + ".svg";
            svg::write_line_plot((fs::path(out_dir) / name).string(), t.header[c],
                                 t.header[static_cast<std::size_t>(x_col)], t.header[c], list);
        }
    }
}

} // namespace affect::eval
