#include "affect/core/manifest.hpp"

#include "affect/util/csv.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <stdexcept>

namespace affect::core {

void EmotionReference::validate() const {
    if (!(valence_ref >= -1.0 && valence_ref <= 1.0) ||
        !(arousal_ref >= -1.0 && arousal_ref <= 1.0))
        throw std::invalid_argument("emotion reference outside [-1,1]");
}

void DatasetManifest::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.image_path).second)
            throw std::runtime_error("manifest: duplicate image_path " + e.image_path);
        if (!scale_metadata.count(e.source_dataset))
            throw std::runtime_error("manifest: no scale entry for dataset " + e.source_dataset);
    }
}

namespace {

double parse_real(const std::string& s, const char* what, int line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(std::string("manifest: malformed ") + what + " at line " +
                                 std::to_string(line_no) + ": '" + s + "'");
    }
}

} // namespace

DatasetManifest ingest_manifest(const std::string& manifest_csv, const std::string& scales_csv) {
    DatasetManifest m;

    const auto scales = csv::read_file(scales_csv);
    if (scales.header != std::vector<std::string>{"dataset", "min", "max"})
        throw std::runtime_error("manifest: scale table must have header dataset,min,max");
    for (std::size_t i = 0; i < scales.rows.size(); ++i) {
        const auto& r = scales.rows[i];
        const int line_no = static_cast<int>(i) + 2;
        RatingScale sc{parse_real(r[1], "scale min", line_no), parse_real(r[2], "scale max", line_no)};
        m.scale_metadata[r[0]] = sc;
    }

    const auto t = csv::read_file(manifest_csv);
    const std::vector<std::string> with_cap{"path", "valence", "arousal", "dataset", "caption"};
    const std::vector<std::string> without_cap{"path", "valence", "arousal", "dataset"};
    const bool has_caption = t.header == with_cap;
    if (!has_caption && t.header != without_cap)
        throw std::runtime_error("manifest: header must be path,valence,arousal,dataset[,caption]");

    const std::filesystem::path base = std::filesystem::path(manifest_csv).parent_path();
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& r = t.rows[i];
        const int line_no = static_cast<int>(i) + 2;
        AffectiveSample s;
        s.image_path = r[0];
        if (s.image_path.empty())
            throw std::runtime_error("manifest: empty path at line " + std::to_string(line_no));
        // relative paths resolve against the manifest location
        if (std::filesystem::path(s.image_path).is_relative())
            s.image_path = (base / s.image_path).string();
        s.valence = parse_real(r[1], "valence", line_no);
        s.arousal = parse_real(r[2], "arousal", line_no);
        s.source_dataset = r[3];
        if (!m.scale_metadata.count(s.source_dataset))
            throw std::runtime_error("manifest: unknown dataset '" + s.source_dataset +
                                     "' at line " + std::to_string(line_no));
        if (has_caption && !r[4].empty()) s.caption = r[4];
        if (!std::filesystem::exists(s.image_path))
            throw std::runtime_error("manifest: unresolvable path at line " +
                                     std::to_string(line_no) + ": " + s.image_path);
        m.entries.push_back(std::move(s));
    }
    m.validate();
    return m;
}

DatasetManifest normalize_ratings(const DatasetManifest& m) {
    m.validate();
    DatasetManifest out = m;
    for (const auto& [name, sc] : m.scale_metadata) {
        if (sc.max == sc.min)
            throw std::runtime_error("manifest: degenerate scale for dataset " + name);
    }
    for (auto& e : out.entries) {
        const RatingScale sc = m.scale_metadata.at(e.source_dataset);
        const double span = sc.max - sc.min;
        e.valence = std::clamp((e.valence - sc.min) / span, 0.0, 1.0);
        e.arousal = std::clamp((e.arousal - sc.min) / span, 0.0, 1.0);
    }
    for (auto& [name, sc] : out.scale_metadata) sc = RatingScale{0.0, 1.0};
    out.normalized = true;
    return out;
}

void write_manifest(const DatasetManifest& m, const std::string& manifest_csv,
                    const std::string& scales_csv) {
    csv::Table t;
    t.header = {"path", "valence", "arousal", "dataset", "caption"};
    for (const auto& e : m.entries)
        t.rows.push_back({e.image_path, csv::format_number(e.valence), csv::format_number(e.arousal),
                          e.source_dataset, e.caption.value_or("")});
    csv::write_file(manifest_csv, t);

    csv::Table s;
    s.header = {"dataset", "min", "max"};
    for (const auto& [name, sc] : m.scale_metadata)
        s.rows.push_back({name, csv::format_number(sc.min), csv::format_number(sc.max)});
    csv::write_file(scales_csv, s);
}

} // namespace affect::core
