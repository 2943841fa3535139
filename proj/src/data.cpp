#include "ifgan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace ifgan {

namespace fs = std::filesystem;
using nlohmann::json;

// ------------------------------------------------------------------ factors

ExpressionFactors expression_factors(int label, int level, int levels) {
    ExpressionFactors f;  // neutral baseline
    if (label == kNeutralLabel) return f;
    const double t = static_cast<double>(level) / static_cast<double>(levels);
    switch (label) {
        case 0:  // happy: strong upward mouth curve
            f.mouth_curve = 0.9 * t;
            f.mouth_open = 0.1 + 0.15 * t;
            f.brow_angle = 0.2 * t;
            break;
        case 1:  // sad: downward curve, drooping brows
            f.mouth_curve = -0.9 * t;
            f.eye_open = 1.0 - 0.25 * t;
            f.brow_angle = -0.5 * t;
            break;
        case 2:  // surprise: open mouth, wide eyes, raised brows
            f.mouth_open = 0.1 + 0.85 * t;
            f.eye_open = 1.0 + 0.55 * t;
            f.brow_angle = 0.8 * t;
            break;
        case 3:  // angry: slanted brows, narrowed eyes
            f.mouth_curve = -0.45 * t;
            f.eye_open = 1.0 - 0.45 * t;
            f.brow_angle = -0.95 * t;
            break;
        case 4:  // disgust: narrowed eyes, slightly open frown
            f.mouth_curve = -0.35 * t;
            f.mouth_open = 0.1 + 0.3 * t;
            f.eye_open = 1.0 - 0.6 * t;
            f.brow_angle = -0.25 * t;
            break;
        case 5:  // fear: open mouth, wide eyes, raised flat brows
            f.mouth_curve = -0.15 * t;
            f.mouth_open = 0.1 + 0.5 * t;
            f.eye_open = 1.0 + 0.35 * t;
            f.brow_angle = 0.45 * t;
            break;
        default: throw std::invalid_argument("expression_factors: label out of range");
    }
    return f;
}

IdentityFactors identity_factors_for(const SynthOptions& opts, int identity_id) {
    // per-identity stream so factors do not depend on generation order
    Rng rng(opts.seed * 0x9e3779b97f4a7c15ull + 0x517cc1b727220a95ull * (identity_id + 1));
    IdentityFactors f;
    f.oval_w = rng.uniform(0.70, 0.92);
    f.oval_h = rng.uniform(0.80, 0.98);
    f.eye_spacing = rng.uniform(0.28, 0.42);
    f.base_intensity = rng.uniform(0.45, 0.85);
    f.nose_len = rng.uniform(0.12, 0.22);
    const int biased_count = opts.n_identities - opts.spurious_clean;
    if (opts.spurious_clean > 0 && identity_id < biased_count) {
        // biased cohort: brightness is an exact function of the preferred label
        const int pref = identity_id % opts.classes;
        f.base_intensity = 0.45 + 0.40 * static_cast<double>(pref) /
                                      static_cast<double>(opts.classes - 1);
    }
    return f;
}

// ----------------------------------------------------------------- renderer

namespace {

double smooth_cov(double dist, double edge) {
    // 1 inside, 0 outside, smooth ramp of width 2*edge around dist=0
    const double u = (edge - dist) / (2.0 * edge);
    if (u <= 0) return 0.0;
    if (u >= 1) return 1.0;
    return u * u * (3.0 - 2.0 * u);
}

void blend(ImageF& canvas, int x, int y, double value, double cov) {
    if (cov <= 0) return;
    double& px = canvas.at(x, y);
    px = px * (1.0 - cov) + value * cov;
}

void fill_ellipse(ImageF& canvas, double cx, double cy, double ax, double ay, double value,
                  double edge) {
    const int x0 = std::max(0, static_cast<int>(cx - ax - 2 * edge - 1));
    const int x1 = std::min(canvas.width - 1, static_cast<int>(cx + ax + 2 * edge + 1));
    const int y0 = std::max(0, static_cast<int>(cy - ay - 2 * edge - 1));
    const int y1 = std::min(canvas.height - 1, static_cast<int>(cy + ay + 2 * edge + 1));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double dx = (x - cx) / ax, dy = (y - cy) / ay;
            const double d = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(ax, ay);
            blend(canvas, x, y, value, smooth_cov(d, edge));
        }
}

void fill_capsule(ImageF& canvas, Point p0, Point p1, double radius, double value, double edge) {
    const int x0 = std::max(0, static_cast<int>(std::min(p0.x, p1.x) - radius - 2 * edge - 1));
    const int x1 = std::min(canvas.width - 1, static_cast<int>(std::max(p0.x, p1.x) + radius + 2 * edge + 1));
    const int y0 = std::max(0, static_cast<int>(std::min(p0.y, p1.y) - radius - 2 * edge - 1));
    const int y1 = std::min(canvas.height - 1, static_cast<int>(std::max(p0.y, p1.y) + radius + 2 * edge + 1));
    const double vx = p1.x - p0.x, vy = p1.y - p0.y;
    const double len2 = vx * vx + vy * vy;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double wx = x - p0.x, wy = y - p0.y;
            double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double dx = wx - t * vx, dy = wy - t * vy;
            const double d = std::sqrt(dx * dx + dy * dy) - radius;
            blend(canvas, x, y, value, smooth_cov(d, edge));
        }
}

// band around y = curve(u) with lens-shaped thickness, u in [-1, 1]
void fill_mouth(ImageF& canvas, double cx, double cy, double half_w, double curve_amp,
                double thickness, double value, double edge) {
    const int x0 = std::max(0, static_cast<int>(cx - half_w - 2));
    const int x1 = std::min(canvas.width - 1, static_cast<int>(cx + half_w + 2));
    const int y0 = std::max(0, static_cast<int>(cy - std::fabs(curve_amp) - thickness - 4));
    const int y1 = std::min(canvas.height - 1, static_cast<int>(cy + std::fabs(curve_amp) + thickness + 4));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double u = (x - cx) / half_w;
            if (std::fabs(u) > 1.0) continue;
            const double yc = cy + curve_amp * (2.0 * u * u - 1.0);
            const double local_t = thickness * std::sqrt(std::max(0.0, 1.0 - u * u));
            if (local_t <= 0) continue;
            const double d = std::fabs(y - yc) - local_t;
            blend(canvas, x, y, value, smooth_cov(d, edge));
        }
}

}  // namespace

Image8 render_face(const IdentityFactors& id, const ExpressionFactors& ex, int side,
                   std::array<Point, 3>* keypoints_out) {
    if (side < 32) throw std::invalid_argument("render_face: side must be >= 32 to resolve features");
    const double s = side;
    ImageF canvas = ImageF::filled(side, side, 20.0);
    const double edge = std::max(0.8, s / 80.0);

    const double face_v = id.base_intensity * 255.0;
    fill_ellipse(canvas, 0.5 * s, 0.52 * s, id.oval_w * 0.42 * s, id.oval_h * 0.44 * s, face_v, edge);

    const double eye_y = 0.40 * s;
    const double eye_dx = id.eye_spacing * 0.5 * s;
    const Point eye_l{0.5 * s - eye_dx, eye_y};
    const Point eye_r{0.5 * s + eye_dx, eye_y};
    const double eye_ax = 0.065 * s;
    const double eye_ay = std::max(0.012, 0.042 * ex.eye_open) * s;
    fill_ellipse(canvas, eye_l.x, eye_l.y, eye_ax, eye_ay, 235.0, edge);
    fill_ellipse(canvas, eye_r.x, eye_r.y, eye_ax, eye_ay, 235.0, edge);
    const double pupil_r = std::min(0.02 * s, eye_ay * 0.8);
    fill_ellipse(canvas, eye_l.x, eye_l.y, pupil_r, pupil_r, 30.0, edge);
    fill_ellipse(canvas, eye_r.x, eye_r.y, pupil_r, pupil_r, 30.0, edge);

    // brows, mirrored rotation: positive angle lifts the inner ends
    const double brow_y = eye_y - 0.085 * s;
    const double brow_half = 0.07 * s;
    const double angle = ex.brow_angle * 0.45;
    const double ca = std::cos(angle), sa = std::sin(angle);
    auto brow = [&](const Point& center, double mirror) {
        const double hx = brow_half * ca, hy = brow_half * sa * mirror;
        fill_capsule(canvas, {center.x - hx, center.y + hy}, {center.x + hx, center.y - hy},
                     0.012 * s, 45.0, edge);
    };
    brow({eye_l.x, brow_y}, -1.0);
    brow({eye_r.x, brow_y}, 1.0);

    const Point nose_top{0.5 * s, 0.46 * s};
    const Point nose_tip{0.5 * s, 0.46 * s + id.nose_len * s};
    fill_capsule(canvas, nose_top, nose_tip, 0.013 * s, 70.0, edge);

    fill_mouth(canvas, 0.5 * s, 0.72 * s, 0.16 * s, -ex.mouth_curve * 0.05 * s,
               (0.012 + 0.05 * ex.mouth_open) * s, 60.0, edge);

    if (keypoints_out) *keypoints_out = {eye_l, eye_r, nose_tip};
    return to_u8(canvas);
}

// ------------------------------------------------------------------- corpus

Corpus synth_corpus(const SynthOptions& opts) {
    if (opts.n_identities < 2) throw std::invalid_argument("synth_corpus: need at least 2 identities");
    if (opts.classes < 2) throw std::invalid_argument("synth_corpus: need at least 2 classes");
    if (opts.levels < 1) throw std::invalid_argument("synth_corpus: need at least 1 level");
    if (opts.side < 32) throw std::invalid_argument("synth_corpus: side must be >= 32");
    if (opts.spurious_clean < 0 || opts.spurious_clean > opts.n_identities)
        throw std::invalid_argument("synth_corpus: spurious_clean out of range");

    Corpus corpus;
    corpus.options = opts;
    const int biased_count = opts.spurious_clean > 0 ? opts.n_identities - opts.spurious_clean
                                                     : 0;
    for (int id = 0; id < opts.n_identities; ++id) {
        const IdentityFactors idf = identity_factors_for(opts, id);
        const bool biased = opts.spurious_clean > 0 && id < biased_count;
        auto emit = [&](int label, int level) {
            FaceSample sample;
            sample.identity_id = id;
            sample.expression_label = label;
            sample.intensity_level = level;
            sample.image = render_face(idf, expression_factors(label, level, opts.levels),
                                       opts.side, &sample.keypoints);
            corpus.samples.push_back(std::move(sample));
        };
        emit(kNeutralLabel, 1);
        if (biased) {
            const int pref = id % opts.classes;
            for (int level = 1; level <= opts.levels; ++level) emit(pref, level);
        } else {
            for (int label = 0; label < opts.classes; ++label)
                for (int level = 1; level <= opts.levels; ++level) emit(label, level);
        }
    }
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
    fs::create_directories(dir);
    json manifest;
    manifest["side"] = corpus.options.side;
    manifest["identities"] = corpus.options.n_identities;
    manifest["classes"] = corpus.options.classes;
    manifest["levels"] = corpus.options.levels;
    manifest["seed"] = corpus.options.seed;
    manifest["spurious_clean"] = corpus.options.spurious_clean;
    manifest["samples"] = json::array();
    for (const FaceSample& s : corpus.samples) {
        char name[64];
        if (s.expression_label == kNeutralLabel)
            std::snprintf(name, sizeof(name), "id%03d_neutral.pgm", s.identity_id);
        else
            std::snprintf(name, sizeof(name), "id%03d_e%dl%d.pgm", s.identity_id,
                          s.expression_label, s.intensity_level);
        write_pgm((fs::path(dir) / name).string(), s.image);
        json entry;
        entry["path"] = name;
        entry["identity_id"] = s.identity_id;
        entry["expression_label"] = s.expression_label;
        entry["intensity_level"] = s.intensity_level;
        entry["keypoints"] = json::array();
        for (const Point& p : s.keypoints) entry["keypoints"].push_back({p.x, p.y});
        manifest["samples"].push_back(std::move(entry));
    }
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("write_corpus: cannot write manifest in " + dir);
}

Corpus load_corpus(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_corpus: cannot open " + manifest_path);
    json manifest = json::parse(in);
    Corpus corpus;
    corpus.options.side = manifest.at("side").get<int>();
    corpus.options.n_identities = manifest.at("identities").get<int>();
    corpus.options.classes = manifest.at("classes").get<int>();
    corpus.options.levels = manifest.at("levels").get<int>();
    corpus.options.seed = manifest.at("seed").get<std::uint64_t>();
    corpus.options.spurious_clean = manifest.value("spurious_clean", 0);
    const fs::path base = fs::path(manifest_path).parent_path();
    for (const json& entry : manifest.at("samples")) {
        FaceSample s;
        s.path = entry.at("path").get<std::string>();
        s.identity_id = entry.at("identity_id").get<int>();
        s.expression_label = entry.at("expression_label").get<int>();
        s.intensity_level = entry.at("intensity_level").get<int>();
        const json& kps = entry.at("keypoints");
        if (kps.size() != 3) throw std::runtime_error("load_corpus: expected 3 keypoints");
        for (int i = 0; i < 3; ++i) {
            s.keypoints[static_cast<std::size_t>(i)].x = kps[static_cast<std::size_t>(i)][0].get<double>();
            s.keypoints[static_cast<std::size_t>(i)].y = kps[static_cast<std::size_t>(i)][1].get<double>();
        }
        s.image = read_pgm((base / s.path).string());
        if (s.expression_label != kNeutralLabel &&
            (s.expression_label < 0 || s.expression_label >= corpus.options.classes))
            throw std::runtime_error("load_corpus: expression label out of range in " + s.path);
        for (const Point& p : s.keypoints)
            if (p.x < 0 || p.y < 0 || p.x >= s.image.width || p.y >= s.image.height)
                throw std::runtime_error("load_corpus: keypoint outside image in " + s.path);
        corpus.samples.push_back(std::move(s));
    }
    return corpus;
}

// ------------------------------------------------------------- preprocessing

std::array<Point, 3> canonical_keypoints(int side) {
    const double m = side;
    return {Point{0.3 * m, 0.35 * m}, Point{0.7 * m, 0.35 * m}, Point{0.5 * m, 0.6 * m}};
}

ImageF align_face(const FaceSample& sample, const std::array<Point, 3>& canonical, int out_side) {
    if (near_collinear(sample.keypoints))
        throw std::invalid_argument("align_face: keypoints are near-collinear");
    const Image8 eq = hist_equalize(sample.image);
    const Similarity fwd =
        fit_similarity({sample.keypoints[0], sample.keypoints[1], sample.keypoints[2]},
                       {canonical[0], canonical[1], canonical[2]});
    return warp_similarity(to_float(eq), fwd, out_side, out_side);
}

Tensor augment(const ImageF& aligned, AugmentMode mode, int n, int m, Rng& rng) {
    if (m > n) throw std::invalid_argument("augment: crop size exceeds resize size");
    ImageF img = resize_bilinear(aligned, n, n);
    int ox = (n - m) / 2, oy = (n - m) / 2;
    if (mode == AugmentMode::train) {
        if (rng.bernoulli(0.5)) img = flip_horizontal(img);
        img = rotate_about_center(img, rng.uniform(-3.0, 3.0));
        ox = n > m ? static_cast<int>(rng.uniform_int(n - m + 1)) : 0;
        oy = n > m ? static_cast<int>(rng.uniform_int(n - m + 1)) : 0;
    }
    return image_to_unit_tensor(crop(img, ox, oy, m, m));
}

AverageFaces average_faces(const std::vector<FaceSample>& train_samples, int classes, int n, int m,
                           int peak_min) {
    AverageFaces avg;
    avg.neutral = ImageF::filled(m, m, 0.0);
    avg.expressive.assign(static_cast<std::size_t>(classes), ImageF::filled(m, m, 0.0));
    std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
    std::int64_t neutral_count = 0;
    const auto canonical = canonical_keypoints(m);
    Rng unused(0);
    for (const FaceSample& s : train_samples) {
        if (s.fold_role != FoldRole::train)
            throw std::invalid_argument("average_faces: sample without training-fold provenance");
        const bool is_neutral = s.expression_label == kNeutralLabel;
        if (!is_neutral && s.intensity_level < peak_min) continue;
        const ImageF view =
            unit_tensor_to_image(augment(align_face(s, canonical, m), AugmentMode::test, n, m, unused));
        ImageF& acc = is_neutral ? avg.neutral : avg.expressive[static_cast<std::size_t>(s.expression_label)];
        for (std::size_t i = 0; i < acc.px.size(); ++i) acc.px[i] += view.px[i];
        if (is_neutral) ++neutral_count;
        else ++counts[static_cast<std::size_t>(s.expression_label)];
    }
    if (neutral_count == 0) throw std::invalid_argument("average_faces: no neutral samples");
    for (double& v : avg.neutral.px) v /= static_cast<double>(neutral_count);
    for (int k = 0; k < classes; ++k) {
        if (counts[static_cast<std::size_t>(k)] == 0)
            throw std::invalid_argument("average_faces: no peak samples for class " + std::to_string(k));
        for (double& v : avg.expressive[static_cast<std::size_t>(k)].px)
            v /= static_cast<double>(counts[static_cast<std::size_t>(k)]);
    }
    return avg;
}

// ---------------------------------------------------------------------- folds

std::vector<int> FoldPlan::train_identities(int run) const {
    const RunSpec& r = runs.at(static_cast<std::size_t>(run));
    std::vector<int> out;
    for (int f = 0; f < n_folds; ++f) {
        if (f == r.test_fold || f == r.val_fold) continue;
        out.insert(out.end(), fold_identities[static_cast<std::size_t>(f)].begin(),
                   fold_identities[static_cast<std::size_t>(f)].end());
    }
    return out;
}

std::string FoldPlan::to_json() const {
    json j;
    j["n_folds"] = n_folds;
    j["folds"] = fold_identities;
    j["runs"] = json::array();
    for (const RunSpec& r : runs) j["runs"].push_back({{"test", r.test_fold}, {"val", r.val_fold}});
    return j.dump(2);
}

FoldPlan make_folds(const std::vector<int>& identities, int n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw std::invalid_argument("make_folds: need at least 2 folds");
    if (static_cast<std::size_t>(n_folds) > identities.size())
        throw std::invalid_argument("make_folds: more folds than identities (" +
                                    std::to_string(n_folds) + " > " +
                                    std::to_string(identities.size()) + ")");
    std::vector<int> shuffled = identities;
    Rng rng(seed);
    rng.shuffle(shuffled);
    FoldPlan plan;
    plan.n_folds = n_folds;
    plan.fold_identities.assign(static_cast<std::size_t>(n_folds), {});
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        plan.fold_identities[i % static_cast<std::size_t>(n_folds)].push_back(shuffled[i]);
    for (int r = 0; r < n_folds; ++r) plan.runs.push_back({r, (r + 1) % n_folds});
    return plan;
}

void validate_fold_plan(const FoldPlan& plan, const std::vector<int>& identities) {
    std::set<int> seen;
    std::size_t total = 0;
    for (const auto& fold : plan.fold_identities) {
        for (int id : fold) {
            if (!seen.insert(id).second)
                throw std::invalid_argument("fold plan: identity " + std::to_string(id) +
                                            " appears in two folds");
            ++total;
        }
    }
    if (total != identities.size())
        throw std::invalid_argument("fold plan: folds do not cover the identity set");
    for (int id : identities)
        if (!seen.count(id))
            throw std::invalid_argument("fold plan: identity " + std::to_string(id) + " missing");
    for (const RunSpec& r : plan.runs)
        if (r.test_fold == r.val_fold || r.test_fold < 0 || r.val_fold < 0 ||
            r.test_fold >= plan.n_folds || r.val_fold >= plan.n_folds)
            throw std::invalid_argument("fold plan: invalid run roles");
}

}  // namespace ifgan
