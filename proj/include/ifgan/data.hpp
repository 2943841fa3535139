#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ifgan/image.hpp"
#include "ifgan/rng.hpp"
#include "ifgan/tensor.hpp"

namespace ifgan {

inline constexpr int kNeutralLabel = -1;

enum class FoldRole { unassigned, train, validation, test };

struct FaceSample {
    Image8 image;
    int identity_id = 0;
    int expression_label = kNeutralLabel;  // -1 = neutral, else [0, K)
    int intensity_level = 1;               // [1, levels]
    std::array<Point, 3> keypoints{};      // left eye, right eye, nose tip
    std::string path;                      // relative path when stored
    FoldRole fold_role = FoldRole::unassigned;
};

// ground-truth generative factors; identity factors are constant per
// identity, expression factors depend only on (label, level)
struct IdentityFactors {
    double oval_w = 0.8;
    double oval_h = 0.9;
    double eye_spacing = 0.34;
    double base_intensity = 0.6;
    double nose_len = 0.16;
};

struct ExpressionFactors {
    double mouth_curve = 0.0;
    double mouth_open = 0.1;
    double eye_open = 1.0;
    double brow_angle = 0.0;
};

ExpressionFactors expression_factors(int label, int level, int levels);

struct SynthOptions {
    int n_identities = 20;
    int classes = 6;
    int levels = 4;
    int side = 64;
    std::uint64_t seed = 1;
    // identities [0, n-spurious_clean) get their base intensity tied to a
    // preferred label and emit only that expression; the rest stay unbiased.
    // 0 disables the biased regime entirely.
    int spurious_clean = 0;
};

struct Corpus {
    SynthOptions options;
    std::vector<FaceSample> samples;
};

IdentityFactors identity_factors_for(const SynthOptions& opts, int identity_id);
Image8 render_face(const IdentityFactors& id, const ExpressionFactors& ex, int side,
                   std::array<Point, 3>* keypoints_out = nullptr);

// one neutral plus classes*levels expressive samples per identity
Corpus synth_corpus(const SynthOptions& opts);

// disk layout: PGM files plus one manifest JSON
void write_corpus(const Corpus& corpus, const std::string& dir);
Corpus load_corpus(const std::string& manifest_path);

// ------------------------------------------------------------- preprocessing

std::array<Point, 3> canonical_keypoints(int side);

// histogram equalization followed by 3-point similarity alignment onto the
// canonical keypoints at out_side
ImageF align_face(const FaceSample& sample, const std::array<Point, 3>& canonical, int out_side);

enum class AugmentMode { train, test };

// resize to n, (train: flip p=.5, rotate +-3deg, random crop; test: center
// crop) to m, then map to [-1,1]
Tensor augment(const ImageF& aligned, AugmentMode mode, int n, int m, Rng& rng);

struct AverageFaces {
    ImageF neutral;                  // I_AN
    std::vector<ImageF> expressive;  // I_AE per class
};

// pixel means of the test-mode views of the given training-fold samples;
// neutral average from neutral samples, per-class averages from peak
// (level >= peak_min) samples. Every sample must carry FoldRole::train.
AverageFaces average_faces(const std::vector<FaceSample>& train_samples, int classes, int n, int m,
                           int peak_min = 3);

// ---------------------------------------------------------------------- folds

struct RunSpec {
    int test_fold = 0;
    int val_fold = 1;
};

struct FoldPlan {
    int n_folds = 0;
    std::vector<std::vector<int>> fold_identities;  // pairwise disjoint partition
    std::vector<RunSpec> runs;

    std::vector<int> train_identities(int run) const;
    std::string to_json() const;
};

// seeded shuffle + round-robin; run r tests fold r and validates (r+1)%n
FoldPlan make_folds(const std::vector<int>& identities, int n_folds, std::uint64_t seed);

void validate_fold_plan(const FoldPlan& plan, const std::vector<int>& identities);

}  // namespace ifgan
