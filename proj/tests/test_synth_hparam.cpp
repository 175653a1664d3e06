#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "mms/detect.hpp"
#include "mms/hparam.hpp"
#include "mms/io.hpp"
#include "mms/metrics.hpp"
#include "mms/synth.hpp"

using namespace mms;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("mms_synth_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("synth output passes ingest validation and is seed-deterministic") {
    TempDir a("a"), b("b");
    SynthConfig cfg;
    cfg.n_exams = 12;
    cfg.prevalence = 0.3;
    cfg.n_mask_exams = 1;
    cfg.seed = 5;
    auto ma = synth_generate(cfg, a.path);
    auto mb = synth_generate(cfg, b.path);

    CHECK(slurp(ma.predictions) == slurp(mb.predictions));
    CHECK(slurp(ma.labels) == slurp(mb.labels));
    CHECK(slurp(ma.gt_boxes) == slurp(mb.gt_boxes));
    CHECK(slurp(ma.timeline) == slurp(mb.timeline));
    CHECK(slurp(ma.masks) == slurp(mb.masks));

    auto preds = io::read_predictions(ma.predictions);
    CHECK(!preds.empty());
    auto labels = io::read_breast_labels_csv(ma.labels);
    CHECK(labels.size() == 24);  // two breasts per exam
    auto gts = io::read_gt_boxes(ma.gt_boxes);
    auto timeline = io::read_timeline_csv(ma.timeline);
    CHECK(timeline.size() >= 12);
    auto masks = io::read_masks(ma.masks);
    CHECK(masks.size() == 3);  // one exam, three modalities
}

TEST_CASE("synth prevalence zero means no positives anywhere") {
    TempDir dir("zero");
    SynthConfig cfg;
    cfg.n_exams = 10;
    cfg.prevalence = 0.0;
    cfg.seed = 3;
    auto m = synth_generate(cfg, dir.path);
    for (const auto& l : io::read_breast_labels_csv(m.labels)) {
        CHECK(l.malignant == 0);
        CHECK(l.benign == 0);
    }
    CHECK(io::read_gt_boxes(m.gt_boxes).empty());
}

TEST_CASE("planted lesions are recalled perfectly at 0 FP/image") {
    TempDir dir("froc");
    SynthConfig cfg;
    cfg.n_exams = 20;
    cfg.prevalence = 0.4;
    cfg.seed = 11;
    auto m = synth_generate(cfg, dir.path);

    auto preds = io::read_predictions(m.predictions);
    auto gts = io::read_gt_boxes(m.gt_boxes);
    REQUIRE(!gts.empty());

    // Evaluate the C-View model in the shared coordinate space.
    FrocInput in;
    for (const auto& rec : preds) {
        if (rec.key.modality != Modality::CVIEW) continue;
        in.predictions[rec.key.image_id] = rec.boxes;
        in.breast_of_image[rec.key.image_id] =
            rec.key.exam_id + "_" + to_string(rec.key.laterality);
    }
    in.gts = gts;
    FrocCurve curve = froc(in, FrocLevel::Lesion);
    CHECK(aufroc1(curve) == 1.0);
    CHECK(sensitivity_at_fp(curve, 0) == 1.0);
}

TEST_CASE("synth timeline exercises every filtering rule") {
    TempDir dir("rules");
    SynthConfig cfg;
    cfg.n_exams = 6;
    cfg.seed = 1;
    auto m = synth_generate(cfg, dir.path);
    auto timelines = io::read_timeline_csv(m.timeline);

    std::set<FilterRule> seen;
    for (const auto& [pid, tl] : timelines)
        for (const auto& out : filter_test_set(tl)) seen.insert(out.rule);
    for (FilterRule r : {FilterRule::E1, FilterRule::E2, FilterRule::E3, FilterRule::E4,
                         FilterRule::E5, FilterRule::OccultOnly, FilterRule::Pass})
        CHECK(seen.count(r));
}

TEST_CASE("synth masks form valid triplets") {
    TempDir dir("masks");
    SynthConfig cfg;
    cfg.n_exams = 2;
    cfg.n_mask_exams = 1;
    cfg.seed = 2;
    auto m = synth_generate(cfg, dir.path);
    auto masks = io::read_masks(m.masks);
    std::vector<TripletImage> images;
    for (const auto& rec : masks)
        images.push_back({rec.key, rec.geom, rec.mask, rec.acquisition_id});
    auto matched = match_triplets(images);
    REQUIRE(matched.triplets.size() == 1);
    CHECK(matched.triplets[0].iou >= kTripletIouThreshold);
}

TEST_CASE("hparam_sample respects the search distributions") {
    std::set<int> v1_ks, v2_ks, v1_heights, ffdm_heights;
    std::set<std::string> v1_archs, v2_archs;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        auto v1 = hparam_sample(DatasetVersion::V1, Modality::DBT, 7, i);
        const double log_lr = std::log10(v1.learning_rate);
        CHECK(log_lr >= -6.046);
        CHECK(log_lr <= -5.456);
        const double log_wd = std::log10(v1.weight_decay);
        CHECK(log_wd >= -3.523);
        CHECK(log_wd <= -3.155);
        CHECK(v1.momentum >= 0.80);
        CHECK(v1.momentum <= 0.92);
        v1_ks.insert(v1.top_k);
        v1_archs.insert(v1.architecture);
        v1_heights.insert(v1.image_height);

        auto v2 = hparam_sample(DatasetVersion::V2, Modality::FFDM, 7, i);
        const double v2_lr = std::log10(v2.learning_rate);
        CHECK(v2_lr >= -6.046);
        CHECK(v2_lr <= -5.398);
        v2_ks.insert(v2.top_k);
        v2_archs.insert(v2.architecture);
        ffdm_heights.insert(v2.image_height);
    }
    CHECK(v1_ks == std::set<int>{4, 5, 6, 7, 8, 9, 10});
    CHECK(v2_ks == std::set<int>{5, 6, 7, 8, 9});
    CHECK(v1_archs == std::set<std::string>{"s", "m", "l", "x"});
    CHECK(v2_archs == std::set<std::string>{"l", "x"});
    CHECK(v1_heights == std::set<int>{1536, 1664, 1792, 1920, 2048});
    CHECK(ffdm_heights == std::set<int>{2048, 2176, 2304, 2432, 2560, 2688, 2816});

    // V2 DBT keeps the shorter height set.
    std::set<int> dbt_heights;
    for (std::uint64_t i = 0; i < 2000; ++i)
        dbt_heights.insert(hparam_sample(DatasetVersion::V2, Modality::DBT, 7, i).image_height);
    CHECK(dbt_heights == std::set<int>{1536, 1664, 1792, 1920, 2048});

    // Same seed, same draw.
    auto a = hparam_sample(DatasetVersion::V1, Modality::FFDM, 9, 3);
    auto b = hparam_sample(DatasetVersion::V1, Modality::FFDM, 9, 3);
    CHECK(a.learning_rate == b.learning_rate);
    CHECK(a.top_k == b.top_k);
    CHECK(a.image_height == b.image_height);
}
