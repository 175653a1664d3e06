#include "mms/synth.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "mms/io.hpp"
#include "mms/rng.hpp"

namespace mms {

namespace {

constexpr long kCviewRows = 2457;
constexpr long kCviewCols = 1996;
constexpr long kFfdmRows = 4096;
constexpr long kFfdmCols = 3328;

struct Lesion {
    BBox2D cview_box;  // shared C-View coordinate space
    int center_slice = 0;
    bool malignant = true;
};

DetBox make_box(const BBox2D& geom, Scalar s_m, Scalar s_b, Modality origin) {
    DetBox b;
    b.geom = geom;
    b.score_malignant = s_m;
    b.score_benign = s_b;
    b.origin = origin;
    return b;
}

BBox2D to_ffdm_space(const BBox2D& cview) {
    const Scalar sx = static_cast<Scalar>(kFfdmCols) / static_cast<Scalar>(kCviewCols);
    const Scalar sy = static_cast<Scalar>(kFfdmRows) / static_cast<Scalar>(kCviewRows);
    return {cview.cx * sx, cview.cy * sy, cview.w * sx, cview.h * sy};
}

}  // namespace

SynthManifest synth_generate(const SynthConfig& config,
                             const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::vector<io::PredictionRecord> predictions;
    std::vector<io::BreastLabelRecord> labels;
    std::vector<GroundTruthBox> gts;
    std::map<std::string, PatientTimeline> timelines;
    std::vector<io::MaskRecord> masks;

    auto background_score = [](std::mt19937_64& rng) {
        std::uniform_real_distribution<Scalar> d(0.0, 0.25);
        return d(rng);
    };
    auto lesion_score = [](std::mt19937_64& rng) {
        std::uniform_real_distribution<Scalar> d(0.7, 0.99);
        return d(rng);
    };

    for (long e = 0; e < config.n_exams; ++e) {
        auto rng = substream(config.seed, static_cast<std::uint64_t>(e));
        const std::string patient = "p" + std::to_string(e);
        const std::string exam = "e" + std::to_string(e);

        std::uniform_real_distribution<Scalar> unit(0.0, 1.0);
        std::uniform_real_distribution<Scalar> side(config.lesion_min_px, config.lesion_max_px);
        std::uniform_int_distribution<int> slice_pick(5, config.n_slices - 6);

        for (Laterality lat : {Laterality::Left, Laterality::Right}) {
            const bool positive = unit(rng) < config.prevalence;
            std::vector<Lesion> lesions;
            if (positive) {
                Lesion l;
                l.cview_box.w = side(rng);
                l.cview_box.h = side(rng);
                std::uniform_real_distribution<Scalar> px(
                    l.cview_box.w, static_cast<Scalar>(kCviewCols) - l.cview_box.w);
                std::uniform_real_distribution<Scalar> py(
                    200.0, static_cast<Scalar>(kCviewRows) - 200.0);
                l.cview_box.cx = px(rng);
                l.cview_box.cy = py(rng);
                l.center_slice = slice_pick(rng);
                l.malignant = true;
                lesions.push_back(l);
            }

            io::BreastLabelRecord label;
            label.patient_id = patient;
            label.exam_id = exam;
            label.laterality = lat;
            label.malignant = positive ? 1 : 0;
            label.benign = 0;
            labels.push_back(label);

            for (View view : {View::CC, View::MLO}) {
                for (Modality mod : {Modality::FFDM, Modality::CVIEW, Modality::DBT}) {
                    io::PredictionRecord rec;
                    rec.key.patient_id = patient;
                    rec.key.exam_id = exam;
                    rec.key.laterality = lat;
                    rec.key.view = view;
                    rec.key.modality = mod;
                    rec.key.image_id = exam + "_" + to_string(lat) + "_" + to_string(view) +
                                       "_" + to_string(mod);
                    rec.model_id = std::string("synth_") + to_string(mod);
                    rec.acquisition_id =
                        exam + "_" + to_string(lat) + "_" + to_string(view) + "_acq";

                    ImageGeom geom;
                    geom.rows = mod == Modality::FFDM ? kFfdmRows : kCviewRows;
                    geom.cols = mod == Modality::FFDM ? kFfdmCols : kCviewCols;
                    if (mod == Modality::DBT) geom.n_slices = config.n_slices;
                    rec.geom = geom;

                    // Planted lesions dominate; a couple of low-score
                    // background boxes keep aggregation honest.
                    Scalar best = 0;
                    int cell = 0;
                    for (const auto& l : lesions) {
                        const BBox2D geom_box =
                            mod == Modality::FFDM ? to_ffdm_space(l.cview_box) : l.cview_box;
                        DetBox b = make_box(geom_box, lesion_score(rng),
                                            background_score(rng), mod);
                        if (mod == Modality::DBT) b.slice = l.center_slice;
                        b.source_anchor = GridIndex{0, cell++};
                        best = std::max(best, b.score_malignant);
                        rec.boxes.push_back(b);
                    }
                    for (int noise = 0; noise < 2; ++noise) {
                        std::uniform_real_distribution<Scalar> nx(
                            100.0, static_cast<Scalar>(geom.cols) - 100.0);
                        std::uniform_real_distribution<Scalar> ny(
                            100.0, static_cast<Scalar>(geom.rows) - 100.0);
                        DetBox b = make_box({nx(rng), ny(rng), 60, 60},
                                            background_score(rng), background_score(rng), mod);
                        if (mod == Modality::DBT) b.slice = slice_pick(rng);
                        b.source_anchor = GridIndex{1, noise};
                        rec.boxes.push_back(b);
                    }
                    rec.image_scores.y_malignant =
                        positive ? std::max(best, 0.5) : background_score(rng);
                    rec.image_scores.y_benign = background_score(rng);
                    predictions.push_back(std::move(rec));
                }

                // Ground truth lives in the C-View coordinate space.
                for (std::size_t li = 0; li < lesions.size(); ++li) {
                    GroundTruthBox gt;
                    gt.geom = lesions[li].cview_box;
                    gt.lesion_id = exam + "_" + to_string(lat) + "_les" + std::to_string(li);
                    gt.image_id = exam + "_" + to_string(lat) + "_" + to_string(view) +
                                  "_CVIEW";
                    gts.push_back(gt);
                }
            }

            if (positive) {
                PathologyRecord path_rec;
                path_rec.patient_id = patient;
                path_rec.date = date_from_string("2024-02-01");
                path_rec.laterality = lat;
                path_rec.malignant = true;
                timelines[patient].pathology.push_back(path_rec);
            }
        }

        ExamRecord screening;
        screening.patient_id = patient;
        screening.exam_id = exam;
        screening.date = date_from_string("2024-01-15");
        screening.kind = ExamKind::ScreeningMammo;
        bool any_positive = false;
        for (const auto& l : labels)
            if (l.exam_id == exam && l.malignant) any_positive = true;
        screening.birads = any_positive ? 0 : 1;
        timelines[patient].patient_id = patient;
        timelines[patient].exams.push_back(screening);
    }

    // Dedicated patients covering each filtering rule.
    auto add_rule_patient = [&](const std::string& pid, int birads, bool malignant,
                                bool benign, bool occult, bool follow_up_ok,
                                bool quiet_window_violated) {
        PatientTimeline tl;
        tl.patient_id = pid;
        ExamRecord screening;
        screening.patient_id = pid;
        screening.exam_id = pid + "_screen";
        screening.date = date_from_string("2024-01-15");
        screening.kind = ExamKind::ScreeningMammo;
        screening.birads = birads;
        screening.occult_left = occult;
        tl.exams.push_back(screening);
        if (malignant || benign) {
            PathologyRecord rec;
            rec.patient_id = pid;
            rec.date = date_from_string("2024-02-10");
            rec.laterality = Laterality::Left;
            rec.malignant = malignant;
            rec.benign = benign;
            tl.pathology.push_back(rec);
        }
        if (follow_up_ok) {
            ExamRecord fu;
            fu.patient_id = pid;
            fu.exam_id = pid + "_followup";
            fu.date = date_from_string("2024-05-15");
            fu.kind = ExamKind::DiagnosticMammo;
            fu.birads = 2;
            tl.exams.push_back(fu);
        }
        if (quiet_window_violated) {
            ExamRecord extra;
            extra.patient_id = pid;
            extra.exam_id = pid + "_imaging";
            extra.date = date_from_string("2024-06-15");
            extra.kind = ExamKind::OtherBreastImaging;
            extra.birads = 2;
            tl.exams.push_back(extra);
        }
        timelines[pid] = tl;
    };
    add_rule_patient("rule_e1", 3, false, false, false, false, false);
    add_rule_patient("rule_e2", 1, true, false, false, false, false);
    add_rule_patient("rule_e3", 2, false, true, false, false, false);
    add_rule_patient("rule_e4_fail", 0, false, false, false, false, false);
    add_rule_patient("rule_e4_pass", 0, false, false, false, true, false);
    add_rule_patient("rule_e5", 1, false, false, false, false, true);
    add_rule_patient("rule_occult", 0, true, false, true, false, false);

    // Matched foreground masks for a few exams (triplet matching input).
    for (long e = 0; e < std::min(config.n_mask_exams, config.n_exams); ++e) {
        const std::string patient = "p" + std::to_string(e);
        const std::string exam = "e" + std::to_string(e);
        for (Modality mod : {Modality::FFDM, Modality::CVIEW, Modality::DBT}) {
            io::MaskRecord rec;
            rec.key.patient_id = patient;
            rec.key.exam_id = exam;
            rec.key.laterality = Laterality::Left;
            rec.key.view = View::CC;
            rec.key.modality = mod;
            rec.key.image_id = exam + "_L_CC_" + to_string(mod) + "_mask";
            rec.acquisition_id = exam + "_L_CC_acq";
            rec.geom.rows = mod == Modality::FFDM ? kFfdmRows : kCviewRows;
            rec.geom.cols = mod == Modality::FFDM ? kFfdmCols : kCviewCols;
            if (mod == Modality::DBT) rec.geom.n_slices = config.n_slices;
            rec.mask = MaskGrid::Zero(rec.geom.rows, rec.geom.cols);
            // Breast occupies the left 60% of the image away from the edges;
            // identical fractions keep the modalities field-of-view aligned.
            const long r0 = rec.geom.rows / 16;
            const long r1 = rec.geom.rows - rec.geom.rows / 16;
            const long c1 = (rec.geom.cols * 3) / 5;
            for (long r = r0; r < r1; ++r)
                for (long c = 0; c < c1; ++c) rec.mask(r, c) = 1;
            masks.push_back(std::move(rec));
        }
    }

    SynthManifest manifest;
    manifest.predictions = out_dir / "predictions.ndjson";
    manifest.labels = out_dir / "labels.csv";
    manifest.gt_boxes = out_dir / "gt_boxes.ndjson";
    manifest.timeline = out_dir / "timeline.csv";
    manifest.masks = out_dir / "masks.ndjson";
    io::write_predictions(manifest.predictions, predictions);
    io::write_breast_labels_csv(manifest.labels, labels);
    io::write_gt_boxes(manifest.gt_boxes, gts);
    io::write_timeline_csv(manifest.timeline, timelines);
    io::write_masks(manifest.masks, masks);
    return manifest;
}

}  // namespace mms
