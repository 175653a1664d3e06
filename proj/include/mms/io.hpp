#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mms/cohort.hpp"
#include "mms/detect.hpp"
#include "mms/ensemble.hpp"
#include "mms/metrics.hpp"
#include "mms/types.hpp"

namespace mms::io {

// One line of the predictions NDJSON file: the full model output for one
// image under one model. (image_id, model_id) pairs are unique per file.
struct PredictionRecord {
    ImageKey key;
    std::string model_id;
    ImagePrediction image_scores;
    std::vector<DetBox> boxes;
    std::optional<ImageGeom> geom;
    std::string acquisition_id;  // links C-View and DBT acquisitions
};

struct BreastLabelRecord {
    std::string patient_id;
    std::string exam_id;
    Laterality laterality = Laterality::Left;
    int malignant = 0;
    int benign = 0;
};

struct MaskRecord {
    ImageKey key;
    ImageGeom geom;
    std::string acquisition_id;
    MaskGrid mask;
};

struct BreastScoreRecord {
    std::string exam_id;
    Laterality laterality = Laterality::Left;
    std::string model_id;
    Modality modality = Modality::FFDM;
    Scalar score_malignant = 0;
    Scalar score_benign = 0;
};

struct RecallRecord {
    std::string exam_id;
    int recalled = 0;
};

// Parse errors carry the file, line, and (for CSV) field of the offense.
std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path);
std::vector<ScoredCase> read_scores_csv(const std::filesystem::path& path);
std::vector<BreastLabelRecord> read_breast_labels_csv(const std::filesystem::path& path);
std::vector<GroundTruthBox> read_gt_boxes(const std::filesystem::path& path);
std::map<std::string, PatientTimeline> read_timeline_csv(const std::filesystem::path& path);
std::vector<MaskRecord> read_masks(const std::filesystem::path& path);
std::vector<BreastScoreRecord> read_breast_scores_csv(const std::filesystem::path& path);
std::vector<RecallRecord> read_recalls_csv(const std::filesystem::path& path);

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records);
void write_scores_csv(const std::filesystem::path& path,
                      const std::vector<ScoredCase>& cases);
void write_breast_labels_csv(const std::filesystem::path& path,
                             const std::vector<BreastLabelRecord>& records);
void write_gt_boxes(const std::filesystem::path& path,
                    const std::vector<GroundTruthBox>& boxes);
void write_timeline_csv(const std::filesystem::path& path,
                        const std::map<std::string, PatientTimeline>& timelines);
void write_masks(const std::filesystem::path& path, const std::vector<MaskRecord>& records);
void write_breast_scores_csv(const std::filesystem::path& path,
                             const std::vector<BreastScoreRecord>& records);
void write_recalls_csv(const std::filesystem::path& path,
                       const std::vector<RecallRecord>& records);

// Run configuration; unknown keys in the file are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    Scalar iou_threshold = 0.3;
    Scalar multimodal_iou = kMultiModalIouThreshold;
    Scalar triplet_iou = kTripletIouThreshold;
    Scalar margin_percentiles = 1.0;
    std::string level = "breast";
    std::string format = "text";
    std::vector<Modality> alternation_order = {Modality::FFDM, Modality::CVIEW,
                                               Modality::DBT};
};

RunConfig read_config(const std::filesystem::path& path);

// Whole-file write through a temp file plus rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

}  // namespace mms::io
