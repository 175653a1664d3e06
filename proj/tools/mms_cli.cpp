// Command-line front end: aggregation, head evaluation, metrics, statistics,
// ensembling, triage, cohort filtering, and synthetic data generation over
// the NDJSON/CSV wire formats documented in the README.
#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "mms/cohort.hpp"
#include "mms/detect.hpp"
#include "mms/ensemble.hpp"
#include "mms/head.hpp"
#include "mms/hparam.hpp"
#include "mms/io.hpp"
#include "mms/metrics.hpp"
#include "mms/stats.hpp"
#include "mms/synth.hpp"

using nlohmann::json;
using namespace mms;

namespace {

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty() || out_path == "-") {
        std::cout << content;
        return;
    }
    io::atomic_write(out_path, content);
}

std::string render(const json& j, const std::string& format) {
    if (format == "json") return j.dump(2) + "\n";
    // Plain text: flat key: value lines.
    std::ostringstream out;
    for (const auto& [key, value] : j.items())
        out << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
            << "\n";
    return out.str();
}

Target target_from_string(const std::string& s) {
    if (s == "malignant") return Target::Malignant;
    if (s == "benign") return Target::Benign;
    throw CLI::ValidationError("--target must be malignant or benign");
}

// Groups per-slice boxes of one prediction record into grid form for MSS.
// MSS numbers slices by grid position, so the original (possibly sparse)
// slice ids are returned for relocation afterwards. Anchor cells a slice
// does not mention are padded with off-canvas sentinel boxes (negative
// score) that the caller strips from the survivors.
struct StackedBoxes {
    SliceStack stack;
    std::vector<int> slice_ids;  // grid position -> original slice id
};

StackedBoxes stack_from_boxes(const std::vector<DetBox>& boxes) {
    std::map<int, std::vector<DetBox>> by_slice;
    int max_row = -1, max_col = -1;
    for (const auto& b : boxes) {
        if (!b.slice || !b.source_anchor)
            throw std::runtime_error("MSS needs slice and anchor on every box");
        by_slice[*b.slice].push_back(b);
        max_row = std::max(max_row, b.source_anchor->row);
        max_col = std::max(max_col, b.source_anchor->col);
    }
    const int h = max_row + 1, w = max_col + 1;
    StackedBoxes out;
    for (auto& [slice, slice_boxes] : by_slice) {
        ScoreGrid grid;
        grid.h = h;
        grid.w = w;
        grid.boxes.resize(static_cast<std::size_t>(h) * w);
        for (int cell = 0; cell < h * w; ++cell) {
            DetBox pad;
            pad.geom = {-1000.0 - 2.0 * cell, -1000.0, 1.0, 1.0};
            pad.score_malignant = -1;
            pad.score_benign = -1;
            pad.slice = slice;
            grid.boxes[static_cast<std::size_t>(cell)] = pad;
        }
        for (const auto& b : slice_boxes)
            grid.boxes[static_cast<std::size_t>(b.source_anchor->row) * w +
                       b.source_anchor->col] = b;
        out.stack.grids.push_back(std::move(grid));
        out.slice_ids.push_back(slice);
    }
    return out;
}

Mat mat_from_json(const json& rows, Eigen::Index expect_cols) {
    Mat m(static_cast<Eigen::Index>(rows.size()), expect_cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const auto& row = rows[static_cast<std::size_t>(r)];
        if (static_cast<Eigen::Index>(row.size()) != expect_cols)
            throw std::runtime_error("parameter row has wrong width");
        for (Eigen::Index c = 0; c < expect_cols; ++c)
            m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

int run_aggregate(const std::string& input, const std::string& output, const std::string& mode,
                  double iou_thr, const std::string& target_name) {
    const Target target = target_from_string(target_name);
    auto records = io::read_predictions(input);
    std::vector<io::PredictionRecord> out_records;

    if (mode == "nms") {
        for (auto rec : records) {
            rec.boxes = nms(rec.boxes, target, iou_thr).boxes();
            out_records.push_back(std::move(rec));
        }
    } else if (mode == "mss") {
        for (auto rec : records) {
            if (rec.key.modality == Modality::DBT && !rec.boxes.empty()) {
                StackedBoxes stacked = stack_from_boxes(rec.boxes);
                std::vector<DetBox> kept;
                for (auto& b : mss(stacked.stack, target, iou_thr)) {
                    if (b.score(target) < 0) continue;  // sentinel padding
                    b.slice = stacked.slice_ids[static_cast<std::size_t>(*b.slice)];
                    kept.push_back(b);
                }
                rec.boxes = std::move(kept);
            } else {
                rec.boxes = nms(rec.boxes, target, iou_thr).boxes();
            }
            out_records.push_back(std::move(rec));
        }
    } else if (mode == "multimodal") {
        // Group records by (exam, laterality, view); FFDM coordinates move to
        // the C-View space before the cross-modality NMS.
        std::map<std::string, std::vector<const io::PredictionRecord*>> groups;
        for (const auto& rec : records)
            groups[rec.key.exam_id + "|" + to_string(rec.key.laterality) + "|" +
                   to_string(rec.key.view)]
                .push_back(&rec);
        for (const auto& [group_key, members] : groups) {
            const io::PredictionRecord* cview = nullptr;
            for (const auto* rec : members)
                if (rec->key.modality == Modality::CVIEW) cview = rec;
            if (!cview || !cview->geom)
                throw std::runtime_error("multimodal group " + group_key +
                                         " lacks a C-View record with geometry");
            std::map<Modality, std::vector<DetBox>> per_modality;
            for (const auto* rec : members) {
                std::vector<DetBox> boxes = rec->boxes;
                if (rec->key.modality == Modality::FFDM) {
                    if (!rec->geom)
                        throw std::runtime_error("FFDM record without geometry in " + group_key);
                    boxes = to_shared_space(boxes, *rec->geom, *cview->geom);
                }
                auto& dst = per_modality[rec->key.modality];
                dst.insert(dst.end(), boxes.begin(), boxes.end());
            }
            auto merged = ensemble_boxes_multimodal(per_modality, target, iou_thr);

            // Unified boxes live in the C-View coordinate space and are
            // evaluated against C-View ground truth; the DBT-displayable
            // subset is attributed to the DBT image.
            io::PredictionRecord unified = *cview;
            unified.model_id = "multimodal";
            unified.boxes = merged.unified;
            out_records.push_back(std::move(unified));

            const io::PredictionRecord* dbt = nullptr;
            for (const auto* rec : members)
                if (rec->key.modality == Modality::DBT) dbt = rec;
            if (dbt) {
                io::PredictionRecord dbt_view = *dbt;
                dbt_view.model_id = "multimodal";
                dbt_view.boxes = merged.dbt_displayable;
                out_records.push_back(std::move(dbt_view));
            }
        }
    } else {
        throw CLI::ValidationError("--mode must be nms, mss, or multimodal");
    }
    io::write_predictions(output, out_records);
    return 0;
}

int run_predict_head(const std::string& input, const std::string& output) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open " + input);
    json spec = json::parse(in);

    const auto& pj = spec.at("params");
    const Eigen::Index L = pj.at("L").get<Eigen::Index>();
    const Eigen::Index S = pj.at("S").get<Eigen::Index>();
    AttentionParams attn;
    attn.w_vec = mat_from_json(json::array({pj.at("w")}), L).transpose();
    attn.V = mat_from_json(pj.at("V"), S);
    attn.U = mat_from_json(pj.at("U"), S);
    if (attn.V.rows() != L || attn.U.rows() != L)
        throw std::runtime_error("V/U must have L rows");
    HeadParams head;
    head.w_image = mat_from_json(pj.at("w_image"), 2);
    if (head.w_image.rows() != S) throw std::runtime_error("w_image must have S rows");

    const int k = spec.value("k", 5);
    const double nms_iou = spec.value("nms_iou", 0.3);
    const bool global_pool = spec.value("include_global_pool", false);

    std::ostringstream out;
    for (const auto& img : spec.at("images")) {
        const int h = img.at("h").get<int>();
        const int w = img.at("w").get<int>();
        SliceStack stack;
        std::vector<FeatureGrid> feats;
        for (const auto& slice : img.at("slices")) {
            ScoreGrid grid;
            grid.h = h;
            grid.w = w;
            grid.boxes.resize(static_cast<std::size_t>(h) * w);
            for (const auto& bj : slice.at("boxes")) {
                DetBox b;
                b.geom = {bj.at("cx").get<double>(), bj.at("cy").get<double>(),
                          bj.at("w").get<double>(), bj.at("h").get<double>()};
                b.score_malignant = bj.at("s_m").get<double>();
                b.score_benign = bj.at("s_b").get<double>();
                const auto& anchor = bj.at("anchor");
                b.source_anchor = GridIndex{anchor[0].get<int>(), anchor[1].get<int>()};
                b.slice = static_cast<int>(stack.grids.size());
                grid.boxes[static_cast<std::size_t>(b.source_anchor->row) * w +
                           b.source_anchor->col] = b;
            }
            FeatureGrid fg;
            fg.h = h;
            fg.w = w;
            fg.values = mat_from_json(slice.at("features"), S);
            if (fg.values.rows() != static_cast<Eigen::Index>(h) * w)
                throw std::runtime_error("features must have h*w rows");
            stack.grids.push_back(std::move(grid));
            feats.push_back(std::move(fg));
        }
        const ImagePrediction pred =
            dbt_image_prediction(stack, feats, k, nms_iou, attn, head, global_pool);
        out << json{{"image_id", img.at("image_id").get<std::string>()},
                    {"malignant", pred.y_malignant},
                    {"benign", pred.y_benign}}
                   .dump()
            << "\n";
    }
    emit(output, out.str());
    return 0;
}

int run_evaluate_classification(const std::string& scores_path, long bootstrap_n,
                                std::uint64_t seed, const std::string& format,
                                const std::string& output) {
    auto cases = io::read_scores_csv(scores_path);
    json result;
    result["n_cases"] = cases.size();
    result["auroc"] = auroc(cases);
    result["auprc"] = auprc(cases);
    if (bootstrap_n > 0) {
        auto roc_ci = bootstrap_ci(cases, auroc, bootstrap_n, seed);
        auto pr_ci = bootstrap_ci(cases, auprc, bootstrap_n, seed + 1);
        result["auroc_ci"] = {roc_ci.lo, roc_ci.hi};
        result["auprc_ci"] = {pr_ci.lo, pr_ci.hi};
    }
    emit(output, render(result, format));
    return 0;
}

int run_evaluate_detection(const std::string& pred_path, const std::string& gt_path,
                           const std::string& level, const std::string& modality,
                           const std::string& format, const std::string& output) {
    auto records = io::read_predictions(pred_path);
    auto gts = io::read_gt_boxes(gt_path);
    FrocInput in;
    for (const auto& rec : records) {
        if (modality != "all" && rec.key.modality != modality_from_string(modality)) continue;
        auto& dst = in.predictions[rec.key.image_id];
        dst.insert(dst.end(), rec.boxes.begin(), rec.boxes.end());
        in.breast_of_image[rec.key.image_id] =
            rec.key.exam_id + "_" + to_string(rec.key.laterality);
        if (rec.geom && rec.geom->n_slices) in.n_slices[rec.key.image_id] = rec.geom->n_slices;
    }
    in.gts = gts;
    const FrocLevel froc_level = level == "lesion" ? FrocLevel::Lesion : FrocLevel::Breast;
    FrocCurve curve = froc(in, froc_level);

    json result;
    result["level"] = level;
    result["n_images"] = curve.n_images;
    result["aufroc1"] = aufroc1(curve);
    result["sensitivity_at_0.5fp"] = sensitivity_at_fp(curve, 0.5);
    result["sensitivity_at_1fp"] = sensitivity_at_fp(curve, 1.0);
    result["sensitivity_at_2fp"] = sensitivity_at_fp(curve, 2.0);
    if (format == "csv") {
        std::ostringstream out;
        out << "fp_per_image,sensitivity\n";
        for (const auto& p : curve.points) out << p.fp_per_image << "," << p.sensitivity << "\n";
        emit(output, out.str());
        return 0;
    }
    json points = json::array();
    for (const auto& p : curve.points)
        points.push_back({{"fp_per_image", p.fp_per_image}, {"sensitivity", p.sensitivity}});
    result["froc_points"] = points;
    emit(output, render(result, format));
    return 0;
}

int run_select_ensemble(const std::string& scores_path, const std::string& labels_path,
                        int target_size, bool alternation, const std::string& output) {
    auto score_records = io::read_breast_scores_csv(scores_path);
    auto label_records = io::read_breast_labels_csv(labels_path);

    std::map<BreastKey, int> label_of;
    std::vector<BreastKey> breasts;
    for (const auto& l : label_records) {
        BreastKey key{l.exam_id, l.laterality};
        label_of[key] = l.malignant;
        breasts.push_back(key);
    }

    GreedyCandidates cand;
    for (const auto& key : breasts) cand.labels.push_back(label_of[key]);
    std::map<std::string, std::map<BreastKey, double>> by_model;
    std::map<std::string, Modality> modality_of;
    for (const auto& rec : score_records) {
        by_model[rec.model_id][{rec.exam_id, rec.laterality}] = rec.score_malignant;
        modality_of[rec.model_id] = rec.modality;
    }
    for (const auto& [model, scores] : by_model) {
        ModelId id;
        id.id = model;
        id.modality = modality_of[model];
        std::vector<Scalar> aligned;
        for (const auto& key : breasts) {
            auto it = scores.find(key);
            if (it == scores.end())
                throw std::runtime_error("model " + model + " missing breast " + key.exam_id +
                                         "/" + to_string(key.laterality));
            aligned.push_back(it->second);
        }
        cand.scores[id] = aligned;
    }

    auto trace = greedy_select(cand, target_size, alternation);
    json sel = json::array();
    for (const auto& [model, count] : trace.selection)
        sel.push_back({{"model_id", model}, {"count", count}});
    json result{{"selection", sel}, {"auroc_trajectory", trace.auroc_after},
                {"picks", trace.picks}};
    emit(output, result.dump(2) + "\n");
    return 0;
}

struct ExamScores {
    std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> by_exam;
};

ExamScores exam_scores_from(const std::vector<io::BreastScoreRecord>& records) {
    ExamScores out;
    for (const auto& rec : records) {
        auto& slot = out.by_exam[rec.exam_id];
        if (rec.laterality == Laterality::Left)
            slot.first = rec.score_malignant;
        else
            slot.second = rec.score_malignant;
    }
    return out;
}

int run_triage(const std::string& scores_path, const std::string& labels_path,
               std::optional<double> threshold, double margin, const std::string& format,
               const std::string& output) {
    auto records = io::read_breast_scores_csv(scores_path);
    ExamScores exams = exam_scores_from(records);

    double thr;
    json op_info;
    if (threshold) {
        thr = *threshold;
        op_info["threshold"] = thr;
    } else {
        if (labels_path.empty())
            throw CLI::ValidationError("triage needs --threshold or --labels");
        auto label_records = io::read_breast_labels_csv(labels_path);
        std::map<std::pair<std::string, Laterality>, int> label_of;
        for (const auto& l : label_records) label_of[{l.exam_id, l.laterality}] = l.malignant;
        std::vector<Scalar> scores;
        std::vector<int> labels;
        for (const auto& rec : records) {
            scores.push_back(rec.score_malignant);
            labels.push_back(label_of[{rec.exam_id, rec.laterality}]);
        }
        auto op = operating_point(scores, labels, margin);
        thr = op.threshold;
        op_info = {{"threshold", op.threshold},
                   {"base_percentile", op.base_percentile},
                   {"final_percentile", op.final_percentile}};
    }

    long all_green = 0, mixed = 0, all_gray = 0;
    json rows = json::array();
    for (const auto& [exam_id, pair] : exams.by_exam) {
        if (!pair.first || !pair.second)
            throw std::runtime_error("exam " + exam_id + " is missing a breast score");
        auto result = triage(exam_id, *pair.first, *pair.second, thr);
        all_green += result.category == TriageCategory::AllGreen;
        mixed += result.category == TriageCategory::Mixed;
        all_gray += result.category == TriageCategory::AllGray;
        rows.push_back({{"exam_id", exam_id},
                        {"left", result.left == BreastFlag::Green ? "green" : "gray"},
                        {"right", result.right == BreastFlag::Green ? "green" : "gray"},
                        {"category", result.category == TriageCategory::AllGreen ? "all_green"
                                     : result.category == TriageCategory::Mixed  ? "mixed"
                                                                                 : "all_gray"}});
    }
    json result{{"operating_point", op_info},
                {"counts",
                 {{"all_green", all_green}, {"mixed", mixed}, {"all_gray", all_gray}}},
                {"exams", rows}};
    if (format == "csv") {
        std::ostringstream out;
        out << "exam_id,left,right,category\n";
        for (const auto& r : rows)
            out << r["exam_id"].get<std::string>() << "," << r["left"].get<std::string>() << ","
                << r["right"].get<std::string>() << "," << r["category"].get<std::string>()
                << "\n";
        emit(output, out.str());
        return 0;
    }
    emit(output, render(result, format));
    return 0;
}

int run_recall_savings(const std::string& scores_path, const std::string& labels_path,
                       const std::string& recalls_path, double grid_step,
                       const std::string& format, const std::string& output) {
    auto records = io::read_breast_scores_csv(scores_path);
    auto labels = io::read_breast_labels_csv(labels_path);
    auto recalls = io::read_recalls_csv(recalls_path);

    ExamScores exams = exam_scores_from(records);
    std::map<std::string, int> cancer_of;
    for (const auto& l : labels) cancer_of[l.exam_id] |= l.malignant;
    std::map<std::string, int> recall_of;
    for (const auto& r : recalls) recall_of[r.exam_id] = r.recalled;

    RecallSavingsInput in;
    for (const auto& [exam_id, pair] : exams.by_exam) {
        if (!pair.first || !pair.second)
            throw std::runtime_error("exam " + exam_id + " is missing a breast score");
        in.exam_ids.push_back(exam_id);
        in.exam_scores.push_back(std::max(*pair.first, *pair.second));
        in.cancer_labels.push_back(cancer_of.count(exam_id) ? cancer_of[exam_id] : 0);
        in.radiologist_recalls.push_back(recall_of.count(exam_id) ? recall_of[exam_id] : 0);
    }
    std::vector<Scalar> grid;
    for (double p = 0; p <= 100.0 + 1e-9; p += grid_step) grid.push_back(std::min(p, 100.0));
    auto rows = recall_savings_curve(in, grid);

    if (format == "csv") {
        // Plot-ready columns: sensitivity/FNR, specificity/FPR, recalls saved.
        std::ostringstream out;
        out << "percentile,threshold,sensitivity,fnr,specificity,fpr,"
               "fraction_recalls_saved,fraction_workload_saved\n";
        for (const auto& r : rows)
            out << r.percentile << "," << r.threshold << "," << r.sensitivity << "," << r.fnr
                << "," << r.specificity << "," << r.fpr << "," << r.fraction_recalls_saved
                << "," << r.fraction_workload_saved << "\n";
        emit(output, out.str());
        return 0;
    }
    json jrows = json::array();
    for (const auto& r : rows)
        jrows.push_back({{"percentile", r.percentile},
                         {"threshold", r.threshold},
                         {"sensitivity", r.sensitivity},
                         {"fnr", r.fnr},
                         {"specificity", r.specificity},
                         {"fpr", r.fpr},
                         {"fraction_recalls_saved", r.fraction_recalls_saved},
                         {"fraction_workload_saved", r.fraction_workload_saved}});
    emit(output, render(json{{"rows", jrows}}, format));
    return 0;
}

int run_cohort_filter(const std::string& timeline_path, const std::string& format,
                      const std::string& output) {
    auto timelines = io::read_timeline_csv(timeline_path);
    std::map<std::string, long> histogram;
    json rows = json::array();
    for (const auto& [pid, tl] : timelines) {
        for (const auto& out : filter_test_set(tl)) {
            histogram[to_string(out.rule)] += 1;
            rows.push_back({{"patient_id", pid},
                            {"exam_id", out.exam_id},
                            {"included", out.included},
                            {"rule", to_string(out.rule)},
                            {"assignment", to_string(out.assignment)}});
        }
    }
    if (format == "csv") {
        std::ostringstream out;
        out << "patient_id,exam_id,included,rule,assignment\n";
        for (const auto& r : rows)
            out << r["patient_id"].get<std::string>() << "," << r["exam_id"].get<std::string>()
                << "," << (r["included"].get<bool>() ? 1 : 0) << ","
                << r["rule"].get<std::string>() << "," << r["assignment"].get<std::string>()
                << "\n";
        emit(output, out.str());
        return 0;
    }
    emit(output, render(json{{"rule_histogram", histogram}, {"exams", rows}}, format));
    return 0;
}

int run_match_triplets(const std::string& masks_path, double iou_thr,
                       const std::string& output) {
    auto masks = io::read_masks(masks_path);
    std::vector<TripletImage> images;
    for (const auto& rec : masks)
        images.push_back({rec.key, rec.geom, rec.mask, rec.acquisition_id});
    auto report = match_triplets(images, iou_thr);
    json triplets = json::array();
    for (const auto& t : report.triplets)
        triplets.push_back({{"ffdm", t.ffdm.image_id},
                            {"cview", t.cview.image_id},
                            {"dbt", t.dbt.image_id},
                            {"iou", t.iou}});
    emit(output, json{{"triplets", triplets}, {"warnings", report.warnings}}.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-modal mammography screening evaluation toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string config_path;
    app.add_option("--seed", seed, "seed for all randomized commands (default 0)");
    app.add_option("--config", config_path, "JSON run configuration");

    std::string format = "text";
    auto add_format = [&](CLI::App* cmd) {
        cmd->add_option("--format", format, "output format: text, json, csv")
            ->check(CLI::IsMember({"text", "json", "csv"}));
    };

    // aggregate
    auto* agg = app.add_subcommand("aggregate", "NMS / MSS / multi-modal box ensembling");
    std::string agg_in, agg_out = "-", agg_mode = "nms", agg_target = "malignant";
    double agg_iou = 0.3;
    agg->add_option("--input", agg_in, "predictions NDJSON")->required();
    agg->add_option("--output", agg_out, "output NDJSON");
    agg->add_option("--mode", agg_mode, "nms, mss, or multimodal");
    agg->add_option("--iou", agg_iou, "IoU threshold (0.05 for multimodal)");
    agg->add_option("--target", agg_target, "score used for ordering");

    // predict-head
    auto* ph = app.add_subcommand("predict-head", "gated-attention image head on feature files");
    std::string ph_in, ph_out = "-";
    ph->add_option("--input", ph_in, "head input JSON (params + images)")->required();
    ph->add_option("--output", ph_out, "output NDJSON");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "classification or detection metrics");
    std::string ev_scores, ev_preds, ev_gt, ev_level = "breast", ev_modality = "all",
        ev_out = "-";
    long ev_bootstrap = 0;
    ev->add_option("--scores", ev_scores, "scored-cases CSV for AUROC/AUPRC");
    ev->add_option("--predictions", ev_preds, "predictions NDJSON for FROC");
    ev->add_option("--gt", ev_gt, "ground-truth boxes NDJSON");
    ev->add_option("--level", ev_level, "lesion or breast")
        ->check(CLI::IsMember({"lesion", "breast"}));
    ev->add_option("--modality", ev_modality, "restrict detection records to one modality")
        ->check(CLI::IsMember({"all", "FFDM", "CVIEW", "DBT"}));
    ev->add_option("--bootstrap", ev_bootstrap, "bootstrap resamples for CIs (0 = off)");
    ev->add_option("--output", ev_out, "output path or - for stdout");
    add_format(ev);

    // stats
    auto* st = app.add_subcommand("stats", "statistical toolkit");
    st->require_subcommand(1);
    std::string st_out = "-";

    auto* permtest = st->add_subcommand("permtest", "paired permutation test");
    std::string pt_paired, pt_metric = "auroc";
    long pt_iter = 10000;
    permtest->add_option("--paired", pt_paired, "CSV: unit_id,score_a,score_b,label");
    permtest->add_option("--metric", pt_metric, "auroc or auprc")
        ->check(CLI::IsMember({"auroc", "auprc"}));
    permtest->add_option("--iterations", pt_iter, "permutation iterations");
    permtest->add_option("--output", st_out, "output path");
    // FROC flavor: two prediction files on the same images, AUFROC_1 metric.
    std::string pt_pred_a, pt_pred_b, pt_gt, pt_level = "lesion";
    permtest->add_option("--predictions-a", pt_pred_a, "model A predictions NDJSON");
    permtest->add_option("--predictions-b", pt_pred_b, "model B predictions NDJSON");
    permtest->add_option("--gt", pt_gt, "ground-truth boxes NDJSON");
    permtest->add_option("--level", pt_level, "lesion or breast")
        ->check(CLI::IsMember({"lesion", "breast"}));

    auto* boot = st->add_subcommand("bootstrap", "percentile bootstrap CI");
    std::string bt_scores, bt_metric = "auroc";
    long bt_n = 1000;
    boot->add_option("--scores", bt_scores, "scored-cases CSV")->required();
    boot->add_option("--metric", bt_metric, "auroc or auprc")
        ->check(CLI::IsMember({"auroc", "auprc"}));
    boot->add_option("--resamples", bt_n, "number of resamples");
    boot->add_option("--output", st_out, "output path");

    auto* ztest = st->add_subcommand("ztest", "two-proportion z-test");
    long z_r1 = 0, z_n1 = 0, z_r2 = 0, z_n2 = 0;
    ztest->add_option("--r1", z_r1)->required();
    ztest->add_option("--n1", z_n1)->required();
    ztest->add_option("--r2", z_r2)->required();
    ztest->add_option("--n2", z_n2)->required();
    ztest->add_option("--output", st_out, "output path");

    auto* ch = st->add_subcommand("cohens-h", "effect size for two proportions");
    double ch_p1 = 0, ch_p2 = 0;
    ch->add_option("--p1", ch_p1)->required();
    ch->add_option("--p2", ch_p2)->required();
    ch->add_option("--output", st_out, "output path");

    auto* ss = st->add_subcommand("samplesize", "per-group n for a two-proportion z-test");
    double ss_p1 = 0, ss_p2 = 0, ss_alpha = 0.05, ss_power = 0.80;
    ss->add_option("--p1", ss_p1)->required();
    ss->add_option("--p2", ss_p2)->required();
    ss->add_option("--alpha", ss_alpha);
    ss->add_option("--power", ss_power);
    ss->add_option("--output", st_out, "output path");

    auto* er = st->add_subcommand("err-reduction", "proportional reduction of error");
    double er_base = 0, er_improved = 0;
    er->add_option("--baseline", er_base)->required();
    er->add_option("--improved", er_improved)->required();
    er->add_option("--output", st_out, "output path");

    // select-ensemble
    auto* se = app.add_subcommand("select-ensemble", "greedy ensemble selection");
    std::string se_scores, se_labels, se_out = "-";
    int se_size = kDefaultEnsembleSize;
    bool se_no_alt = false;
    se->add_option("--scores", se_scores, "per-model breast scores CSV")->required();
    se->add_option("--labels", se_labels, "breast labels CSV")->required();
    se->add_option("--size", se_size, "ensemble size");
    se->add_flag("--no-alternation", se_no_alt, "drop the modality alternation constraint");
    se->add_option("--output", se_out, "output path");

    // triage
    auto* tr = app.add_subcommand("triage", "green/gray triage at an operating point");
    std::string tr_scores, tr_labels, tr_out = "-";
    double tr_margin = 1.0;
    std::optional<double> tr_threshold;
    double tr_threshold_value = 0;
    auto* thr_opt = tr->add_option("--threshold", tr_threshold_value, "explicit threshold");
    tr->add_option("--scores", tr_scores, "final breast scores CSV")->required();
    tr->add_option("--labels", tr_labels, "breast labels CSV (for operating point)");
    tr->add_option("--margin-percentiles", tr_margin, "safety margin in percentiles");
    tr->add_option("--output", tr_out, "output path");
    add_format(tr);

    // recall-savings
    auto* rs = app.add_subcommand("recall-savings", "threshold sweep over exam scores");
    std::string rs_scores, rs_labels, rs_recalls, rs_out = "-";
    double rs_step = 1.0;
    rs->add_option("--scores", rs_scores, "final breast scores CSV")->required();
    rs->add_option("--labels", rs_labels, "breast labels CSV")->required();
    rs->add_option("--recalls", rs_recalls, "radiologist recalls CSV")->required();
    rs->add_option("--grid-step", rs_step, "percentile grid step");
    rs->add_option("--output", rs_out, "output path");
    add_format(rs);

    // cohort-filter
    auto* cf = app.add_subcommand("cohort-filter", "test-set filtering over a timeline");
    std::string cf_timeline, cf_out = "-";
    cf->add_option("--timeline", cf_timeline, "timeline CSV")->required();
    cf->add_option("--output", cf_out, "output path");
    add_format(cf);

    // match-triplets
    auto* mt = app.add_subcommand("match-triplets", "FFDM / C-View / DBT matching");
    std::string mt_masks, mt_out = "-";
    double mt_iou = kTripletIouThreshold;
    mt->add_option("--masks", mt_masks, "foreground masks NDJSON")->required();
    mt->add_option("--iou", mt_iou, "acceptance threshold");
    mt->add_option("--output", mt_out, "output path");

    // synth
    auto* sy = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string sy_out_dir;
    SynthConfig sy_cfg;
    sy->add_option("--out", sy_out_dir, "output directory")->required();
    sy->add_option("--exams", sy_cfg.n_exams, "number of exams");
    sy->add_option("--prevalence", sy_cfg.prevalence, "positive breast probability");
    sy->add_option("--slices", sy_cfg.n_slices, "DBT slice count");
    sy->add_option("--mask-exams", sy_cfg.n_mask_exams, "exams that emit masks");

    // hparam-sample
    auto* hp = app.add_subcommand("hparam-sample", "draw a random-search configuration");
    std::string hp_version = "V1", hp_modality = "FFDM", hp_out = "-";
    long hp_draws = 1;
    hp->add_option("--version", hp_version, "V1 or V2")->check(CLI::IsMember({"V1", "V2"}));
    hp->add_option("--modality", hp_modality, "FFDM, CVIEW, or DBT");
    hp->add_option("--draws", hp_draws, "number of configurations");
    hp->add_option("--output", hp_out, "output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) {
            // Explicit flags win over the config file.
            auto cfg = io::read_config(config_path);
            if (!app.count("--seed")) seed = cfg.seed;
            if (!agg->count("--iou"))
                agg_iou = agg_mode == "multimodal" ? cfg.multimodal_iou : cfg.iou_threshold;
            if (!mt->count("--iou")) mt_iou = cfg.triplet_iou;
            if (!tr->count("--margin-percentiles")) tr_margin = cfg.margin_percentiles;
            if (!ev->count("--level")) ev_level = cfg.level;
            bool format_given = ev->count("--format") || tr->count("--format") ||
                                rs->count("--format") || cf->count("--format");
            if (!format_given) format = cfg.format;
        }

        if (*agg) return run_aggregate(agg_in, agg_out, agg_mode, agg_iou, agg_target);
        if (*ph) return run_predict_head(ph_in, ph_out);
        if (*ev) {
            if (!ev_scores.empty())
                return run_evaluate_classification(ev_scores, ev_bootstrap, seed, format, ev_out);
            if (!ev_preds.empty() && !ev_gt.empty())
                return run_evaluate_detection(ev_preds, ev_gt, ev_level, ev_modality, format, ev_out);
            std::cerr << "evaluate needs --scores or (--predictions and --gt)\n";
            return 2;
        }
        if (*st) {
            json result;
            if (*permtest && !pt_pred_a.empty()) {
                if (pt_pred_b.empty() || pt_gt.empty())
                    throw std::runtime_error(
                        "FROC permtest needs --predictions-a, --predictions-b, and --gt");
                auto recs_a = io::read_predictions(pt_pred_a);
                auto recs_b = io::read_predictions(pt_pred_b);
                auto gts = io::read_gt_boxes(pt_gt);
                const bool breast_level = pt_level == "breast";

                FrocPermutationInput in;
                in.level = breast_level ? FrocLevel::Breast : FrocLevel::Lesion;
                in.eval.gts = gts;
                std::map<std::string, FrocUnit> units;
                auto unit_of = [&](const io::PredictionRecord& rec) {
                    return breast_level
                               ? rec.key.exam_id + "_" + to_string(rec.key.laterality)
                               : rec.key.image_id;
                };
                for (const auto& rec : recs_a) {
                    in.eval.predictions[rec.key.image_id];
                    in.eval.breast_of_image[rec.key.image_id] =
                        rec.key.exam_id + "_" + to_string(rec.key.laterality);
                    if (rec.geom && rec.geom->n_slices)
                        in.eval.n_slices[rec.key.image_id] = rec.geom->n_slices;
                    FrocUnit& unit = units[unit_of(rec)];
                    unit.unit_id = unit_of(rec);
                    auto& dst = unit.model_a_boxes[rec.key.image_id];
                    dst.insert(dst.end(), rec.boxes.begin(), rec.boxes.end());
                }
                for (const auto& rec : recs_b) {
                    if (!in.eval.predictions.count(rec.key.image_id))
                        throw std::runtime_error("model B covers unknown image " +
                                                 rec.key.image_id);
                    FrocUnit& unit = units[unit_of(rec)];
                    unit.unit_id = unit_of(rec);
                    auto& dst = unit.model_b_boxes[rec.key.image_id];
                    dst.insert(dst.end(), rec.boxes.begin(), rec.boxes.end());
                }
                for (auto& [id, unit] : units) in.units.push_back(std::move(unit));
                auto res = permutation_test_froc(in, pt_iter, seed);
                result = {{"metric", "aufroc1"},
                          {"level", pt_level},
                          {"observed_difference", res.statistic},
                          {"p_value", res.p_value},
                          {"iterations", pt_iter}};
            } else if (*permtest) {
                if (pt_paired.empty())
                    throw std::runtime_error(
                        "permtest needs --paired or the --predictions-a family");
                std::ifstream in(pt_paired);
                if (!in) throw std::runtime_error("cannot open " + pt_paired);
                PairedPredictions data;
                std::string line;
                long ln = 0;
                while (std::getline(in, line)) {
                    ++ln;
                    if (line.empty() || (ln == 1 && line.rfind("unit_id", 0) == 0)) continue;
                    std::istringstream ss_line(line);
                    std::string id, a, b, y;
                    std::getline(ss_line, id, ',');
                    std::getline(ss_line, a, ',');
                    std::getline(ss_line, b, ',');
                    std::getline(ss_line, y, ',');
                    data.unit_ids.push_back(id);
                    data.model_a_scores.push_back(std::stod(a));
                    data.model_b_scores.push_back(std::stod(b));
                    data.labels.push_back(std::stoi(y));
                }
                auto res = permutation_test(
                    data, pt_metric == "auroc" ? PairedMetric::Auroc : PairedMetric::Auprc,
                    pt_iter, seed);
                result = {{"observed_difference", res.statistic}, {"p_value", res.p_value},
                          {"iterations", pt_iter}};
            } else if (*boot) {
                auto cases = io::read_scores_csv(bt_scores);
                auto ci = bootstrap_ci(cases, bt_metric == "auroc" ? CaseMetric(auroc)
                                                                   : CaseMetric(auprc),
                                       bt_n, seed);
                const double point = bt_metric == "auroc" ? auroc(cases) : auprc(cases);
                result = {{"metric", bt_metric}, {"point", point},       {"ci_lo", ci.lo},
                          {"ci_hi", ci.hi},      {"resamples", bt_n},    {"redraws", ci.n_redraws}};
            } else if (*ztest) {
                auto res = two_prop_ztest(z_r1, z_n1, z_r2, z_n2);
                result = {{"z", res.statistic}, {"p_value", res.p_value},
                          {"cohens_h", *res.effect}};
            } else if (*ch) {
                result = {{"cohens_h", cohens_h(ch_p1, ch_p2)}};
            } else if (*ss) {
                result = {{"n_per_group", sample_size(ss_p1, ss_p2, ss_alpha, ss_power)}};
            } else if (*er) {
                result = {{"reduction_of_error", reduction_of_error(er_base, er_improved)}};
            }
            emit(st_out, result.dump(2) + "\n");
            return 0;
        }
        if (*se) return run_select_ensemble(se_scores, se_labels, se_size, !se_no_alt, se_out);
        if (*tr) {
            if (thr_opt->count()) tr_threshold = tr_threshold_value;
            return run_triage(tr_scores, tr_labels, tr_threshold, tr_margin, format, tr_out);
        }
        if (*rs)
            return run_recall_savings(rs_scores, rs_labels, rs_recalls, rs_step, format, rs_out);
        if (*cf) return run_cohort_filter(cf_timeline, format, cf_out);
        if (*mt) return run_match_triplets(mt_masks, mt_iou, mt_out);
        if (*sy) {
            sy_cfg.seed = seed;
            auto manifest = synth_generate(sy_cfg, sy_out_dir);
            std::cout << json{{"predictions", manifest.predictions.string()},
                              {"labels", manifest.labels.string()},
                              {"gt_boxes", manifest.gt_boxes.string()},
                              {"timeline", manifest.timeline.string()},
                              {"masks", manifest.masks.string()}}
                             .dump(2)
                      << "\n";
            return 0;
        }
        if (*hp) {
            std::ostringstream out;
            for (long d = 0; d < hp_draws; ++d) {
                auto cfg = hparam_sample(hp_version == "V1" ? DatasetVersion::V1
                                                            : DatasetVersion::V2,
                                         modality_from_string(hp_modality), seed,
                                         static_cast<std::uint64_t>(d));
                out << json{{"learning_rate", cfg.learning_rate},
                            {"weight_decay", cfg.weight_decay},
                            {"momentum", cfg.momentum},
                            {"k", cfg.top_k},
                            {"architecture", cfg.architecture},
                            {"image_height", cfg.image_height}}
                           .dump()
                    << "\n";
            }
            emit(hp_out, out.str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
