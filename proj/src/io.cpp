#include "mms/io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace mms::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::filesystem::path& path, long line, const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::ostringstream make_writer() {
    std::ostringstream out;
    out.precision(std::numeric_limits<Scalar>::max_digits10);
    return out;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

Scalar require_probability(const json& j, const char* field, const std::filesystem::path& path,
                           long line) {
    if (!j.contains(field) || !j[field].is_number())
        fail(path, line, std::string("missing numeric field '") + field + "'");
    const Scalar v = j[field].get<Scalar>();
    if (v < 0 || v > 1) fail(path, line, std::string("field '") + field + "' outside [0,1]");
    return v;
}

Scalar require_number(const json& j, const char* field, const std::filesystem::path& path,
                      long line) {
    if (!j.contains(field) || !j[field].is_number())
        fail(path, line, std::string("missing numeric field '") + field + "'");
    return j[field].get<Scalar>();
}

std::string require_string(const json& j, const char* field, const std::filesystem::path& path,
                           long line) {
    if (!j.contains(field) || !j[field].is_string())
        fail(path, line, std::string("missing string field '") + field + "'");
    return j[field].get<std::string>();
}

double parse_double(const std::string& text, const std::filesystem::path& path, long line,
                    const char* field) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        fail(path, line, std::string("field '") + field + "' is not a number: " + text);
    }
}

long parse_long(const std::string& text, const std::filesystem::path& path, long line,
                const char* field) {
    try {
        std::size_t used = 0;
        const long v = std::stol(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        fail(path, line, std::string("field '") + field + "' is not an integer: " + text);
    }
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

json box_to_json(const DetBox& b) {
    json j{{"cx", b.geom.cx}, {"cy", b.geom.cy}, {"w", b.geom.w}, {"h", b.geom.h},
           {"s_m", b.score_malignant}, {"s_b", b.score_benign}};
    if (b.slice) j["slice"] = *b.slice;
    if (b.source_anchor) j["anchor"] = {b.source_anchor->row, b.source_anchor->col};
    return j;
}

DetBox box_from_json(const json& j, Modality origin, const std::filesystem::path& path,
                     long line) {
    DetBox b;
    b.geom.cx = require_number(j, "cx", path, line);
    b.geom.cy = require_number(j, "cy", path, line);
    b.geom.w = require_number(j, "w", path, line);
    b.geom.h = require_number(j, "h", path, line);
    if (b.geom.w <= 0 || b.geom.h <= 0) fail(path, line, "box width/height must be > 0");
    b.score_malignant = require_probability(j, "s_m", path, line);
    b.score_benign = require_probability(j, "s_b", path, line);
    b.origin = origin;
    if (j.contains("slice")) b.slice = j["slice"].get<int>();
    if (j.contains("anchor")) {
        if (!j["anchor"].is_array() || j["anchor"].size() != 2)
            fail(path, line, "anchor must be [row, col]");
        b.source_anchor = GridIndex{j["anchor"][0].get<int>(), j["anchor"][1].get<int>()};
    }
    return b;
}

}  // namespace

std::vector<PredictionRecord> read_predictions(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<PredictionRecord> records;
    std::set<std::pair<std::string, std::string>> seen;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) fail(path, line, "malformed JSON");

        PredictionRecord rec;
        rec.key.patient_id = require_string(j, "patient_id", path, line);
        rec.key.exam_id = require_string(j, "exam_id", path, line);
        rec.key.laterality = laterality_from_string(require_string(j, "laterality", path, line));
        rec.key.view = view_from_string(require_string(j, "view", path, line));
        rec.key.modality = modality_from_string(require_string(j, "modality", path, line));
        rec.key.image_id = require_string(j, "image_id", path, line);
        rec.model_id = require_string(j, "model_id", path, line);
        if (!seen.insert({rec.key.image_id, rec.model_id}).second)
            fail(path, line, "duplicate (image_id, model_id): " + rec.key.image_id + ", " +
                                 rec.model_id);

        if (!j.contains("image_scores")) fail(path, line, "missing image_scores");
        rec.image_scores.y_malignant =
            require_probability(j["image_scores"], "malignant", path, line);
        rec.image_scores.y_benign = require_probability(j["image_scores"], "benign", path, line);

        if (j.contains("boxes")) {
            if (!j["boxes"].is_array()) fail(path, line, "boxes must be an array");
            for (const auto& bj : j["boxes"])
                rec.boxes.push_back(box_from_json(bj, rec.key.modality, path, line));
        }
        if (j.contains("geom")) {
            ImageGeom g;
            g.rows = static_cast<long>(require_number(j["geom"], "rows", path, line));
            g.cols = static_cast<long>(require_number(j["geom"], "cols", path, line));
            if (j["geom"].contains("n_slices")) g.n_slices = j["geom"]["n_slices"].get<int>();
            rec.geom = g;
        }
        if (j.contains("acquisition_id")) rec.acquisition_id = j["acquisition_id"];
        records.push_back(std::move(rec));
    }
    return records;
}

void write_predictions(const std::filesystem::path& path,
                       const std::vector<PredictionRecord>& records) {
    std::ostringstream out = make_writer();
    for (const auto& rec : records) {
        json j{{"patient_id", rec.key.patient_id},
               {"exam_id", rec.key.exam_id},
               {"laterality", to_string(rec.key.laterality)},
               {"view", to_string(rec.key.view)},
               {"modality", to_string(rec.key.modality)},
               {"image_id", rec.key.image_id},
               {"model_id", rec.model_id},
               {"image_scores",
                {{"malignant", rec.image_scores.y_malignant},
                 {"benign", rec.image_scores.y_benign}}}};
        json boxes = json::array();
        for (const auto& b : rec.boxes) boxes.push_back(box_to_json(b));
        j["boxes"] = boxes;
        if (rec.geom) {
            j["geom"] = {{"rows", rec.geom->rows}, {"cols", rec.geom->cols}};
            if (rec.geom->n_slices) j["geom"]["n_slices"] = *rec.geom->n_slices;
        }
        if (!rec.acquisition_id.empty()) j["acquisition_id"] = rec.acquisition_id;
        out << j.dump() << "\n";
    }
    atomic_write(path, out.str());
}

std::vector<ScoredCase> read_scores_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<ScoredCase> cases;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (line == 1 && text.rfind("unit_id", 0) == 0) continue;  // header
        auto f = split_csv_line(text);
        if (f.size() != 3) fail(path, line, "expected unit_id,score,label");
        const long label = parse_long(f[2], path, line, "label");
        if (label != 0 && label != 1) fail(path, line, "label must be 0 or 1");
        cases.push_back({f[0], parse_double(f[1], path, line, "score"), static_cast<int>(label)});
    }
    return cases;
}

void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoredCase>& cases) {
    std::ostringstream out = make_writer();
    out << "unit_id,score,label\n";
    for (const auto& c : cases)
        out << c.unit_id << "," << c.score << "," << c.label << "\n";
    atomic_write(path, out.str());
}

std::vector<BreastLabelRecord> read_breast_labels_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<BreastLabelRecord> records;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (line == 1 && text.rfind("patient_id", 0) == 0) continue;
        auto f = split_csv_line(text);
        if (f.size() != 5)
            fail(path, line, "expected patient_id,exam_id,laterality,malignant,benign");
        BreastLabelRecord rec;
        rec.patient_id = f[0];
        rec.exam_id = f[1];
        rec.laterality = laterality_from_string(f[2]);
        rec.malignant = static_cast<int>(parse_long(f[3], path, line, "malignant"));
        rec.benign = static_cast<int>(parse_long(f[4], path, line, "benign"));
        if ((rec.malignant & ~1) || (rec.benign & ~1)) fail(path, line, "labels must be 0 or 1");
        records.push_back(rec);
    }
    return records;
}

void write_breast_labels_csv(const std::filesystem::path& path,
                             const std::vector<BreastLabelRecord>& records) {
    std::ostringstream out = make_writer();
    out << "patient_id,exam_id,laterality,malignant,benign\n";
    for (const auto& r : records)
        out << r.patient_id << "," << r.exam_id << "," << to_string(r.laterality) << ","
            << r.malignant << "," << r.benign << "\n";
    atomic_write(path, out.str());
}

std::vector<GroundTruthBox> read_gt_boxes(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<GroundTruthBox> boxes;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) fail(path, line, "malformed JSON");
        GroundTruthBox gt;
        gt.image_id = require_string(j, "image_id", path, line);
        gt.lesion_id = require_string(j, "lesion_id", path, line);
        gt.geom.cx = require_number(j, "cx", path, line);
        gt.geom.cy = require_number(j, "cy", path, line);
        gt.geom.w = require_number(j, "w", path, line);
        gt.geom.h = require_number(j, "h", path, line);
        if (gt.geom.w <= 0 || gt.geom.h <= 0) fail(path, line, "box must have positive area");
        if (j.contains("slice")) gt.slice = j["slice"].get<int>();
        boxes.push_back(gt);
    }
    return boxes;
}

void write_gt_boxes(const std::filesystem::path& path, const std::vector<GroundTruthBox>& boxes) {
    std::ostringstream out = make_writer();
    for (const auto& gt : boxes) {
        json j{{"image_id", gt.image_id}, {"lesion_id", gt.lesion_id}, {"cx", gt.geom.cx},
               {"cy", gt.geom.cy},        {"w", gt.geom.w},            {"h", gt.geom.h}};
        if (gt.slice) j["slice"] = *gt.slice;
        out << j.dump() << "\n";
    }
    atomic_write(path, out.str());
}

std::map<std::string, PatientTimeline> read_timeline_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::map<std::string, PatientTimeline> timelines;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (line == 1 && text.rfind("record_type", 0) == 0) continue;
        auto f = split_csv_line(text);
        if (f.size() != 11)
            fail(path, line,
                 "expected record_type,patient_id,exam_id,date,kind,birads,occult_left,"
                 "occult_right,laterality,malignant,benign");
        auto& tl = timelines[f[1]];
        tl.patient_id = f[1];
        if (f[0] == "exam") {
            ExamRecord rec;
            rec.patient_id = f[1];
            rec.exam_id = f[2];
            rec.date = date_from_string(f[3]);
            if (f[4] == "screening") rec.kind = ExamKind::ScreeningMammo;
            else if (f[4] == "diagnostic") rec.kind = ExamKind::DiagnosticMammo;
            else if (f[4] == "other") rec.kind = ExamKind::OtherBreastImaging;
            else fail(path, line, "unknown exam kind: " + f[4]);
            if (!f[5].empty()) {
                const long birads = parse_long(f[5], path, line, "birads");
                if (birads < 0 || birads > 6) fail(path, line, "BI-RADS must be 0..6");
                rec.birads = static_cast<int>(birads);
            }
            rec.occult_left = f[6] == "1";
            rec.occult_right = f[7] == "1";
            tl.exams.push_back(rec);
        } else if (f[0] == "pathology") {
            PathologyRecord rec;
            rec.patient_id = f[1];
            rec.date = date_from_string(f[3]);
            rec.laterality = laterality_from_string(f[8]);
            rec.malignant = f[9] == "1";
            rec.benign = f[10] == "1";
            if (!rec.malignant && !rec.benign)
                fail(path, line, "pathology record needs at least one finding flag");
            tl.pathology.push_back(rec);
        } else {
            fail(path, line, "unknown record_type: " + f[0]);
        }
    }
    for (auto& [id, tl] : timelines) {
        std::stable_sort(tl.exams.begin(), tl.exams.end(),
                         [](const ExamRecord& a, const ExamRecord& b) { return a.date < b.date; });
        std::stable_sort(tl.pathology.begin(), tl.pathology.end(),
                         [](const PathologyRecord& a, const PathologyRecord& b) {
                             return a.date < b.date;
                         });
    }
    return timelines;
}

void write_timeline_csv(const std::filesystem::path& path,
                        const std::map<std::string, PatientTimeline>& timelines) {
    std::ostringstream out = make_writer();
    out << "record_type,patient_id,exam_id,date,kind,birads,occult_left,occult_right,"
           "laterality,malignant,benign\n";
    for (const auto& [id, tl] : timelines) {
        for (const auto& e : tl.exams) {
            const char* kind = e.kind == ExamKind::ScreeningMammo    ? "screening"
                               : e.kind == ExamKind::DiagnosticMammo ? "diagnostic"
                                                                     : "other";
            out << "exam," << e.patient_id << "," << e.exam_id << "," << to_string(e.date)
                << "," << kind << "," << (e.birads ? std::to_string(*e.birads) : "") << ","
                << (e.occult_left ? 1 : 0) << "," << (e.occult_right ? 1 : 0) << ",,,\n";
        }
        for (const auto& p : tl.pathology) {
            out << "pathology," << p.patient_id << ",," << to_string(p.date) << ",,,,,"
                << to_string(p.laterality) << "," << (p.malignant ? 1 : 0) << ","
                << (p.benign ? 1 : 0) << "\n";
        }
    }
    atomic_write(path, out.str());
}

std::vector<MaskRecord> read_masks(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<MaskRecord> records;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        json j = json::parse(text, nullptr, false);
        if (j.is_discarded()) fail(path, line, "malformed JSON");
        MaskRecord rec;
        rec.key.patient_id = require_string(j, "patient_id", path, line);
        rec.key.exam_id = require_string(j, "exam_id", path, line);
        rec.key.laterality = laterality_from_string(require_string(j, "laterality", path, line));
        rec.key.view = view_from_string(require_string(j, "view", path, line));
        rec.key.modality = modality_from_string(require_string(j, "modality", path, line));
        rec.key.image_id = require_string(j, "image_id", path, line);
        if (j.contains("acquisition_id")) rec.acquisition_id = j["acquisition_id"];
        rec.geom.rows = static_cast<long>(require_number(j, "rows", path, line));
        rec.geom.cols = static_cast<long>(require_number(j, "cols", path, line));
        if (j.contains("n_slices")) rec.geom.n_slices = j["n_slices"].get<int>();
        if (rec.geom.rows <= 0 || rec.geom.cols <= 0) fail(path, line, "bad mask dimensions");

        // Run-length encoding, row-major, alternating zero/one runs, zeros first.
        if (!j.contains("rle") || !j["rle"].is_array()) fail(path, line, "missing rle array");
        rec.mask = MaskGrid::Zero(rec.geom.rows, rec.geom.cols);
        long idx = 0;
        bool value = false;
        const long total = rec.geom.rows * rec.geom.cols;
        for (const auto& run : j["rle"]) {
            const long len = run.get<long>();
            if (len < 0 || idx + len > total) fail(path, line, "rle overruns mask");
            if (value)
                for (long k = idx; k < idx + len; ++k)
                    rec.mask(k / rec.geom.cols, k % rec.geom.cols) = 1;
            idx += len;
            value = !value;
        }
        if (idx != total) fail(path, line, "rle does not cover mask");
        records.push_back(std::move(rec));
    }
    return records;
}

void write_masks(const std::filesystem::path& path, const std::vector<MaskRecord>& records) {
    std::ostringstream out = make_writer();
    for (const auto& rec : records) {
        json rle = json::array();
        long run = 0;
        bool value = false;
        const long total = rec.geom.rows * rec.geom.cols;
        for (long k = 0; k < total; ++k) {
            const bool bit = rec.mask(k / rec.geom.cols, k % rec.geom.cols) != 0;
            if (bit == value) {
                ++run;
            } else {
                rle.push_back(run);
                value = bit;
                run = 1;
            }
        }
        rle.push_back(run);
        json j{{"patient_id", rec.key.patient_id},
               {"exam_id", rec.key.exam_id},
               {"laterality", to_string(rec.key.laterality)},
               {"view", to_string(rec.key.view)},
               {"modality", to_string(rec.key.modality)},
               {"image_id", rec.key.image_id},
               {"rows", rec.geom.rows},
               {"cols", rec.geom.cols},
               {"rle", rle}};
        if (!rec.acquisition_id.empty()) j["acquisition_id"] = rec.acquisition_id;
        if (rec.geom.n_slices) j["n_slices"] = *rec.geom.n_slices;
        out << j.dump() << "\n";
    }
    atomic_write(path, out.str());
}

std::vector<BreastScoreRecord> read_breast_scores_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<BreastScoreRecord> records;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (line == 1 && text.rfind("exam_id", 0) == 0) continue;
        auto f = split_csv_line(text);
        if (f.size() != 6)
            fail(path, line,
                 "expected exam_id,laterality,model_id,modality,score_malignant,score_benign");
        BreastScoreRecord rec;
        rec.exam_id = f[0];
        rec.laterality = laterality_from_string(f[1]);
        rec.model_id = f[2];
        rec.modality = modality_from_string(f[3]);
        rec.score_malignant = parse_double(f[4], path, line, "score_malignant");
        rec.score_benign = parse_double(f[5], path, line, "score_benign");
        if (rec.score_malignant < 0 || rec.score_malignant > 1 || rec.score_benign < 0 ||
            rec.score_benign > 1)
            fail(path, line, "scores must be in [0,1]");
        records.push_back(rec);
    }
    return records;
}

void write_breast_scores_csv(const std::filesystem::path& path,
                             const std::vector<BreastScoreRecord>& records) {
    std::ostringstream out = make_writer();
    out << "exam_id,laterality,model_id,modality,score_malignant,score_benign\n";
    for (const auto& r : records)
        out << r.exam_id << "," << to_string(r.laterality) << "," << r.model_id << ","
            << to_string(r.modality) << "," << r.score_malignant << "," << r.score_benign
            << "\n";
    atomic_write(path, out.str());
}

std::vector<RecallRecord> read_recalls_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    std::vector<RecallRecord> records;
    std::string text;
    long line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        if (line == 1 && text.rfind("exam_id", 0) == 0) continue;
        auto f = split_csv_line(text);
        if (f.size() != 2) fail(path, line, "expected exam_id,recalled");
        records.push_back({f[0], static_cast<int>(parse_long(f[1], path, line, "recalled"))});
    }
    return records;
}

void write_recalls_csv(const std::filesystem::path& path,
                       const std::vector<RecallRecord>& records) {
    std::ostringstream out = make_writer();
    out << "exam_id,recalled\n";
    for (const auto& r : records) out << r.exam_id << "," << r.recalled << "\n";
    atomic_write(path, out.str());
}

RunConfig read_config(const std::filesystem::path& path) {
    auto in = open_input(path);
    json j;
    in >> j;
    RunConfig cfg;
    const std::set<std::string> known = {"seed",          "iou_threshold", "multimodal_iou",
                                         "triplet_iou",   "margin_percentiles",
                                         "level",         "format",        "alternation_order"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key))
            throw std::runtime_error(path.string() + ": unknown config key '" + key + "'");
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("iou_threshold")) cfg.iou_threshold = j["iou_threshold"].get<Scalar>();
    if (j.contains("multimodal_iou")) cfg.multimodal_iou = j["multimodal_iou"].get<Scalar>();
    if (j.contains("triplet_iou")) cfg.triplet_iou = j["triplet_iou"].get<Scalar>();
    if (j.contains("margin_percentiles"))
        cfg.margin_percentiles = j["margin_percentiles"].get<Scalar>();
    if (j.contains("level")) {
        cfg.level = j["level"].get<std::string>();
        if (cfg.level != "lesion" && cfg.level != "breast")
            throw std::runtime_error(path.string() + ": level must be lesion or breast");
    }
    if (j.contains("format")) {
        cfg.format = j["format"].get<std::string>();
        if (cfg.format != "text" && cfg.format != "json" && cfg.format != "csv")
            throw std::runtime_error(path.string() + ": format must be text, json, or csv");
    }
    if (j.contains("alternation_order")) {
        cfg.alternation_order.clear();
        for (const auto& m : j["alternation_order"])
            cfg.alternation_order.push_back(modality_from_string(m.get<std::string>()));
    }
    return cfg;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace mms::io
