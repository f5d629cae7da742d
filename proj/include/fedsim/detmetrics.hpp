#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fedsim {

// Axis-aligned box in YOLO convention: normalized center and size.
struct Box {
    int class_id = 0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;

    bool degenerate() const { return w <= 0.0 || h <= 0.0; }
};

struct Detection {
    Box box;
    double confidence = 0.0;
};

// Intersection over union of the box geometries (class ignored).
// Returns 0 when the union has zero area.
double iou(const Box& a, const Box& b);

// Per-class greedy non-maximum suppression. Detections are ranked by
// confidence descending (ties keep input order); a kept box suppresses
// same-class boxes with IoU strictly greater than the threshold. Kept boxes
// come back in selection order.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

// One matched scene: per-prediction (confidence, is_tp) flags grouped by
// class, confidence-descending, plus the class's ground-truth count.
struct ClassMatches {
    std::vector<std::pair<double, bool>> flags;
    std::size_t num_gt = 0;
};

// Greedy one-to-one matching within class at the given IoU threshold.
// Predictions are taken in confidence-descending order (stable w.r.t. input);
// each matches the unmatched same-class ground truth with the highest
// IoU >= threshold, ties toward the lower ground-truth index.
std::map<int, ClassMatches> match_detections(const std::vector<Detection>& preds,
                                             const std::vector<Box>& gts,
                                             double iou_threshold);

// All-point interpolated AP over confidence-ordered TP/FP flags: precision
// envelope (running max from the right) integrated over recall steps.
// num_gt == 0 with predictions present yields 0.
double average_precision(const std::vector<bool>& flags, std::size_t num_gt);

double mean_average_precision(const std::map<int, double>& per_class_ap);

// Harmonic combination of precision and recall; 0 when both are 0.
double f1_score(double precision, double recall);

enum class LabelKind { ground_truth, prediction };

// YOLO label text, one object per line: `class cx cy w h` for ground truth,
// with a trailing confidence for predictions. Parse errors name the line.
std::vector<Box> parse_yolo_ground_truth(std::string_view text);
std::vector<Detection> parse_yolo_predictions(std::string_view text);

std::string format_yolo_ground_truth(const std::vector<Box>& boxes);
std::string format_yolo_predictions(const std::vector<Detection>& dets);

struct ClassCounts {
    std::size_t num_gt = 0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn() const { return num_gt - tp; }
};

struct EvalReport {
    std::map<int, double> per_class_ap;
    std::map<int, ClassCounts> counts;
    double map = 0.0;
    double precision = 0.0; // micro-averaged over classes
    double recall = 0.0;
    double f1 = 0.0;
    double macro_f1 = 0.0;
};

// One image's predictions and ground truths, already parsed.
struct Scene {
    std::vector<Detection> preds;
    std::vector<Box> gts;
};

// Pooled evaluation over scenes (scene order fixes confidence-tie order).
// Classes with neither ground truth nor predictions are excluded from mAP;
// zero ground truth with predictions contributes AP 0.
EvalReport evaluate_scenes(const std::vector<Scene>& scenes, double iou_threshold,
                           bool apply_nms = false, double nms_threshold = 0.5);

// Directory evaluation over matching file stems; a stem present on only one
// side is treated as an empty file on the other.
EvalReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                    double iou_threshold, bool apply_nms = false, double nms_threshold = 0.5);

std::string report_csv(const EvalReport& report);
std::string report_table(const EvalReport& report);

} // namespace fedsim
