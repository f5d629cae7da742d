#include "fedsim/detmetrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fedsim {

namespace {

struct Corners {
    double x1, y1, x2, y2;
};

Corners to_corners(const Box& b) {
    return {b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0};
}

} // namespace

double iou(const Box& a, const Box& b) {
    Corners ca = to_corners(a), cb = to_corners(b);
    double ix = std::max(0.0, std::min(ca.x2, cb.x2) - std::max(ca.x1, cb.x1));
    double iy = std::max(0.0, std::min(ca.y2, cb.y2) - std::max(ca.y1, cb.y1));
    double inter = ix * iy;
    // corner-form areas keep self-IoU exactly 1
    double uni = (ca.x2 - ca.x1) * (ca.y2 - ca.y1) + (cb.x2 - cb.x1) * (cb.y2 - cb.y1) - inter;
    if (uni <= 0.0) return 0.0;
    return inter / uni;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
    if (iou_threshold < 0.0 || iou_threshold > 1.0)
        throw std::invalid_argument("iou_threshold must be in [0, 1]");
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        return a.confidence > b.confidence;
    });
    std::vector<Detection> kept;
    std::vector<bool> suppressed(dets.size(), false);
    for (std::size_t i = 0; i < dets.size(); ++i) {
        if (suppressed[i]) continue;
        kept.push_back(dets[i]);
        for (std::size_t j = i + 1; j < dets.size(); ++j) {
            if (suppressed[j] || dets[j].box.class_id != dets[i].box.class_id) continue;
            if (iou(dets[i].box, dets[j].box) > iou_threshold) suppressed[j] = true;
        }
    }
    return kept;
}

std::map<int, ClassMatches> match_detections(const std::vector<Detection>& preds,
                                             const std::vector<Box>& gts,
                                             double iou_threshold) {
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return preds[a].confidence > preds[b].confidence;
    });

    std::map<int, ClassMatches> result;
    for (const auto& gt : gts) ++result[gt.class_id].num_gt;
    for (std::size_t i = 0; i < preds.size(); ++i)
        result[preds[i].box.class_id]; // ensure class entry even with zero GT

    std::vector<bool> gt_matched(gts.size(), false);
    for (std::size_t oi : order) {
        const Detection& pred = preds[oi];
        double best_iou = 0.0;
        std::size_t best_gt = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_matched[g] || gts[g].class_id != pred.box.class_id) continue;
            double v = iou(pred.box, gts[g]);
            // strictly better wins; equal IoU keeps the lower GT index
            if (v > best_iou) {
                best_iou = v;
                best_gt = g;
            }
        }
        bool tp = best_gt < gts.size() && best_iou >= iou_threshold && best_iou > 0.0;
        if (tp) gt_matched[best_gt] = true;
        result[pred.box.class_id].flags.emplace_back(pred.confidence, tp);
    }
    return result;
}

double average_precision(const std::vector<bool>& flags, std::size_t num_gt) {
    if (num_gt == 0) return 0.0;
    std::vector<double> precision(flags.size()), recall(flags.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i]) ++tp;
        precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
        recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
    }
    // precision envelope: running max from the right
    for (std::size_t i = flags.size(); i-- > 1;)
        precision[i - 1] = std::max(precision[i - 1], precision[i]);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        ap += (recall[i] - prev_recall) * precision[i];
        prev_recall = recall[i];
    }
    return ap;
}

double mean_average_precision(const std::map<int, double>& per_class_ap) {
    if (per_class_ap.empty()) throw std::invalid_argument("no classes to average");
    double sum = 0.0;
    for (const auto& [cls, ap] : per_class_ap) sum += ap;
    return sum / static_cast<double>(per_class_ap.size());
}

double f1_score(double precision, double recall) {
    if (precision < 0.0 || precision > 1.0 || recall < 0.0 || recall > 1.0)
        throw std::invalid_argument("precision and recall must be in [0, 1]");
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

double parse_field(const std::string& token, std::size_t line_no, const char* what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(token, &pos);
    } catch (const std::exception&) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": non-numeric " + what +
                                    " '" + token + "'");
    }
    if (pos != token.size())
        throw std::invalid_argument("line " + std::to_string(line_no) + ": non-numeric " + what +
                                    " '" + token + "'");
    return v;
}

void check_range(double v, double lo, double hi, std::size_t line_no, const char* what) {
    if (!(v >= lo && v <= hi))
        throw std::invalid_argument("line " + std::to_string(line_no) + ": " + what +
                                    " out of range [" + std::to_string(lo) + ", " +
                                    std::to_string(hi) + "]");
}

template <typename OnRow>
void parse_yolo_lines(std::string_view text, std::size_t fields, OnRow&& on_row) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        std::string tok;
        while (ls >> tok) tokens.push_back(tok);
        if (tokens.empty()) continue;
        if (tokens.size() != fields)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(fields) + " fields, got " +
                                        std::to_string(tokens.size()));
        Box box;
        double cls = parse_field(tokens[0], line_no, "class id");
        if (cls < 0.0 || cls != std::floor(cls))
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": class id must be a non-negative integer");
        box.class_id = static_cast<int>(cls);
        box.cx = parse_field(tokens[1], line_no, "cx");
        box.cy = parse_field(tokens[2], line_no, "cy");
        box.w = parse_field(tokens[3], line_no, "w");
        box.h = parse_field(tokens[4], line_no, "h");
        check_range(box.cx, 0.0, 1.0, line_no, "cx");
        check_range(box.cy, 0.0, 1.0, line_no, "cy");
        check_range(box.w, 0.0, 1.0, line_no, "w");
        check_range(box.h, 0.0, 1.0, line_no, "h");
        double conf = 0.0;
        if (fields == 6) {
            conf = parse_field(tokens[5], line_no, "confidence");
            check_range(conf, 0.0, 1.0, line_no, "confidence");
        }
        on_row(box, conf, line_no);
    }
}

} // namespace

std::vector<Box> parse_yolo_ground_truth(std::string_view text) {
    std::vector<Box> boxes;
    parse_yolo_lines(text, 5, [&](const Box& b, double, std::size_t) { boxes.push_back(b); });
    return boxes;
}

std::vector<Detection> parse_yolo_predictions(std::string_view text) {
    std::vector<Detection> dets;
    parse_yolo_lines(text, 6,
                     [&](const Box& b, double conf, std::size_t) { dets.push_back({b, conf}); });
    return dets;
}

namespace {

// Shortest representation that round-trips.
std::string format_number(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

} // namespace

std::string format_yolo_ground_truth(const std::vector<Box>& boxes) {
    std::string out;
    for (const auto& b : boxes) {
        out += std::to_string(b.class_id) + " " + format_number(b.cx) + " " + format_number(b.cy) +
               " " + format_number(b.w) + " " + format_number(b.h) + "\n";
    }
    return out;
}

std::string format_yolo_predictions(const std::vector<Detection>& dets) {
    std::string out;
    for (const auto& d : dets) {
        out += std::to_string(d.box.class_id) + " " + format_number(d.box.cx) + " " +
               format_number(d.box.cy) + " " + format_number(d.box.w) + " " +
               format_number(d.box.h) + " " + format_number(d.confidence) + "\n";
    }
    return out;
}

EvalReport evaluate_scenes(const std::vector<Scene>& scenes, double iou_threshold,
                           bool apply_nms, double nms_threshold) {
    // Pool per-class flags across scenes; stable sort keeps scene order and
    // within-scene order for equal confidences.
    std::map<int, ClassMatches> pooled;
    for (const auto& scene : scenes) {
        std::vector<Detection> preds = scene.preds;
        if (apply_nms) preds = nms(std::move(preds), nms_threshold);
        auto matches = match_detections(preds, scene.gts, iou_threshold);
        for (auto& [cls, m] : matches) {
            auto& dst = pooled[cls];
            dst.num_gt += m.num_gt;
            dst.flags.insert(dst.flags.end(), m.flags.begin(), m.flags.end());
        }
    }

    EvalReport report;
    std::size_t total_tp = 0, total_fp = 0, total_gt = 0;
    double macro_f1_sum = 0.0;
    for (auto& [cls, m] : pooled) {
        std::stable_sort(m.flags.begin(), m.flags.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        std::vector<bool> flags;
        flags.reserve(m.flags.size());
        ClassCounts counts;
        counts.num_gt = m.num_gt;
        for (const auto& [conf, tp] : m.flags) {
            flags.push_back(tp);
            if (tp)
                ++counts.tp;
            else
                ++counts.fp;
        }
        report.per_class_ap[cls] = average_precision(flags, m.num_gt);
        report.counts[cls] = counts;
        total_tp += counts.tp;
        total_fp += counts.fp;
        total_gt += counts.num_gt;
        double cp = counts.tp + counts.fp == 0
                        ? 0.0
                        : static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fp);
        double cr = counts.num_gt == 0
                        ? 0.0
                        : static_cast<double>(counts.tp) / static_cast<double>(counts.num_gt);
        macro_f1_sum += f1_score(cp, cr);
    }

    if (!report.per_class_ap.empty()) {
        report.map = mean_average_precision(report.per_class_ap);
        report.macro_f1 = macro_f1_sum / static_cast<double>(report.per_class_ap.size());
    }
    report.precision = total_tp + total_fp == 0
                           ? 0.0
                           : static_cast<double>(total_tp) / static_cast<double>(total_tp + total_fp);
    report.recall =
        total_gt == 0 ? 0.0 : static_cast<double>(total_tp) / static_cast<double>(total_gt);
    report.f1 = f1_score(report.precision, report.recall);
    return report;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void warn_degenerate(const std::filesystem::path& path, const Box& b) {
    if (b.degenerate())
        std::cerr << "warning: " << path.string() << ": degenerate box (zero width or height)\n";
}

} // namespace

EvalReport evaluate(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                    double iou_threshold, bool apply_nms, double nms_threshold) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(pred_dir)) throw std::runtime_error("not a directory: " + pred_dir.string());
    if (!fs::is_directory(gt_dir)) throw std::runtime_error("not a directory: " + gt_dir.string());

    std::set<std::string> stems;
    for (const auto& dir : {pred_dir, gt_dir})
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().extension() == ".txt")
                stems.insert(entry.path().stem().string());

    std::vector<Scene> scenes;
    for (const auto& stem : stems) {
        Scene scene;
        fs::path pred_file = pred_dir / (stem + ".txt");
        fs::path gt_file = gt_dir / (stem + ".txt");
        if (fs::exists(pred_file)) {
            try {
                scene.preds = parse_yolo_predictions(read_file(pred_file));
            } catch (const std::invalid_argument& e) {
                throw std::runtime_error(pred_file.string() + ": " + e.what());
            }
            for (const auto& d : scene.preds) warn_degenerate(pred_file, d.box);
        }
        if (fs::exists(gt_file)) {
            try {
                scene.gts = parse_yolo_ground_truth(read_file(gt_file));
            } catch (const std::invalid_argument& e) {
                throw std::runtime_error(gt_file.string() + ": " + e.what());
            }
            for (const auto& b : scene.gts) warn_degenerate(gt_file, b);
        }
        scenes.push_back(std::move(scene));
    }
    return evaluate_scenes(scenes, iou_threshold, apply_nms, nms_threshold);
}

std::string report_csv(const EvalReport& report) {
    std::ostringstream out;
    out << "class,n_gt,TP,FP,FN,AP\n";
    for (const auto& [cls, counts] : report.counts) {
        out << cls << "," << counts.num_gt << "," << counts.tp << "," << counts.fp << ","
            << counts.fn() << "," << format_number(report.per_class_ap.at(cls)) << "\n";
    }
    out << "mAP," << format_number(report.map) << "\n";
    out << "micro_precision," << format_number(report.precision) << "\n";
    out << "micro_recall," << format_number(report.recall) << "\n";
    out << "micro_f1," << format_number(report.f1) << "\n";
    out << "macro_f1," << format_number(report.macro_f1) << "\n";
    return out.str();
}

std::string report_table(const EvalReport& report) {
    char buf[128];
    std::ostringstream out;
    out << "class   n_gt     TP     FP     FN       AP\n";
    for (const auto& [cls, counts] : report.counts) {
        std::snprintf(buf, sizeof(buf), "%5d  %5zu  %5zu  %5zu  %5zu  %6.1f%%\n", cls,
                      counts.num_gt, counts.tp, counts.fp, counts.fn(),
                      100.0 * report.per_class_ap.at(cls));
        out << buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "mAP %.1f%%  precision %.1f%%  recall %.1f%%  F1 %.1f%%  macro-F1 %.1f%%\n",
                  100.0 * report.map, 100.0 * report.precision, 100.0 * report.recall,
                  100.0 * report.f1, 100.0 * report.macro_f1);
    out << buf;
    return out.str();
}

} // namespace fedsim
