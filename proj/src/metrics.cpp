#include "gola/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gola/error.hpp"

namespace gola {

namespace {

std::vector<double> center_errors(const BBoxSequence& seq) {
    std::vector<double> out;
    out.reserve(seq.size());
    for (const FramePair& f : seq.frames()) {
        out.push_back(center_error(f.prediction, f.truth));
    }
    return out;
}

std::vector<double> overlaps(const BBoxSequence& seq) {
    std::vector<double> out;
    out.reserve(seq.size());
    for (const FramePair& f : seq.frames()) {
        out.push_back(iou(f.prediction, f.truth));
    }
    return out;
}

std::vector<double> best_overlaps(const ModalPair& pair) {
    auto v = overlaps(pair.visible());
    const auto t = overlaps(pair.thermal());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::max(v[i], t[i]);
    }
    return v;
}

double auc(const std::vector<double>& ious) {
    double total = 0.0;
    for (double xi : success_thresholds()) {
        total += rate_at_least(ious, xi);
    }
    return total / static_cast<double>(kSuccessGridPoints);
}

}  // namespace

void validate_box(const BBox& box) {
    if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.w) || !std::isfinite(box.h)) {
        throw ValidationError("bounding box has non-finite coordinates");
    }
    if (box.w < 0.0 || box.h < 0.0) {
        throw ValidationError("bounding box has negative width or height");
    }
}

BBoxSequence::BBoxSequence(std::vector<FramePair> frames) : frames_(std::move(frames)) {
    if (frames_.empty()) {
        throw ValidationError("box sequence must contain at least one frame");
    }
    for (const FramePair& f : frames_) {
        validate_box(f.prediction);
        validate_box(f.truth);
    }
}

ModalPair::ModalPair(BBoxSequence visible, BBoxSequence thermal)
    : visible_(std::move(visible)), thermal_(std::move(thermal)) {
    if (visible_.size() != thermal_.size()) {
        throw ValidationError("modality length mismatch: visible has " + std::to_string(visible_.size()) +
                              " frames, thermal has " + std::to_string(thermal_.size()));
    }
}

std::array<double, kSuccessGridPoints> success_thresholds() {
    std::array<double, kSuccessGridPoints> grid{};
    for (std::size_t i = 0; i < kSuccessGridPoints; ++i) {
        grid[i] = static_cast<double>(i) / static_cast<double>(kSuccessGridPoints - 1);
    }
    return grid;
}

double center_error(const BBox& p, const BBox& g) {
    const double dx = (p.x + p.w / 2.0) - (g.x + g.w / 2.0);
    const double dy = (p.y + p.h / 2.0) - (g.y + g.h / 2.0);
    return std::hypot(dx, dy);
}

double iou(const BBox& p, const BBox& g) {
    const double ix = std::max(0.0, std::min(p.x + p.w, g.x + g.w) - std::max(p.x, g.x));
    const double iy = std::max(0.0, std::min(p.y + p.h, g.y + g.h) - std::max(p.y, g.y));
    const double inter = ix * iy;
    const double uni = p.w * p.h + g.w * g.h - inter;
    if (uni <= 0.0) {
        return 0.0;
    }
    return std::clamp(inter / uni, 0.0, 1.0);
}

double rate_below(const std::vector<double>& values, double threshold) {
    if (values.empty()) {
        throw ValidationError("rate over an empty frame list");
    }
    const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v < threshold; });
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

double rate_at_least(const std::vector<double>& values, double threshold) {
    if (values.empty()) {
        throw ValidationError("rate over an empty frame list");
    }
    const auto hits = std::count_if(values.begin(), values.end(), [&](double v) { return v >= threshold; });
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

double precision_rate(const BBoxSequence& seq, double xi_pr) {
    return rate_below(center_errors(seq), xi_pr);
}

double success_rate(const BBoxSequence& seq, double xi_sr) {
    return rate_at_least(overlaps(seq), xi_sr);
}

double success_auc(const BBoxSequence& seq) {
    return auc(overlaps(seq));
}

double mpr(const ModalPair& pair, double xi_pr) {
    auto v = center_errors(pair.visible());
    const auto t = center_errors(pair.thermal());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = std::min(v[i], t[i]);
    }
    return rate_below(v, xi_pr);
}

double msr(const ModalPair& pair, double xi_sr) {
    return rate_at_least(best_overlaps(pair), xi_sr);
}

double msr_auc(const ModalPair& pair) {
    return auc(best_overlaps(pair));
}

}  // namespace gola
