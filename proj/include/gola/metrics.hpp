#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace gola {

// Axis-aligned box: top-left corner plus width and height, in pixels.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
};

struct FramePair {
    BBox prediction;
    BBox truth;
};

// Throws ValidationError for negative sizes or non-finite coordinates.
void validate_box(const BBox& box);

class BBoxSequence {
public:
    explicit BBoxSequence(std::vector<FramePair> frames);

    const std::vector<FramePair>& frames() const { return frames_; }
    std::size_t size() const { return frames_.size(); }

private:
    std::vector<FramePair> frames_;
};

class ModalPair {
public:
    ModalPair(BBoxSequence visible, BBoxSequence thermal);

    const BBoxSequence& visible() const { return visible_; }
    const BBoxSequence& thermal() const { return thermal_; }
    std::size_t size() const { return visible_.size(); }

private:
    BBoxSequence visible_;
    BBoxSequence thermal_;
};

// Threshold grid for the AUC-style success score: 0.00, 0.05, ..., 1.00.
inline constexpr std::size_t kSuccessGridPoints = 21;
std::array<double, kSuccessGridPoints> success_thresholds();

double center_error(const BBox& prediction, const BBox& truth);

// Zero when the union has zero area.
double iou(const BBox& prediction, const BBox& truth);

// Fraction of frames with center error strictly below xi_pr.
double precision_rate(const BBoxSequence& seq, double xi_pr);
// Fraction of frames with IoU at or above xi_sr.
double success_rate(const BBoxSequence& seq, double xi_sr);
double success_auc(const BBoxSequence& seq);

// Per frame the smaller center error over the two modalities, then the PR count.
double mpr(const ModalPair& pair, double xi_pr);
// Per frame the larger IoU over the two modalities, then the SR count.
double msr(const ModalPair& pair, double xi_sr);
double msr_auc(const ModalPair& pair);

// Rates from precomputed per-frame values.
double rate_below(const std::vector<double>& values, double threshold);
double rate_at_least(const std::vector<double>& values, double threshold);

}  // namespace gola
