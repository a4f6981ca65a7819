#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stbln {

inline constexpr std::size_t kRawLandmarkCount = 68;
inline constexpr std::size_t kInformativeLandmarkCount = 51;
inline constexpr std::size_t kOuterLandmarkCount = 17; // jaw line, dropped
// Nose tip is landmark 30 in the 68-point annotation; index 13 once the
// outer 17 are removed.
inline constexpr std::size_t kNoseRawIndex = 30;
inline constexpr std::size_t kNoseMasterIndex = kNoseRawIndex - kOuterLandmarkCount;

struct LandmarkPoint {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const LandmarkPoint& a, const LandmarkPoint& b) {
        return a.x == b.x && a.y == b.y;
    }
};

struct LandmarkFrame {
    std::vector<LandmarkPoint> points;

    std::size_t size() const { return points.size(); }

    void validate() const {
        if (points.size() != kRawLandmarkCount && points.size() != kInformativeLandmarkCount)
            throw std::invalid_argument("LandmarkFrame: expected 68 or 51 points, got " +
                                        std::to_string(points.size()));
        for (const auto& p : points)
            if (!std::isfinite(p.x) || !std::isfinite(p.y))
                throw std::invalid_argument("LandmarkFrame: non-finite coordinate");
    }
};

struct LandmarkSequence {
    std::vector<LandmarkFrame> frames;
    int label = 0;

    std::size_t frame_count() const { return frames.size(); }

    void validate() const {
        if (frames.empty()) throw std::invalid_argument("LandmarkSequence: no frames");
        const std::size_t n = frames.front().size();
        for (const auto& f : frames) {
            f.validate();
            if (f.size() != n)
                throw std::invalid_argument("LandmarkSequence: inconsistent point counts");
        }
        if (label < 0) throw std::invalid_argument("LandmarkSequence: negative label");
    }
};

// Cyclic repetition of the frame list up to `target`; sequences that already
// have enough frames pass through unchanged.
inline LandmarkSequence tile_frames(const LandmarkSequence& seq, std::size_t target) {
    if (target < 1) throw std::invalid_argument("tile_frames: target must be >= 1");
    if (seq.frames.empty()) throw std::invalid_argument("tile_frames: empty sequence");
    if (seq.frame_count() >= target) return seq;
    LandmarkSequence out;
    out.label = seq.label;
    out.frames.reserve(target);
    for (std::size_t i = 0; i < target; ++i) out.frames.push_back(seq.frames[i % seq.frame_count()]);
    return out;
}

struct FrameSelection {
    enum class Mode { peak4, uniform };
    Mode mode = Mode::peak4;
    std::size_t target = 0; // uniform only

    static FrameSelection peak4() { return {Mode::peak4, 0}; }
    static FrameSelection uniform(std::size_t n) {
        if (n < 1) throw std::invalid_argument("FrameSelection: uniform target must be >= 1");
        return {Mode::uniform, n};
    }
};

// peak4: first frame plus the last three. uniform(n): n frames at equal
// intervals, tiling cyclically when fewer than n are available.
inline LandmarkSequence select_frames(const LandmarkSequence& seq, const FrameSelection& sel) {
    if (seq.frames.empty()) throw std::invalid_argument("select_frames: empty sequence");
    const std::size_t t = seq.frame_count();
    LandmarkSequence out;
    out.label = seq.label;
    switch (sel.mode) {
    case FrameSelection::Mode::peak4: {
        if (t < 4)
            throw std::invalid_argument("select_frames: peak4 needs at least 4 frames, got " +
                                        std::to_string(t));
        for (std::size_t idx : {std::size_t{0}, t - 3, t - 2, t - 1})
            out.frames.push_back(seq.frames[idx]);
        return out;
    }
    case FrameSelection::Mode::uniform: {
        const std::size_t n = sel.target;
        if (t < n) return tile_frames(seq, n);
        out.frames.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.frames.push_back(seq.frames[i * t / n]);
        return out;
    }
    }
    throw std::invalid_argument("select_frames: unknown mode");
}

// Keep landmarks 17..67: the 51 points covering brows, nose, eyes and mouth.
inline LandmarkFrame extract_informative(const LandmarkFrame& frame) {
    if (frame.size() != kRawLandmarkCount)
        throw std::invalid_argument("extract_informative: expected 68 points, got " +
                                    std::to_string(frame.size()));
    LandmarkFrame out;
    out.points.assign(frame.points.begin() + kOuterLandmarkCount, frame.points.end());
    return out;
}

inline LandmarkSequence extract_informative(const LandmarkSequence& seq) {
    LandmarkSequence out;
    out.label = seq.label;
    out.frames.reserve(seq.frame_count());
    for (const auto& f : seq.frames) out.frames.push_back(extract_informative(f));
    return out;
}

// Center the frame on the master landmark (nose); the master point maps to
// the origin exactly.
inline LandmarkFrame normalize_frame(const LandmarkFrame& frame, std::size_t master_index) {
    if (master_index >= frame.size())
        throw std::invalid_argument("normalize_frame: master index out of range");
    const LandmarkPoint center = frame.points[master_index];
    LandmarkFrame out;
    out.points.reserve(frame.size());
    for (const auto& p : frame.points) out.points.push_back({p.x - center.x, p.y - center.y});
    return out;
}

inline LandmarkSequence normalize_sequence(const LandmarkSequence& seq,
                                           std::size_t master_index) {
    LandmarkSequence out;
    out.label = seq.label;
    out.frames.reserve(seq.frame_count());
    for (const auto& f : seq.frames) out.frames.push_back(normalize_frame(f, master_index));
    return out;
}

} // namespace stbln
