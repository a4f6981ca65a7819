#pragma once

// Dataset loading and writing (CSV), the 14x augmentation recipe, the
// synthetic landmark-motion generator, and stratified splitting.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stbln/errors.hpp"
#include "stbln/landmarks.hpp"
#include "stbln/rng.hpp"

namespace stbln {

inline constexpr const char* kDatasetCsvHeader = "sequence_id,frame_idx,landmark_idx,x,y,label";

// ---------------------------------------------------------------------------
// CSV dataset I/O. One row per landmark per frame; rows may be interleaved
// across sequences. Sequences come back in first-appearance order.
// ---------------------------------------------------------------------------

namespace data_detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s, std::size_t row, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw data_error("dataset row " + std::to_string(row) + ": bad " + what + " '" + s +
                         "'");
    }
}

inline long parse_long(const std::string& s, std::size_t row, const char* what) {
    try {
        std::size_t used = 0;
        const long v = std::stol(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw data_error("dataset row " + std::to_string(row) + ": bad " + what + " '" + s +
                         "'");
    }
}

} // namespace data_detail

inline std::vector<LandmarkSequence> load_dataset_csv(std::istream& in) {
    using namespace data_detail;
    std::string line;
    if (!std::getline(in, line)) throw data_error("dataset: empty file");
    if (line == std::string(kDatasetCsvHeader) + "\r") line.pop_back();
    if (line != kDatasetCsvHeader)
        throw data_error("dataset row 1: expected header '" + std::string(kDatasetCsvHeader) +
                         "'");

    struct FrameRows {
        std::map<long, std::pair<LandmarkPoint, std::size_t>> points; // landmark -> (p, row)
    };
    struct SeqRows {
        std::map<long, FrameRows> frames;
        int label = -1;
        std::size_t first_row = 0;
    };
    std::map<std::string, SeqRows> by_id;
    std::vector<std::string> order;

    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_csv_row(line);
        if (fields.size() != 6)
            throw data_error("dataset row " + std::to_string(row) + ": expected 6 fields, got " +
                             std::to_string(fields.size()));
        const std::string& seq_id = fields[0];
        const long frame_idx = parse_long(fields[1], row, "frame_idx");
        const long lm_idx = parse_long(fields[2], row, "landmark_idx");
        const double x = parse_double(fields[3], row, "x");
        const double y = parse_double(fields[4], row, "y");
        const long label = parse_long(fields[5], row, "label");
        if (frame_idx < 0)
            throw data_error("dataset row " + std::to_string(row) + ": negative frame_idx");
        if (lm_idx < 0 || lm_idx >= static_cast<long>(kRawLandmarkCount))
            throw data_error("dataset row " + std::to_string(row) +
                             ": landmark_idx out of range [0,68)");
        if (label < 0)
            throw data_error("dataset row " + std::to_string(row) + ": negative label");
        if (!std::isfinite(x) || !std::isfinite(y))
            throw data_error("dataset row " + std::to_string(row) + ": non-finite coordinate");

        auto [it, inserted] = by_id.try_emplace(seq_id);
        if (inserted) {
            order.push_back(seq_id);
            it->second.label = static_cast<int>(label);
            it->second.first_row = row;
        } else if (it->second.label != static_cast<int>(label)) {
            throw data_error("dataset row " + std::to_string(row) + ": sequence '" + seq_id +
                             "' has inconsistent labels");
        }
        auto [pit, fresh] =
            it->second.frames[frame_idx].points.try_emplace(lm_idx, LandmarkPoint{x, y}, row);
        if (!fresh)
            throw data_error("dataset row " + std::to_string(row) + ": duplicate landmark " +
                             std::to_string(lm_idx) + " in frame " + std::to_string(frame_idx) +
                             " of sequence '" + seq_id + "'");
    }
    if (order.empty()) throw data_error("dataset: no rows");

    std::vector<LandmarkSequence> out;
    for (const std::string& id : order) {
        const SeqRows& rows = by_id.at(id);
        LandmarkSequence seq;
        seq.label = rows.label;
        std::size_t expected_points = 0;
        for (const auto& [frame_idx, frame_rows] : rows.frames) {
            // infer the intended landmark count from the largest index, then
            // demand full coverage so a gap is reported by name
            const long max_idx = frame_rows.points.rbegin()->first;
            const std::size_t count =
                max_idx >= static_cast<long>(kInformativeLandmarkCount)
                    ? kRawLandmarkCount
                    : kInformativeLandmarkCount;
            for (std::size_t lm = 0; lm < count; ++lm)
                if (!frame_rows.points.count(static_cast<long>(lm)))
                    throw data_error("dataset: sequence '" + id + "' frame " +
                                     std::to_string(frame_idx) + " is missing landmark " +
                                     std::to_string(lm));
            if (expected_points == 0) expected_points = count;
            if (count != expected_points)
                throw data_error("dataset: sequence '" + id +
                                 "' has frames with differing landmark counts");
            LandmarkFrame frame;
            frame.points.resize(count);
            for (std::size_t lm = 0; lm < count; ++lm)
                frame.points[lm] = frame_rows.points.at(static_cast<long>(lm)).first;
            seq.frames.push_back(std::move(frame));
        }
        seq.validate();
        out.push_back(std::move(seq));
    }
    return out;
}

inline std::vector<LandmarkSequence> load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("dataset: cannot open '" + path + "'");
    return load_dataset_csv(in);
}

inline void write_dataset_csv(std::ostream& out, const std::vector<LandmarkSequence>& seqs) {
    out << kDatasetCsvHeader << "\n";
    char buf[64];
    for (std::size_t s = 0; s < seqs.size(); ++s) {
        for (std::size_t t = 0; t < seqs[s].frames.size(); ++t) {
            const LandmarkFrame& frame = seqs[s].frames[t];
            for (std::size_t lm = 0; lm < frame.points.size(); ++lm) {
                out << s << ',' << t << ',' << lm << ',';
                std::snprintf(buf, sizeof buf, "%.17g", frame.points[lm].x);
                out << buf << ',';
                std::snprintf(buf, sizeof buf, "%.17g", frame.points[lm].y);
                out << buf << ',' << seqs[s].label << "\n";
            }
        }
    }
}

inline void write_dataset_csv(const std::string& path,
                              const std::vector<LandmarkSequence>& seqs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw data_error("dataset: cannot open '" + path + "' for writing");
    write_dataset_csv(out, seqs);
    if (!out) throw data_error("dataset: short write to '" + path + "'");
}

// ---------------------------------------------------------------------------
// Augmentation: original + flip + 3*(noise) + 3*(noise+rotation)
// + 3*(noise+flip) + 3*(noise+rotation+flip) = 14 sequences per input.
// ---------------------------------------------------------------------------

struct AugmentConfig {
    std::vector<double> noise_sigmas = {0.5, 1.0, 1.5}; // pixels
    double rotation_max_degrees = 10.0;
    double flip_probability = 0.5;
    std::size_t target_frames = 0; // 0 keeps the frame count
    std::uint64_t seed = 0;

    void validate() const {
        if (noise_sigmas.size() != 3)
            throw std::invalid_argument("AugmentConfig: exactly 3 noise sigmas expected");
        for (double s : noise_sigmas)
            if (!(s >= 0.0)) throw std::invalid_argument("AugmentConfig: negative noise sigma");
        if (rotation_max_degrees < 0.0 || rotation_max_degrees > 45.0)
            throw std::invalid_argument("AugmentConfig: rotation_max must be in [0,45]");
        if (flip_probability < 0.0 || flip_probability > 1.0)
            throw std::invalid_argument("AugmentConfig: flip_probability must be in [0,1]");
    }
};

namespace data_detail {

inline std::size_t nose_index_for(const LandmarkFrame& frame) {
    return frame.size() == kRawLandmarkCount ? kNoseRawIndex : kNoseMasterIndex;
}

inline LandmarkSequence add_noise(const LandmarkSequence& seq, double sigma, RngStream& rng) {
    LandmarkSequence out = seq;
    for (auto& frame : out.frames)
        for (auto& p : frame.points) {
            p.x += sigma * rng.normal();
            p.y += sigma * rng.normal();
        }
    return out;
}

// One angle for the whole sequence, rotating every frame about its nose.
inline LandmarkSequence rotate(const LandmarkSequence& seq, double degrees) {
    const double rad = degrees * 3.14159265358979323846 / 180.0;
    const double c = std::cos(rad), s = std::sin(rad);
    LandmarkSequence out = seq;
    for (auto& frame : out.frames) {
        const LandmarkPoint nose = frame.points[nose_index_for(frame)];
        for (auto& p : frame.points) {
            const double dx = p.x - nose.x, dy = p.y - nose.y;
            p.x = nose.x + c * dx - s * dy;
            p.y = nose.y + s * dx + c * dy;
        }
    }
    return out;
}

// Mirror x about the nose; an exact involution.
inline LandmarkSequence flip_x(const LandmarkSequence& seq) {
    LandmarkSequence out = seq;
    for (auto& frame : out.frames) {
        const double nose_x = frame.points[nose_index_for(frame)].x;
        for (auto& p : frame.points) p.x = 2.0 * nose_x - p.x;
    }
    return out;
}

} // namespace data_detail

inline std::vector<LandmarkSequence> augment(const LandmarkSequence& seq,
                                             const AugmentConfig& cfg) {
    using namespace data_detail;
    cfg.validate();
    seq.validate();
    RngStream rng(derive_seed(cfg.seed, 0x41554731ULL)); // "AUG1"

    auto maybe_flip = [&](const LandmarkSequence& s) {
        return rng.bernoulli(cfg.flip_probability) ? flip_x(s) : s;
    };
    auto random_rotation = [&](const LandmarkSequence& s) {
        return rotate(s, rng.uniform(-cfg.rotation_max_degrees, cfg.rotation_max_degrees));
    };

    std::vector<LandmarkSequence> out;
    out.reserve(14);
    out.push_back(seq);
    out.push_back(maybe_flip(seq));
    for (double sigma : cfg.noise_sigmas) out.push_back(add_noise(seq, sigma, rng));
    for (double sigma : cfg.noise_sigmas)
        out.push_back(random_rotation(add_noise(seq, sigma, rng)));
    for (double sigma : cfg.noise_sigmas)
        out.push_back(maybe_flip(add_noise(seq, sigma, rng)));
    for (double sigma : cfg.noise_sigmas)
        out.push_back(maybe_flip(random_rotation(add_noise(seq, sigma, rng))));

    if (cfg.target_frames > 0)
        for (auto& s : out) s = select_frames(s, FrameSelection::uniform(cfg.target_frames));
    return out;
}

inline std::vector<LandmarkSequence> augment_dataset(const std::vector<LandmarkSequence>& seqs,
                                                     const AugmentConfig& cfg) {
    std::vector<LandmarkSequence> out;
    out.reserve(seqs.size() * 14);
    for (std::size_t i = 0; i < seqs.size(); ++i) {
        AugmentConfig per = cfg;
        per.seed = derive_seed(cfg.seed, 0x53455153ULL, i); // per-sequence stream
        auto variants = augment(seqs[i], per);
        for (auto& v : variants) out.push_back(std::move(v));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic landmark-motion generator: a fixed 68-point neutral face where
// each class translates a distinct landmark subset along a distinct
// trajectory over T frames.
// ---------------------------------------------------------------------------

struct LandmarkMove {
    std::size_t landmark = 0;
    double dx = 0.0;
    double dy = 0.0;
};

struct MotionProgram {
    std::vector<LandmarkMove> moves;
};

struct SyntheticSpec {
    std::size_t class_count = 3;
    std::size_t sequences_per_class = 20;
    std::size_t frames = 4;
    double jitter_sigma = 0.5;
    std::uint64_t seed = 0;
    std::vector<MotionProgram> motions; // one program per class

    void validate() const {
        if (class_count < 2) throw std::invalid_argument("SyntheticSpec: class_count must be >= 2");
        if (sequences_per_class < 1)
            throw std::invalid_argument("SyntheticSpec: sequences_per_class must be >= 1");
        if (frames < 1) throw std::invalid_argument("SyntheticSpec: frames must be >= 1");
        if (jitter_sigma < 0.0) throw std::invalid_argument("SyntheticSpec: negative jitter");
        if (motions.size() != class_count)
            throw std::invalid_argument("SyntheticSpec: need one motion program per class");
        for (const auto& m : motions) {
            if (m.moves.empty())
                throw std::invalid_argument("SyntheticSpec: empty motion program");
            for (const auto& mv : m.moves)
                if (mv.landmark >= kRawLandmarkCount)
                    throw std::invalid_argument("SyntheticSpec: move landmark out of range");
        }
        for (std::size_t a = 0; a < motions.size(); ++a)
            for (std::size_t b = a + 1; b < motions.size(); ++b) {
                const auto& ma = motions[a].moves;
                const auto& mb = motions[b].moves;
                bool same = ma.size() == mb.size();
                for (std::size_t i = 0; same && i < ma.size(); ++i)
                    same = ma[i].landmark == mb[i].landmark && ma[i].dx == mb[i].dx &&
                           ma[i].dy == mb[i].dy;
                if (same)
                    throw std::invalid_argument(
                        "SyntheticSpec: motion programs must differ across classes");
            }
    }
};

// Neutral 68-point face in a ~256x256 pixel box: jaw arc, brows, nose
// bridge + nostrils, eye hexagons, outer + inner lips. A fixed sub-pixel
// perturbation breaks the mirror symmetry so the canonical frame is safely
// in general position for the triangulation.
inline LandmarkFrame synthetic_face_template() {
    const double cx = 128.0, cy = 120.0;
    const double pi = 3.14159265358979323846;
    LandmarkFrame f;
    f.points.resize(kRawLandmarkCount);
    for (std::size_t i = 0; i < 17; ++i) { // jaw 0..16
        const double t = (15.0 + 150.0 * static_cast<double>(i) / 16.0) * pi / 180.0;
        f.points[i] = {cx - 66.0 * std::cos(t), cy + 74.0 * std::sin(t)};
    }
    for (std::size_t i = 0; i < 5; ++i) { // left brow 17..21
        const double u = static_cast<double>(i) / 4.0;
        f.points[17 + i] = {cx - 48.0 + 34.0 * u, cy - 38.0 - 6.0 * std::sin(pi * u)};
    }
    for (std::size_t i = 0; i < 5; ++i) { // right brow 22..26
        const double u = static_cast<double>(i) / 4.0;
        f.points[22 + i] = {cx + 14.0 + 34.0 * u, cy - 44.0 + 6.0 * (1.0 - std::sin(pi * u))};
    }
    for (std::size_t i = 0; i < 4; ++i) // nose bridge 27..30 (30 = tip)
        f.points[27 + i] = {cx, cy - 26.0 + 10.0 * static_cast<double>(i)};
    for (std::size_t i = 0; i < 5; ++i) // nostril base 31..35
        f.points[31 + i] = {cx - 12.0 + 6.0 * static_cast<double>(i), cy + 14.0};
    const double eye_w = 14.0, eye_h = 6.0;
    for (std::size_t i = 0; i < 6; ++i) { // left eye 36..41
        const double a = pi * (2.0 * static_cast<double>(i) / 6.0);
        f.points[36 + i] = {cx - 31.0 + eye_w * std::cos(a), cy - 18.0 - eye_h * std::sin(a)};
    }
    for (std::size_t i = 0; i < 6; ++i) { // right eye 42..47
        const double a = pi * (2.0 * static_cast<double>(i) / 6.0);
        f.points[42 + i] = {cx + 31.0 + eye_w * std::cos(a), cy - 18.0 - eye_h * std::sin(a)};
    }
    for (std::size_t i = 0; i < 12; ++i) { // outer lips 48..59
        const double a = pi * (2.0 * static_cast<double>(i) / 12.0);
        f.points[48 + i] = {cx - 24.0 * std::cos(a), cy + 48.0 + 12.0 * std::sin(a)};
    }
    for (std::size_t i = 0; i < 8; ++i) { // inner lips 60..67
        const double a = pi * (2.0 * static_cast<double>(i) / 8.0);
        f.points[60 + i] = {cx - 14.0 * std::cos(a), cy + 48.0 + 5.0 * std::sin(a)};
    }
    RngStream asym(0xFACE);
    for (auto& p : f.points) {
        p.x += asym.uniform(-0.5, 0.5);
        p.y += asym.uniform(-0.5, 0.5);
    }
    return f;
}

inline SyntheticSpec default_synthetic_spec() {
    SyntheticSpec spec;
    MotionProgram smile;
    for (auto [lm, dx, dy] : {std::tuple<std::size_t, double, double>{48, -7.0, -5.0},
                              {49, -4.0, -3.0},
                              {59, -4.0, -2.0},
                              {60, -4.0, -3.0},
                              {54, 7.0, -5.0},
                              {53, 4.0, -3.0},
                              {55, 4.0, -2.0},
                              {64, 4.0, -3.0}})
        smile.moves.push_back({lm, dx, dy});
    MotionProgram brow_raise;
    for (std::size_t lm = 17; lm <= 26; ++lm) brow_raise.moves.push_back({lm, 0.0, -7.0});
    brow_raise.moves.push_back({37, 0.0, -2.0});
    brow_raise.moves.push_back({38, 0.0, -2.0});
    brow_raise.moves.push_back({43, 0.0, -2.0});
    brow_raise.moves.push_back({44, 0.0, -2.0});
    MotionProgram mouth_open;
    for (auto [lm, dx, dy] : {std::tuple<std::size_t, double, double>{56, 0.0, 8.0},
                              {57, 0.0, 9.0},
                              {58, 0.0, 8.0},
                              {65, 0.0, 7.0},
                              {66, 0.0, 7.5},
                              {67, 0.0, 7.0},
                              {7, 0.0, 5.0},
                              {8, 0.0, 6.0},
                              {9, 0.0, 5.0}})
        mouth_open.moves.push_back({lm, dx, dy});
    spec.motions = {smile, brow_raise, mouth_open};
    return spec;
}

inline std::vector<LandmarkSequence> generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const LandmarkFrame base = synthetic_face_template();
    std::vector<LandmarkSequence> out;
    out.reserve(spec.class_count * spec.sequences_per_class);
    for (std::size_t c = 0; c < spec.class_count; ++c) {
        for (std::size_t s = 0; s < spec.sequences_per_class; ++s) {
            RngStream rng(derive_seed(spec.seed, c, s));
            // per-sequence phase: scales how far along the motion the
            // sequence gets; frame 0 is always the neutral face
            const double phase = 0.7 + 0.3 * rng.uniform();
            LandmarkSequence seq;
            seq.label = static_cast<int>(c);
            for (std::size_t t = 0; t < spec.frames; ++t) {
                const double progress =
                    spec.frames == 1
                        ? 0.0
                        : phase * static_cast<double>(t) / static_cast<double>(spec.frames - 1);
                LandmarkFrame frame = base;
                for (const auto& mv : spec.motions[c].moves) {
                    frame.points[mv.landmark].x += progress * mv.dx;
                    frame.points[mv.landmark].y += progress * mv.dy;
                }
                if (spec.jitter_sigma > 0.0)
                    for (auto& p : frame.points) {
                        p.x += spec.jitter_sigma * rng.normal();
                        p.y += spec.jitter_sigma * rng.normal();
                    }
                seq.frames.push_back(std::move(frame));
            }
            out.push_back(std::move(seq));
        }
    }
    return out;
}

inline nlohmann::json synthetic_spec_to_json(const SyntheticSpec& spec) {
    nlohmann::json j;
    j["classes"] = spec.class_count;
    j["sequences_per_class"] = spec.sequences_per_class;
    j["frames"] = spec.frames;
    j["jitter_sigma"] = spec.jitter_sigma;
    j["seed"] = spec.seed;
    auto motions = nlohmann::json::array();
    for (const auto& m : spec.motions) {
        auto moves = nlohmann::json::array();
        for (const auto& mv : m.moves)
            moves.push_back({{"lm", mv.landmark}, {"dx", mv.dx}, {"dy", mv.dy}});
        motions.push_back({{"moves", std::move(moves)}});
    }
    j["motions"] = std::move(motions);
    return j;
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
    SyntheticSpec spec;
    spec.class_count = j.at("classes").get<std::size_t>();
    spec.sequences_per_class = j.at("sequences_per_class").get<std::size_t>();
    spec.frames = j.at("frames").get<std::size_t>();
    spec.jitter_sigma = j.at("jitter_sigma").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& m : j.at("motions")) {
        MotionProgram prog;
        for (const auto& mv : m.at("moves"))
            prog.moves.push_back({mv.at("lm").get<std::size_t>(), mv.at("dx").get<double>(),
                                  mv.at("dy").get<double>()});
        spec.motions.push_back(std::move(prog));
    }
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Label-stratified holdout split and k-fold partition, both seed-driven.
// ---------------------------------------------------------------------------

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

namespace data_detail {

inline std::map<int, std::vector<std::size_t>>
group_by_label(const std::vector<LandmarkSequence>& seqs) {
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < seqs.size(); ++i) groups[seqs[i].label].push_back(i);
    return groups;
}

inline void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.uniform_int(i)]);
}

} // namespace data_detail

inline SplitIndices split_dataset(const std::vector<LandmarkSequence>& seqs,
                                  double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw std::invalid_argument("split_dataset: fraction must be in (0,1)");
    auto groups = data_detail::group_by_label(seqs);
    SplitIndices out;
    for (auto& [label, idx] : groups) {
        if (idx.size() < 2)
            throw std::invalid_argument("split_dataset: class " + std::to_string(label) +
                                        " has fewer than 2 sequences");
        RngStream rng(derive_seed(seed, 0x53504C54ULL, static_cast<std::uint64_t>(label)));
        data_detail::shuffle_indices(idx, rng);
        std::size_t held =
            static_cast<std::size_t>(std::llround(validation_fraction * double(idx.size())));
        held = std::clamp<std::size_t>(held, 1, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < held ? out.validation : out.train).push_back(idx[i]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.validation.begin(), out.validation.end());
    return out;
}

// Stratified k-fold partition: fold f holds every class's f-th slice (round
// robin after a seeded shuffle). Folds are disjoint and cover the dataset.
inline std::vector<std::vector<std::size_t>>
k_fold_validation_sets(const std::vector<LandmarkSequence>& seqs, std::size_t k,
                       std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("k_fold: k must be >= 2");
    auto groups = data_detail::group_by_label(seqs);
    std::vector<std::vector<std::size_t>> folds(k);
    for (auto& [label, idx] : groups) {
        RngStream rng(derive_seed(seed, 0x4B464C44ULL, static_cast<std::uint64_t>(label)));
        data_detail::shuffle_indices(idx, rng);
        for (std::size_t i = 0; i < idx.size(); ++i) folds[i % k].push_back(idx[i]);
    }
    for (auto& f : folds) std::sort(f.begin(), f.end());
    return folds;
}

template <class T>
std::vector<T> select_by_indices(const std::vector<T>& items,
                                 const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(items[i]);
    return out;
}

} // namespace stbln
