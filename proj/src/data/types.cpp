#include "semattn/data/types.hpp"

#include <cmath>

#include "semattn/errors.hpp"

namespace semattn::data {

void RgbImage::validate() const {
    if (height < 1 || width < 1) {
        throw ShapeError("degenerate RGB image " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (pixels.size() != static_cast<std::size_t>(height) * width * 3) {
        throw ShapeError("RGB image buffer does not hold exactly 3 channels");
    }
    for (float v : pixels) {
        if (!std::isfinite(v) || v < 0.0F || v > 1.0F) throw NumericError("RGB value outside [0, 1]");
    }
}

void SemanticScoreTensor::validate() const {
    if (height < 1 || width < 1) throw FormatError("degenerate semantic tensor");
    if (num_classes < 1) throw FormatError("semantic tensor needs at least one class");
    const std::size_t n = static_cast<std::size_t>(height) * width * kTopSlots;
    if (labels.size() != n || scores.size() != n) throw FormatError("semantic tensor buffer size mismatch");
    for (std::size_t p = 0; p < n; p += kTopSlots) {
        for (int k = 0; k < kTopSlots; ++k) {
            const std::uint16_t lab = labels[p + k];
            const float s = scores[p + k];
            if (!std::isfinite(s) || s < 0.0F) throw FormatError("semantic score must be finite and nonnegative");
            if (lab == kNoLabel) {
                if (s != 0.0F) throw FormatError("unused semantic slot carries a nonzero score");
                continue;
            }
            if (lab >= num_classes) {
                throw FormatError("semantic label " + std::to_string(lab) + " out of range for L=" +
                                  std::to_string(num_classes));
            }
            for (int j = 0; j < k; ++j) {
                if (labels[p + j] == lab) throw FormatError("duplicate semantic label within a pixel");
            }
            if (k > 0 && s > scores[p + k - 1]) throw FormatError("semantic scores must be nonincreasing across slots");
        }
    }
}

std::string to_string(Split split) { return split == Split::Train ? "train" : "val"; }

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    throw ConfigError("unknown split '" + s + "'");
}

}  // namespace semattn::data
