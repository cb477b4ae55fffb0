#pragma once

#include <filesystem>
#include <string>

#include "rdf/tensor.hpp"

namespace rdf {

// Images are float tensors in [0,1], channels-first (C,H,W), C = 3 or 1.
using Image = Tensor;

inline int channels(const Image& img) { return img.dim(0); }
inline int height(const Image& img) { return img.dim(1); }
inline int width(const Image& img) { return img.dim(2); }

// 8-bit PNG decode/encode. Values are mapped to/from [0,1] with round-to-
// nearest on write. Throws std::runtime_error on I/O or decode failure.
Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);

// Luma conversion (0.299 R + 0.587 G + 0.114 B); 1-channel input passes through.
Image to_gray(const Image& img);

// Deterministic resampler: area average when shrinking, bilinear when
// enlarging (per axis).
Image resize(const Image& img, int out_h, int out_w);

Image clamp01_image(Image img);

}  // namespace rdf
