#include "rdf/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace rdf {

Image load_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);  // BGR, 8-bit
  if (m.empty()) throw std::runtime_error("failed to decode image: " + path.string());
  Image img({3, m.rows, m.cols});
  for (int y = 0; y < m.rows; ++y) {
    const cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      img.at(0, y, x) = row[x][2] / 255.0f;  // R
      img.at(1, y, x) = row[x][1] / 255.0f;  // G
      img.at(2, y, x) = row[x][0] / 255.0f;  // B
    }
  }
  return img;
}

void save_png(const Image& img, const std::filesystem::path& path) {
  if (img.rank() != 3 || (img.dim(0) != 3 && img.dim(0) != 1))
    throw std::invalid_argument("save_png: expected (3,H,W) or (1,H,W)");
  const int h = height(img), w = width(img);
  cv::Mat m(h, w, CV_8UC3);
  auto to_u8 = [](float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  for (int y = 0; y < h; ++y) {
    cv::Vec3b* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < w; ++x) {
      if (img.dim(0) == 3) {
        row[x] = cv::Vec3b(to_u8(img.at(2, y, x)), to_u8(img.at(1, y, x)), to_u8(img.at(0, y, x)));
      } else {
        unsigned char g = to_u8(img.at(0, y, x));
        row[x] = cv::Vec3b(g, g, g);
      }
    }
  }
  std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m, {cv::IMWRITE_PNG_COMPRESSION, 6}))
    throw std::runtime_error("failed to write image: " + path.string());
}

Image to_gray(const Image& img) {
  if (img.dim(0) == 1) return img;
  if (img.dim(0) != 3) throw std::invalid_argument("to_gray: 1 or 3 channels expected");
  const int h = height(img), w = width(img);
  Image out({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(0, y, x) =
          0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
  return out;
}

namespace {

// 1-D resample taps: area average when out < in, bilinear otherwise.
struct Taps {
  std::vector<int> start;
  std::vector<std::vector<float>> weights;
};

Taps make_taps(int in_n, int out_n) {
  Taps t;
  t.start.resize(static_cast<size_t>(out_n));
  t.weights.resize(static_cast<size_t>(out_n));
  const double scale = static_cast<double>(in_n) / out_n;
  if (out_n < in_n) {
    for (int o = 0; o < out_n; ++o) {
      double lo = o * scale, hi = (o + 1) * scale;
      int i0 = static_cast<int>(std::floor(lo));
      int i1 = std::min(static_cast<int>(std::ceil(hi)), in_n);
      t.start[o] = i0;
      double total = 0.0;
      for (int i = i0; i < i1; ++i) {
        double cover = std::min(hi, static_cast<double>(i + 1)) - std::max(lo, static_cast<double>(i));
        t.weights[o].push_back(static_cast<float>(cover));
        total += cover;
      }
      for (auto& w : t.weights[o]) w = static_cast<float>(w / total);
    }
  } else {
    for (int o = 0; o < out_n; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
      int i0 = static_cast<int>(std::floor(src));
      double frac = src - i0;
      t.start[o] = i0;
      if (i0 + 1 < in_n) {
        t.weights[o] = {static_cast<float>(1.0 - frac), static_cast<float>(frac)};
      } else {
        t.weights[o] = {1.0f};
      }
    }
  }
  return t;
}

}  // namespace

Image resize(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: bad target size");
  const int c_n = channels(img), h = height(img), w = width(img);
  Taps ty = make_taps(h, out_h), tx = make_taps(w, out_w);
  Image tmp({c_n, h, out_w});
  for (int c = 0; c < c_n; ++c)
    for (int y = 0; y < h; ++y)
      for (int ox = 0; ox < out_w; ++ox) {
        double s = 0.0;
        for (size_t j = 0; j < tx.weights[ox].size(); ++j)
          s += static_cast<double>(tx.weights[ox][j]) * img.at(c, y, tx.start[ox] + static_cast<int>(j));
        tmp.at(c, y, ox) = static_cast<float>(s);
      }
  Image out({c_n, out_h, out_w});
  for (int c = 0; c < c_n; ++c)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        double s = 0.0;
        for (size_t j = 0; j < ty.weights[oy].size(); ++j)
          s += static_cast<double>(ty.weights[oy][j]) * tmp.at(c, ty.start[oy] + static_cast<int>(j), ox);
        out.at(c, oy, ox) = static_cast<float>(s);
      }
  return out;
}

Image clamp01_image(Image img) {
  for (int64_t i = 0; i < img.numel(); ++i) img[i] = std::clamp(img[i], 0.0f, 1.0f);
  return img;
}

}  // namespace rdf
