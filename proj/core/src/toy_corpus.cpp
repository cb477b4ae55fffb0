#include "rdf/toy_corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "rdf/image.hpp"
#include "rdf/rng.hpp"

namespace rdf {

namespace {

struct Color {
  float r, g, b;
};

Color random_color(Rng& rng, float lo, float hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

Color lerp(Color a, Color b, float t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

void put(Image& img, int y, int x, Color c) {
  img.at(0, y, x) = std::clamp(c.r, 0.0f, 1.0f);
  img.at(1, y, x) = std::clamp(c.g, 0.0f, 1.0f);
  img.at(2, y, x) = std::clamp(c.b, 0.0f, 1.0f);
}

Image gradient_image(int size, Rng& rng) {
  Image img({3, size, size});
  const double ang = rng.uniform(0.0, 6.28318);
  const float dx = static_cast<float>(std::cos(ang)), dy = static_cast<float>(std::sin(ang));
  Color c0 = random_color(rng, 0.05, 0.5), c1 = random_color(rng, 0.5, 0.95);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float t = 0.5f + 0.5f * (dx * (x - size / 2.0f) + dy * (y - size / 2.0f)) / (size / 2.0f);
      put(img, y, x, lerp(c0, c1, std::clamp(t, 0.0f, 1.0f)));
    }
  return img;
}

Image stripes_image(int size, Rng& rng) {
  Image img({3, size, size});
  const double freq = rng.uniform(2.0, 4.0) * 6.28318 / size;
  const double ang = rng.uniform(0.0, 3.14159);
  const double phase = rng.uniform(0.0, 6.28318);
  const float dx = static_cast<float>(std::cos(ang)), dy = static_cast<float>(std::sin(ang));
  Color c0 = random_color(rng, 0.1, 0.4), c1 = random_color(rng, 0.6, 0.9);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float t = 0.5f + 0.5f * static_cast<float>(std::sin(freq * (dx * x + dy * y) + phase));
      put(img, y, x, lerp(c0, c1, t));
    }
  return img;
}

Image checker_image(int size, Rng& rng) {
  Image img({3, size, size});
  const int cell = 6 + static_cast<int>(rng.uniform_int(5));
  Color c0 = random_color(rng, 0.1, 0.4), c1 = random_color(rng, 0.6, 0.9);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) put(img, y, x, ((x / cell + y / cell) % 2) ? c1 : c0);
  return img;
}

Image blobs_image(int size, Rng& rng) {
  Image img({3, size, size});
  Color bg = random_color(rng, 0.1, 0.35);
  const int n_blobs = 2 + static_cast<int>(rng.uniform_int(3));
  struct Blob {
    float cx, cy, r2;
    Color c;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < n_blobs; ++i) {
    float rr = static_cast<float>(rng.uniform(0.12, 0.3)) * size;
    blobs.push_back({static_cast<float>(rng.uniform(0.2, 0.8)) * size,
                     static_cast<float>(rng.uniform(0.2, 0.8)) * size, rr * rr,
                     random_color(rng, 0.55, 0.95)});
  }
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      Color c = bg;
      for (const auto& b : blobs) {
        float d2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy);
        float w = std::exp(-d2 / b.r2);
        c = lerp(c, b.c, w);
      }
      put(img, y, x, c);
    }
  return img;
}

Image value_noise_image(int size, Rng& rng) {
  const int grid = 5;
  std::vector<Color> knots(static_cast<size_t>(grid * grid));
  for (auto& k : knots) k = random_color(rng, 0.15, 0.85);
  Image img({3, size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      float fy = static_cast<float>(y) / (size - 1) * (grid - 1);
      float fx = static_cast<float>(x) / (size - 1) * (grid - 1);
      int iy = std::min(static_cast<int>(fy), grid - 2);
      int ix = std::min(static_cast<int>(fx), grid - 2);
      float ty = fy - iy, tx = fx - ix;
      Color top = lerp(knots[iy * grid + ix], knots[iy * grid + ix + 1], tx);
      Color bot = lerp(knots[(iy + 1) * grid + ix], knots[(iy + 1) * grid + ix + 1], tx);
      put(img, y, x, lerp(top, bot, ty));
    }
  return img;
}

}  // namespace

std::vector<std::filesystem::path> write_toy_corpus(const std::filesystem::path& dir, int count,
                                                    int size, uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> out;
  for (int i = 0; i < count; ++i) {
    // one rng per image so corpus members are stable under count changes
    Rng rng(seed_for(seed, "toy-" + std::to_string(i)));
    Image img;
    switch (i % 5) {
      case 0: img = gradient_image(size, rng); break;
      case 1: img = stripes_image(size, rng); break;
      case 2: img = checker_image(size, rng); break;
      case 3: img = blobs_image(size, rng); break;
      default: img = value_noise_image(size, rng); break;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "toy%02d.png", i);
    auto path = dir / name;
    save_png(img, path);
    out.push_back(path);
  }
  return out;
}

}  // namespace rdf
