#include "rdf/rain_synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rdf/rng.hpp"

namespace rdf {

void RainParams::validate() const {
  if (streak_count < 0) throw std::invalid_argument("rain: streak_count must be >= 0");
  if (streak_length_px < 1) throw std::invalid_argument("rain: streak_length_px must be >= 1");
  if (angle_deg < -45.0 || angle_deg > 45.0)
    throw std::invalid_argument("rain: angle_deg must be in [-45, 45]");
  if (intensity < 0.0 || intensity > 1.0)
    throw std::invalid_argument("rain: intensity must be in [0, 1]");
  if (blur_sigma < 0.0) throw std::invalid_argument("rain: blur_sigma must be >= 0");
}

namespace {

void gaussian_blur_reflect(std::vector<float>& plane, int h, int w, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> k(static_cast<size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    k[static_cast<size_t>(i + radius)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& v : k) v = static_cast<float>(v / sum);
  auto reflect = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  std::vector<float> tmp(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += static_cast<double>(k[static_cast<size_t>(i + radius)]) *
             plane[static_cast<size_t>(y) * w + reflect(x + i, w)];
      tmp[static_cast<size_t>(y) * w + x] = static_cast<float>(s);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -radius; i <= radius; ++i)
        s += static_cast<double>(k[static_cast<size_t>(i + radius)]) *
             tmp[static_cast<size_t>(reflect(y + i, h)) * w + x];
      plane[static_cast<size_t>(y) * w + x] = static_cast<float>(s);
    }
}

}  // namespace

Image synthesize_streaks(const Image& clean, const RainParams& params) {
  params.validate();
  if (clean.rank() != 3) throw std::invalid_argument("synthesize_streaks: (C,H,W) expected");
  if (!clean.all_finite())
    throw std::invalid_argument("synthesize_streaks: non-finite pixel values");
  if (params.streak_count == 0 || params.intensity == 0.0) return clean;

  const int c_n = channels(clean), h = height(clean), w = width(clean);
  std::vector<float> layer(static_cast<size_t>(h) * w, 0.0f);
  Rng rng(params.seed);
  constexpr double kDegToRad = 0.017453292519943295;
  for (int s = 0; s < params.streak_count; ++s) {
    const double cx = rng.uniform() * w;
    const double cy = rng.uniform() * h;
    const double len = params.streak_length_px * rng.uniform(0.7, 1.3);
    const double ang = (params.angle_deg + rng.uniform(-4.0, 4.0)) * kDegToRad;
    const float bright = static_cast<float>(params.intensity * rng.uniform(0.6, 1.0));
    const double dx = std::sin(ang), dy = std::cos(ang);
    for (double t = -len / 2.0; t <= len / 2.0; t += 0.5) {
      const int px = static_cast<int>(std::lround(cx + t * dx));
      const int py = static_cast<int>(std::lround(cy + t * dy));
      if (px < 0 || px >= w || py < 0 || py >= h) continue;
      float& cell = layer[static_cast<size_t>(py) * w + px];
      cell = std::max(cell, bright);
    }
  }
  gaussian_blur_reflect(layer, h, w, params.blur_sigma);

  Image out = clean;
  for (int c = 0; c < c_n; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float& v = out.at(c, y, x);
        v = std::min(1.0f, v + layer[static_cast<size_t>(y) * w + x]);
      }
  return out;
}

DatasetManifest make_dataset(const std::filesystem::path& clean_dir,
                             const std::filesystem::path& out_dir, const RainParams& params,
                             SplitFractions splits, uint64_t global_seed) {
  params.validate();
  if (std::abs(splits.train + splits.test - 1.0) > 1e-9)
    throw std::invalid_argument("make_dataset: split fractions must sum to 1");
  if (!std::filesystem::is_directory(clean_dir))
    throw std::runtime_error("make_dataset: not a directory: " + clean_dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(clean_dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  DatasetManifest m;
  m.root = out_dir;
  std::vector<std::pair<std::string, Image>> loaded;
  for (const auto& f : files) {
    try {
      loaded.emplace_back(f.stem().string(), load_png(f));
    } catch (const std::exception& e) {
      m.log.push_back("skipped: " + f.filename().string() + " (" + e.what() + ")");
    }
  }
  if (loaded.size() < 2)
    throw std::runtime_error("make_dataset: need at least 2 decodable images in " +
                             clean_dir.string());
  for (size_t i = 1; i < loaded.size(); ++i)
    if (loaded[i].first == loaded[i - 1].first)
      throw std::runtime_error("make_dataset: duplicate sample id " + loaded[i].first);

  // deterministic shuffle decides split membership; records stay id-sorted
  const size_t n = loaded.size();
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(seed_for(global_seed, "split-shuffle"));
  for (size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
  const size_t n_train = static_cast<size_t>(std::llround(splits.train * static_cast<double>(n)));
  std::vector<std::string> split_tag(n, "test");
  for (size_t i = 0; i < std::min(n_train, n); ++i) split_tag[order[i]] = "train";

  for (size_t i = 0; i < n; ++i) {
    const auto& [id, clean] = loaded[i];
    RainParams per = params;
    per.seed = seed_for(global_seed, id);
    Image rainy = synthesize_streaks(clean, per);
    ManifestRecord r;
    r.id = id;
    r.clean_path = "data/clean/" + id + ".png";
    r.rainy_path = "data/rainy/" + id + ".png";
    r.split = split_tag[i];
    r.seed = per.seed;
    save_png(clean, m.resolve(r.clean_path));
    save_png(rainy, m.resolve(r.rainy_path));
    m.records.push_back(std::move(r));
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace rdf
