#include "rdf/retrieval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace rdf {

using nlohmann::json;

namespace {

constexpr int kHashRes = 32;
constexpr int kBlock = 8;

// orthonormal DCT-II basis, row u: c(u) * cos((2x+1) u pi / 2N)
const std::array<std::array<double, kHashRes>, kHashRes>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, kHashRes>, kHashRes> b{};
    const double n = kHashRes;
    for (int u = 0; u < kHashRes; ++u) {
      const double cu = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (int x = 0; x < kHashRes; ++x)
        b[u][x] = cu * std::cos((2.0 * x + 1.0) * u * 3.14159265358979323846 / (2.0 * n));
    }
    return b;
  }();
  return basis;
}

}  // namespace

PerceptualHash perceptual_hash(const Image& img) {
  if (img.rank() != 3 || height(img) < 1 || width(img) < 1)
    throw std::invalid_argument("perceptual_hash: empty image");
  Image small = resize(to_gray(img), kHashRes, kHashRes);

  // 2-D DCT: Y = B * X * B^T, only the first kBlock+1 rows/cols are needed
  const auto& b = dct_basis();
  std::array<std::array<double, kHashRes>, kBlock + 1> rows{};  // B * X
  for (int u = 0; u <= kBlock; ++u)
    for (int x = 0; x < kHashRes; ++x) {
      double s = 0.0;
      for (int y = 0; y < kHashRes; ++y) s += b[u][y] * small.at(0, y, x);
      rows[u][x] = s;
    }
  auto coeff = [&](int u, int v) {
    double s = 0.0;
    for (int x = 0; x < kHashRes; ++x) s += rows[u][x] * b[v][x];
    return s;
  };

  // 8x8 low-frequency block minus DC, plus (0,8) to keep 64 values
  std::array<double, 64> vals{};
  int n = 0;
  for (int u = 0; u < kBlock; ++u)
    for (int v = 0; v < kBlock; ++v) {
      if (u == 0 && v == 0) continue;
      vals[n++] = coeff(u, v);
    }
  vals[n++] = coeff(0, kBlock);

  std::array<double, 64> sorted = vals;
  std::nth_element(sorted.begin(), sorted.begin() + 31, sorted.end());
  const double lo = sorted[31];
  std::nth_element(sorted.begin(), sorted.begin() + 32, sorted.end());
  const double median = 0.5 * (lo + sorted[32]);

  PerceptualHash h;
  for (int i = 0; i < 64; ++i)
    if (vals[i] > median) h.bits |= 1ull << i;
  return h;
}

RetrievalIndex build_index(const DatasetManifest& manifest, const std::string& split) {
  RetrievalIndex idx;
  idx.root = manifest.root;
  for (const auto& r : manifest.split(split)) {
    const auto path = manifest.resolve(r.clean_path);
    if (!std::filesystem::exists(path))
      throw std::runtime_error("build_index: missing file " + path.string());
    idx.entries.push_back({r.id, perceptual_hash(load_png(path)), r.clean_path});
  }
  return idx;
}

std::string hash_to_hex(PerceptualHash h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.bits));
  return buf;
}

PerceptualHash hash_from_hex(const std::string& hex) {
  if (hex.size() != 16) throw std::invalid_argument("hash_from_hex: need 16 hex chars");
  return {std::stoull(hex, nullptr, 16)};
}

void save_index(const RetrievalIndex& index, const std::filesystem::path& file) {
  json j;
  j["version"] = index.version;
  j["entries"] = json::array();
  for (const auto& e : index.entries)
    j["entries"].push_back({{"id", e.id}, {"hash_hex", hash_to_hex(e.hash)}, {"path", e.clean_path}});
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write index: " + file.string());
  out << j.dump(2) << "\n";
}

RetrievalIndex load_index(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open index: " + file.string());
  json j = json::parse(in);
  RetrievalIndex idx;
  idx.version = j.at("version").get<int>();
  idx.root = file.parent_path();
  for (const auto& ej : j.at("entries"))
    idx.entries.push_back({ej.at("id").get<std::string>(),
                           hash_from_hex(ej.at("hash_hex").get<std::string>()),
                           ej.at("path").get<std::string>()});
  return idx;
}

RetrievalHit nearest_reference(const RetrievalIndex& index, const Image& query,
                               const std::optional<std::string>& exclude_id) {
  const PerceptualHash qh = perceptual_hash(query);
  const IndexEntry* best = nullptr;
  int best_d = 65;
  for (const auto& e : index.entries) {
    if (exclude_id && e.id == *exclude_id) continue;
    const int d = hamming(qh, e.hash);
    if (d < best_d || (d == best_d && best && e.id < best->id)) {
      best = &e;
      best_d = d;
    }
  }
  if (!best)
    throw std::runtime_error("nearest_reference: index empty" +
                             std::string(exclude_id ? " after excluding " + *exclude_id : ""));
  return {best->id, best_d, load_png(index.root / best->clean_path)};
}

}  // namespace rdf
