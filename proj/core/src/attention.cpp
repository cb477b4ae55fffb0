#include "rdf/attention.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rdf/autodiff.hpp"

namespace rdf {

using ag::Var;

PatchMatrix unfold_patches(const Tensor& feat, int patch, int stride) {
  Var rows = ag::unfold(Var::leaf(feat), patch, stride);
  PatchMatrix m;
  m.rows = rows.val();
  m.geom.patch = patch;
  m.geom.stride = stride;
  m.geom.grid_h = (feat.dim(1) - patch) / stride + 1;
  m.geom.grid_w = (feat.dim(2) - patch) / stride + 1;
  return m;
}

Tensor fold_patches(const PatchMatrix& m, int channels, int h, int w) {
  if (m.geom.patch != m.geom.stride)
    throw std::invalid_argument("fold_patches: stride must equal patch");
  return ag::fold(Var::leaf(m.rows), channels, h, w, m.geom.patch).val();
}

Tensor relevance(const PatchMatrix& q, const PatchMatrix& k) {
  if (q.rows.dim(1) != k.rows.dim(1))
    throw std::invalid_argument("relevance: patch dimensionality mismatch");
  Var qn = ag::normalize_rows(Var::leaf(q.rows));
  Var kn = ag::normalize_rows(Var::leaf(k.rows));
  return ag::matmul_nt(qn, kn).val();
}

AttentionResult attend(const Tensor& rel, int grid_h, int grid_w) {
  if (rel.rank() != 2 || rel.numel() == 0) throw std::invalid_argument("attend: empty relevance");
  if (static_cast<int64_t>(grid_h) * grid_w != rel.dim(0))
    throw std::invalid_argument("attend: grid does not match relevance rows");
  auto [s, h] = ag::row_max(Var::leaf(rel));
  AttentionResult r;
  r.grid_h = grid_h;
  r.grid_w = grid_w;
  r.hard = h;
  r.soft.assign(s.val().data(), s.val().data() + s.val().numel());
  return r;
}

AttentionResult attend(const Tensor& rel) { return attend(rel, rel.dim(0), 1); }

TensorPyramid gather_reference(const TensorPyramid& value, const AttentionResult& attn,
                               int patch_l3) {
  TensorPyramid out;
  const Tensor* levels[3] = {&value.level1, &value.level2, &value.level3};
  Tensor* outs[3] = {&out.level1, &out.level2, &out.level3};
  const int patches[3] = {4 * patch_l3, 2 * patch_l3, patch_l3};
  for (int i = 0; i < 3; ++i) {
    const Tensor& v = *levels[i];
    const int p = patches[i];
    if (v.dim(1) % p || v.dim(2) % p)
      throw std::invalid_argument("gather_reference: level dims incompatible with patch size");
    const int gh = v.dim(1) / p, gw = v.dim(2) / p;
    if (gh != attn.grid_h || gw != attn.grid_w)
      throw std::invalid_argument("gather_reference: attention grid does not match level grid");
    Var rows = ag::unfold(Var::leaf(v), p, p);
    Var picked = ag::gather_rows(rows, attn.hard);
    *outs[i] = ag::fold(picked, v.dim(0), v.dim(1), v.dim(2), p).val();
  }
  return out;
}

void save_attention_json(const AttentionResult& attn, const std::filesystem::path& file) {
  nlohmann::json j;
  j["grid"] = {attn.grid_h, attn.grid_w};
  j["H"] = attn.hard;
  j["S"] = attn.soft;
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write attention sidecar: " + file.string());
  out << j.dump() << "\n";
}

AttentionResult load_attention_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open attention sidecar: " + file.string());
  nlohmann::json j = nlohmann::json::parse(in);
  AttentionResult r;
  r.grid_h = j.at("grid")[0].get<int>();
  r.grid_w = j.at("grid")[1].get<int>();
  r.hard = j.at("H").get<std::vector<int>>();
  r.soft = j.at("S").get<std::vector<float>>();
  return r;
}

}  // namespace rdf
