#include "markush/patchgen.hpp"

#include <algorithm>
#include <stdexcept>

namespace markush {

void PatchSpec::validate() const {
  if (patch_size < 2 || patch_size % 2 != 0)
    throw std::invalid_argument("patch_size must be even and >= 2");
  if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0))
    throw std::invalid_argument("overlap_threshold must be in (0, 1]");
}

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

std::vector<PatchRect> generate_grids(int img_w, int img_h, const PatchSpec& spec) {
  spec.validate();
  if (img_w < 1 || img_h < 1) throw std::invalid_argument("image dims must be >= 1");

  const int p = spec.patch_size;
  const int half = p / 2;
  std::vector<PatchRect> rects;

  const int a_cols = ceil_div(img_w, p);
  const int a_rows = ceil_div(img_h, p);
  for (int j = 0; j < a_rows; ++j)
    for (int i = 0; i < a_cols; ++i)
      rects.push_back({GridId::A, i, j, Rect{i * p, j * p, p, p}});

  const int b_cols = ceil_div(img_w + half, p);
  const int b_rows = ceil_div(img_h + half, p);
  for (int j = 0; j < b_rows; ++j)
    for (int i = 0; i < b_cols; ++i)
      rects.push_back({GridId::B, i, j, Rect{i * p - half, j * p - half, p, p}});

  return rects;
}

bool label_patch(const Rect& rect, const std::vector<AnnotationBox>& annotations,
                 double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw std::invalid_argument("threshold must be in (0, 1]");
  for (const auto& a : annotations) {
    const int ix0 = std::max(rect.x, a.x);
    const int iy0 = std::max(rect.y, a.y);
    const int ix1 = std::min(rect.x + rect.w, a.x + a.w);
    const int iy1 = std::min(rect.y + rect.h, a.y + a.h);
    if (ix0 >= ix1 || iy0 >= iy1) continue;
    const long long inter = static_cast<long long>(ix1 - ix0) * (iy1 - iy0);
    if (static_cast<double>(inter) > threshold * static_cast<double>(a.area())) return true;
  }
  return false;
}

std::vector<Patch> generate_patches(const AnnotatedImage& meta, const GrayImage& img,
                                    const PatchSpec& spec) {
  std::vector<Patch> patches;
  for (const auto& pr : generate_grids(img.width, img.height, spec)) {
    Patch patch;
    patch.source_image_id = meta.image_id;
    patch.grid = pr.grid;
    patch.ix = pr.ix;
    patch.iy = pr.iy;
    patch.origin_x = pr.rect.x;
    patch.origin_y = pr.rect.y;
    patch.pixels = crop(img, pr.rect, 255);
    patch.label = label_patch(pr.rect, meta.annotations, spec.overlap_threshold);
    patches.push_back(std::move(patch));
  }
  return patches;
}

std::vector<GrayImage> extract_templates(const AnnotatedImage& meta, const GrayImage& img,
                                         int template_size) {
  if (template_size < 1) throw std::invalid_argument("template_size must be >= 1");

  std::vector<GrayImage> templates;
  for (const auto& a : meta.annotations) {
    GrayImage canvas(template_size, template_size, 255);
    // Annotation content only; oversized boxes are center-cropped.
    const int copy_w = std::min(a.w, template_size);
    const int copy_h = std::min(a.h, template_size);
    const int src_x = a.x + (a.w - copy_w) / 2;
    const int src_y = a.y + (a.h - copy_h) / 2;
    const int dst_x = (template_size - copy_w) / 2;
    const int dst_y = (template_size - copy_h) / 2;
    for (int y = 0; y < copy_h; ++y) {
      for (int x = 0; x < copy_w; ++x) {
        const int sx = src_x + x;
        const int sy = src_y + y;
        if (sx >= 0 && sx < img.width && sy >= 0 && sy < img.height)
          canvas.at(dst_x + x, dst_y + y) = img.at(sx, sy);
      }
    }
    templates.push_back(std::move(canvas));
  }
  return templates;
}

}  // namespace markush
