#pragma once

#include <string>
#include <vector>

#include "markush/dataset.hpp"
#include "markush/image.hpp"

namespace markush {

struct PatchSpec {
  int patch_size = 224;            // square side; must be even so the half offset is integral
  double overlap_threshold = 0.5;  // in (0, 1]

  void validate() const;
};

enum class GridId : char { A = 'A', B = 'B' };

struct PatchRect {
  GridId grid = GridId::A;
  int ix = 0;  // grid cell column
  int iy = 0;  // grid cell row
  Rect rect;
};

/// The two tilings covering the image: grid A anchored at (0,0), grid B
/// offset by (-P/2, -P/2). Emitted grid A row-major, then grid B row-major.
/// Every source pixel is covered by exactly one rect of each grid.
std::vector<PatchRect> generate_grids(int img_w, int img_h, const PatchSpec& spec);

/// True iff some annotation has strictly more than `threshold` of its area
/// inside `rect`.
bool label_patch(const Rect& rect, const std::vector<AnnotationBox>& annotations,
                 double threshold);

struct Patch {
  std::string source_image_id;
  GridId grid = GridId::A;
  int ix = 0;
  int iy = 0;
  int origin_x = 0;  // source coordinates; grid B origins may be negative
  int origin_y = 0;
  GrayImage pixels;
  bool label = false;
};

/// White-filled crops for every grid cell, labeled with the overlap rule.
std::vector<Patch> generate_patches(const AnnotatedImage& meta, const GrayImage& img,
                                    const PatchSpec& spec);

/// One template per annotation: the annotation's content centered on a white
/// canvas, everything outside the annotation box forced to white. Boxes
/// larger than the canvas are center-cropped.
std::vector<GrayImage> extract_templates(const AnnotatedImage& meta, const GrayImage& img,
                                         int template_size);

}  // namespace markush
