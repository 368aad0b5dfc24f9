#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clab/rng.hpp"
#include "clab/tensor.hpp"

namespace clab {

enum class AugmentKind { None, RandomErasing, CutOut, CutMix, MixUp };
enum class CutoutFill { Zero, Mean };

std::string to_string(AugmentKind kind);
// Accepts the CLI spellings: none, erasing, cutout, cutmix, mixup.
AugmentKind parse_augment_kind(const std::string& name);

struct AugmentSpec {
  AugmentKind kind = AugmentKind::None;
  double erase_prob = 0.5;
  double area_low = 0.02;
  double area_high = 0.33;
  double aspect_low = 0.3;
  double aspect_high = 3.33;
  double cutout_size = 0.5;  // fraction of min(H, W)
  CutoutFill cutout_fill = CutoutFill::Zero;
  double mixup_alpha = 1.0;  // Beta(alpha, alpha) for MixUp and CutMix

  // Throws std::invalid_argument on violated invariants.
  void validate() const;
};

struct ViewSet {
  std::size_t anchor_index = 0;
  std::vector<ImageTensor> views;
  std::vector<double> lambdas;               // 1 when the view was not mixed
  std::vector<std::vector<Rect>> mask_rects;  // per view; empty when nothing was masked

  bool operator==(const ViewSet&) const = default;
};

// Random-area crop (scale uniform in [0.5, 1] of the source area, square,
// uniform position), bilinear resize to out_size x out_size, then a horizontal
// flip with probability 0.5.
ImageTensor base_view(const ImageTensor& img, std::size_t out_size, RngStream rng);

// Deterministic kernel behind base_view: crop `crop` then resize and flip.
ImageTensor crop_resize(const ImageTensor& img, const Rect& crop, std::size_t out_size,
                        bool flip = false);

// Central min(H, W) square resized to out_size. Used to encode anchors.
ImageTensor center_view(const ImageTensor& img, std::size_t out_size);

std::pair<ImageTensor, Rect> random_erasing(const ImageTensor& img, const AugmentSpec& spec,
                                            RngStream rng);

std::pair<ImageTensor, Rect> cutout(const ImageTensor& img, const AugmentSpec& spec, RngStream rng);
// Square of the spec's size centered at (cy, cx), clipped to the image.
std::pair<ImageTensor, Rect> cutout_at(const ImageTensor& img, const AugmentSpec& spec,
                                       std::size_t cy, std::size_t cx);

struct CutMixResult {
  ImageTensor image;
  double lambda = 1.0;
  Rect patch;
};

CutMixResult cutmix(const ImageTensor& anchor, const ImageTensor& donor, RngStream rng,
                    double alpha = 1.0);
// Pastes donor[patch] onto anchor; lambda = 1 - patch.area() / (H * W).
CutMixResult paste_patch(const ImageTensor& anchor, const ImageTensor& donor, const Rect& patch);

ImageTensor mixup(const ImageTensor& anchor, const ImageTensor& donor, double lambda);

// Beta(alpha, alpha) folded to [0.5, 1] so the anchor dominates.
double folded_beta(RngStream& rng, double alpha);

// View v draws from rng.fork(v); inside it fork(0) drives the base view,
// fork(1) the augmentation, fork(2) the donor choice, fork(3) the donor's
// own base view.
ViewSet make_views(const ImageTensor& anchor, std::span<const ImageTensor> donors, std::size_t num_views,
                   const AugmentSpec& spec, std::size_t out_size, RngStream rng,
                   std::size_t anchor_index = 0);

}  // namespace clab
