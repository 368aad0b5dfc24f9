#include "clab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace clab {

std::string to_string(AugmentKind kind) {
  switch (kind) {
    case AugmentKind::None: return "none";
    case AugmentKind::RandomErasing: return "erasing";
    case AugmentKind::CutOut: return "cutout";
    case AugmentKind::CutMix: return "cutmix";
    case AugmentKind::MixUp: return "mixup";
  }
  return "unknown";
}

AugmentKind parse_augment_kind(const std::string& name) {
  if (name == "none") return AugmentKind::None;
  if (name == "erasing" || name == "random_erasing") return AugmentKind::RandomErasing;
  if (name == "cutout") return AugmentKind::CutOut;
  if (name == "cutmix") return AugmentKind::CutMix;
  if (name == "mixup") return AugmentKind::MixUp;
  throw std::invalid_argument("unknown augmentation '" + name +
                              "' (expected none|erasing|cutout|cutmix|mixup)");
}

void AugmentSpec::validate() const {
  if (!(erase_prob >= 0.0 && erase_prob <= 1.0))
    throw std::invalid_argument("AugmentSpec: erase probability must be in [0,1]");
  if (!(area_low > 0.0 && area_low <= area_high && area_high < 1.0))
    throw std::invalid_argument("AugmentSpec: area range must satisfy 0 < low <= high < 1");
  if (!(aspect_low > 0.0 && aspect_low <= aspect_high))
    throw std::invalid_argument("AugmentSpec: aspect range must satisfy 0 < low <= high");
  if (!(cutout_size >= 0.0 && cutout_size <= 1.0))
    throw std::invalid_argument("AugmentSpec: cutout size must be in [0,1]");
  if (!(mixup_alpha > 0.0)) throw std::invalid_argument("AugmentSpec: alpha must be positive");
}

ImageTensor crop_resize(const ImageTensor& img, const Rect& crop, std::size_t out_size, bool flip) {
  if (crop.h == 0 || crop.w == 0 || crop.y + crop.h > img.height() || crop.x + crop.w > img.width())
    throw std::invalid_argument("crop_resize: crop rectangle outside image " + img.shape_string());
  const std::size_t channels = img.channels();
  ImageTensor out(out_size, out_size, channels);
  const double sy = static_cast<double>(crop.h) / static_cast<double>(out_size);
  const double sx = static_cast<double>(crop.w) / static_cast<double>(out_size);
  for (std::size_t oy = 0; oy < out_size; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, static_cast<double>(crop.h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, crop.h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t ox = 0; ox < out_size; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, static_cast<double>(crop.w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, crop.w - 1);
      const double wx = fx - static_cast<double>(x0);
      const std::size_t dst_x = flip ? out_size - 1 - ox : ox;
      for (std::size_t c = 0; c < channels; ++c) {
        const double top = (1.0 - wx) * img.at(crop.y + y0, crop.x + x0, c) +
                           wx * img.at(crop.y + y0, crop.x + x1, c);
        const double bottom = (1.0 - wx) * img.at(crop.y + y1, crop.x + x0, c) +
                              wx * img.at(crop.y + y1, crop.x + x1, c);
        const double v = (1.0 - wy) * top + wy * bottom;
        out.at(oy, dst_x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

ImageTensor base_view(const ImageTensor& img, std::size_t out_size, RngStream rng) {
  const std::size_t side_max = std::min(img.height(), img.width());
  if (out_size == 0 || out_size > side_max)
    throw std::invalid_argument("base_view: out size " + std::to_string(out_size) +
                                " exceeds image " + img.shape_string());
  const double scale = rng.uniform(0.5, 1.0);
  const auto side = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(std::sqrt(scale) * static_cast<double>(side_max))), 1,
      side_max);
  Rect crop;
  crop.h = crop.w = side;
  crop.y = rng.uniform_index(img.height() - side + 1);
  crop.x = rng.uniform_index(img.width() - side + 1);
  const bool flip = rng.bernoulli(0.5);
  return crop_resize(img, crop, out_size, flip);
}

ImageTensor center_view(const ImageTensor& img, std::size_t out_size) {
  const std::size_t side = std::min(img.height(), img.width());
  if (out_size == 0 || out_size > side)
    throw std::invalid_argument("center_view: out size " + std::to_string(out_size) +
                                " exceeds image " + img.shape_string());
  Rect crop{(img.height() - side) / 2, (img.width() - side) / 2, side, side};
  return crop_resize(img, crop, out_size, false);
}

std::pair<ImageTensor, Rect> random_erasing(const ImageTensor& img, const AugmentSpec& spec,
                                            RngStream rng) {
  if (!rng.bernoulli(spec.erase_prob)) return {img, Rect{}};
  const double image_area = static_cast<double>(img.height() * img.width());
  const double log_lo = std::log(spec.aspect_low);
  const double log_hi = std::log(spec.aspect_high);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double area = rng.uniform(spec.area_low, spec.area_high) * image_area;
    const double aspect = std::exp(rng.uniform(log_lo, log_hi));
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(area * aspect)));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(area / aspect)));
    if (h == 0 || w == 0 || h >= img.height() || w >= img.width()) continue;
    Rect r{rng.uniform_index(img.height() - h + 1), rng.uniform_index(img.width() - w + 1), h, w};
    ImageTensor out = img;
    for (std::size_t y = r.y; y < r.y + r.h; ++y)
      for (std::size_t x = r.x; x < r.x + r.w; ++x)
        for (std::size_t c = 0; c < img.channels(); ++c)
          out.at(y, x, c) = static_cast<float>(rng.uniform());
    return {std::move(out), r};
  }
  return {img, Rect{}};
}

std::pair<ImageTensor, Rect> cutout_at(const ImageTensor& img, const AugmentSpec& spec,
                                       std::size_t cy, std::size_t cx) {
  const auto side = static_cast<std::size_t>(
      std::lround(spec.cutout_size * static_cast<double>(std::min(img.height(), img.width()))));
  if (side == 0) return {img, Rect{}};
  // Top-left corner in signed space, then clip.
  const long half = static_cast<long>(side / 2);
  const long y0 = std::max(0L, static_cast<long>(cy) - half);
  const long x0 = std::max(0L, static_cast<long>(cx) - half);
  const long y1 = std::min(static_cast<long>(img.height()), static_cast<long>(cy) - half + static_cast<long>(side));
  const long x1 = std::min(static_cast<long>(img.width()), static_cast<long>(cx) - half + static_cast<long>(side));
  if (y1 <= y0 || x1 <= x0) return {img, Rect{}};
  Rect r{static_cast<std::size_t>(y0), static_cast<std::size_t>(x0),
         static_cast<std::size_t>(y1 - y0), static_cast<std::size_t>(x1 - x0)};

  std::vector<float> fill(img.channels(), 0.0f);
  if (spec.cutout_fill == CutoutFill::Mean) {
    std::vector<double> sums(img.channels(), 0.0);
    for (std::size_t y = 0; y < img.height(); ++y)
      for (std::size_t x = 0; x < img.width(); ++x)
        for (std::size_t c = 0; c < img.channels(); ++c) sums[c] += img.at(y, x, c);
    const double n = static_cast<double>(img.height() * img.width());
    for (std::size_t c = 0; c < img.channels(); ++c)
      fill[c] = std::clamp(static_cast<float>(sums[c] / n), 0.0f, 1.0f);
  }
  ImageTensor out = img;
  for (std::size_t y = r.y; y < r.y + r.h; ++y)
    for (std::size_t x = r.x; x < r.x + r.w; ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) out.at(y, x, c) = fill[c];
  return {std::move(out), r};
}

std::pair<ImageTensor, Rect> cutout(const ImageTensor& img, const AugmentSpec& spec, RngStream rng) {
  const std::size_t cy = rng.uniform_index(img.height());
  const std::size_t cx = rng.uniform_index(img.width());
  return cutout_at(img, spec, cy, cx);
}

CutMixResult paste_patch(const ImageTensor& anchor, const ImageTensor& donor, const Rect& patch) {
  if (!anchor.same_shape(donor))
    throw std::invalid_argument("cutmix: anchor " + anchor.shape_string() + " and donor " +
                                donor.shape_string() + " differ in shape");
  if (patch.y + patch.h > anchor.height() || patch.x + patch.w > anchor.width())
    throw std::invalid_argument("cutmix: patch outside image");
  CutMixResult res{anchor, 1.0, patch};
  for (std::size_t y = patch.y; y < patch.y + patch.h; ++y)
    for (std::size_t x = patch.x; x < patch.x + patch.w; ++x)
      for (std::size_t c = 0; c < anchor.channels(); ++c) res.image.at(y, x, c) = donor.at(y, x, c);
  res.lambda = 1.0 - static_cast<double>(patch.area()) /
                         static_cast<double>(anchor.height() * anchor.width());
  return res;
}

double folded_beta(RngStream& rng, double alpha) {
  const double lam = rng.beta(alpha, alpha);
  return std::max(lam, 1.0 - lam);
}

CutMixResult cutmix(const ImageTensor& anchor, const ImageTensor& donor, RngStream rng, double alpha) {
  if (!anchor.same_shape(donor))
    throw std::invalid_argument("cutmix: anchor " + anchor.shape_string() + " and donor " +
                                donor.shape_string() + " differ in shape");
  const double lam0 = folded_beta(rng, alpha);
  const double ratio = std::sqrt(1.0 - lam0);
  const auto H = static_cast<long>(anchor.height());
  const auto W = static_cast<long>(anchor.width());
  const auto cut_h = static_cast<long>(static_cast<double>(H) * ratio);
  const auto cut_w = static_cast<long>(static_cast<double>(W) * ratio);
  const auto cy = static_cast<long>(rng.uniform_index(anchor.height()));
  const auto cx = static_cast<long>(rng.uniform_index(anchor.width()));
  const long y0 = std::clamp(cy - cut_h / 2, 0L, H);
  const long y1 = std::clamp(cy - cut_h / 2 + cut_h, 0L, H);
  const long x0 = std::clamp(cx - cut_w / 2, 0L, W);
  const long x1 = std::clamp(cx - cut_w / 2 + cut_w, 0L, W);
  Rect patch;
  if (y1 > y0 && x1 > x0)
    patch = Rect{static_cast<std::size_t>(y0), static_cast<std::size_t>(x0),
                 static_cast<std::size_t>(y1 - y0), static_cast<std::size_t>(x1 - x0)};
  return paste_patch(anchor, donor, patch);
}

ImageTensor mixup(const ImageTensor& anchor, const ImageTensor& donor, double lambda) {
  if (!anchor.same_shape(donor))
    throw std::invalid_argument("mixup: anchor " + anchor.shape_string() + " and donor " +
                                donor.shape_string() + " differ in shape");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("mixup: lambda must be in [0,1]");
  if (lambda == 1.0) return anchor;
  if (lambda == 0.0) return donor;
  ImageTensor out(anchor.height(), anchor.width(), anchor.channels());
  auto dst = out.data();
  const auto a = anchor.data();
  const auto b = donor.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double v = lambda * a[i] + (1.0 - lambda) * b[i];
    dst[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return out;
}

ViewSet make_views(const ImageTensor& anchor, std::span<const ImageTensor> donors, std::size_t num_views,
                   const AugmentSpec& spec, std::size_t out_size, RngStream rng,
                   std::size_t anchor_index) {
  if (num_views == 0) throw std::invalid_argument("make_views: need at least one view");
  const bool mixing = spec.kind == AugmentKind::CutMix || spec.kind == AugmentKind::MixUp;
  if (mixing && donors.empty())
    throw std::invalid_argument("make_views: " + to_string(spec.kind) + " requires a donor pool");
  spec.validate();

  ViewSet set;
  set.anchor_index = anchor_index;
  set.views.reserve(num_views);
  for (std::size_t v = 0; v < num_views; ++v) {
    const RngStream view_rng = rng.fork(v);
    ImageTensor base = base_view(anchor, out_size, view_rng.fork(0));
    double lambda = 1.0;
    std::vector<Rect> rects;
    switch (spec.kind) {
      case AugmentKind::None:
        break;
      case AugmentKind::RandomErasing: {
        auto [img, r] = random_erasing(base, spec, view_rng.fork(1));
        base = std::move(img);
        if (r.area() > 0) rects.push_back(r);
        break;
      }
      case AugmentKind::CutOut: {
        auto [img, r] = cutout(base, spec, view_rng.fork(1));
        base = std::move(img);
        if (r.area() > 0) rects.push_back(r);
        break;
      }
      case AugmentKind::CutMix:
      case AugmentKind::MixUp: {
        RngStream pick = view_rng.fork(2);
        const ImageTensor& donor_src = donors[pick.uniform_index(donors.size())];
        const ImageTensor donor = base_view(donor_src, out_size, view_rng.fork(3));
        if (spec.kind == AugmentKind::CutMix) {
          auto res = cutmix(base, donor, view_rng.fork(1), spec.mixup_alpha);
          base = std::move(res.image);
          lambda = res.lambda;
          if (res.patch.area() > 0) rects.push_back(res.patch);
        } else {
          RngStream lam_rng = view_rng.fork(1);
          lambda = folded_beta(lam_rng, spec.mixup_alpha);
          base = mixup(base, donor, lambda);
        }
        break;
      }
    }
    set.views.push_back(std::move(base));
    set.lambdas.push_back(lambda);
    set.mask_rects.push_back(std::move(rects));
  }
  return set;
}

}  // namespace clab
