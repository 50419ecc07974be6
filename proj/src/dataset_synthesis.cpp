// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/dataset_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace relit {

namespace {

double unit_uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

ScalarMap box_mean3(const ScalarMap& in) {
  ScalarMap out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      double sum = 0.0;
      int count = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy;
          const int xx = x + dx;
          if (yy >= 0 && yy < in.height && xx >= 0 && xx < in.width) {
            sum += in.at(yy, xx);
            ++count;
          }
        }
      }
      out.at(y, x) = sum / count;
    }
  }
  return out;
}

}  // namespace

void DegradeConfig::validate() const {
  if (!(lambda_lo >= 1.0 && lambda_lo <= lambda_hi && lambda_hi <= 2.0)) {
    throw InputError("lambda range must satisfy 1 <= lo <= hi <= 2");
  }
  if (ideal_radius && !(*ideal_radius >= 0.0)) {
    throw InputError("ideal_radius must be non-negative");
  }
  if (!(blur_max_sigma >= 0.0) || !(noise_max_sigma >= 0.0)) {
    throw InputError("blur and noise strengths must be non-negative");
  }
}

double DegradeConfig::resolved_radius(const ShCoeffs& mean) const {
  return ideal_radius ? *ideal_radius : 0.1 * mean.coeffs.norm();
}

Json DegradeConfig::to_json() const {
  Json doc;
  doc["lambda_sh_range"] = {lambda_lo, lambda_hi};
  doc["ideal_radius"] = ideal_radius ? Json(*ideal_radius) : Json(nullptr);
  doc["blur_max_sigma"] = blur_max_sigma;
  doc["noise_max_sigma"] = noise_max_sigma;
  doc["seed"] = seed;
  return doc;
}

DegradeConfig DegradeConfig::from_json(const Json& doc) {
  DegradeConfig cfg;
  try {
    const auto range = doc.at("lambda_sh_range").get<std::vector<double>>();
    if (range.size() != 2) {
      throw InputError("lambda_sh_range must hold [lo, hi]");
    }
    cfg.lambda_lo = range[0];
    cfg.lambda_hi = range[1];
    if (!doc.at("ideal_radius").is_null()) {
      cfg.ideal_radius = doc.at("ideal_radius").get<double>();
    }
    cfg.blur_max_sigma = doc.at("blur_max_sigma").get<double>();
    cfg.noise_max_sigma = doc.at("noise_max_sigma").get<double>();
    cfg.seed = doc.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw InputError(std::string("degradation config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ShCoeffs mean_sh(std::span<const ShCoeffs> targets) {
  if (targets.empty()) {
    throw InputError("mean_sh needs at least one lighting");
  }
  ShMatrix sum = ShMatrix::Zero();
  for (const ShCoeffs& sh : targets) {
    sum += sh.coeffs;
  }
  return ShCoeffs(sum / static_cast<double>(targets.size()));
}

DegradedLighting degrade_sh(const ShCoeffs& sh_target, const ShCoeffs& mean,
                            const DegradeConfig& cfg, Rng& rng) {
  cfg.validate();
  const double radius = cfg.resolved_radius(mean);

  // Uniform point in the 27-dimensional ball: Gaussian direction, radius ~ r * U^(1/27).
  std::normal_distribution<double> normal(0.0, 1.0);
  ShMatrix direction;
  for (int i = 0; i < kShCount; ++i) {
    direction(i / kShTerms, i % kShTerms) = normal(rng);
  }
  const double len = direction.norm();
  if (len > 0.0) {
    direction /= len;
  }
  const double r = radius * std::pow(unit_uniform(rng), 1.0 / kShCount);

  DegradedLighting out;
  out.ideal_point = ShCoeffs(mean.coeffs + r * direction);
  out.lambda_used = cfg.lambda_lo + (cfg.lambda_hi - cfg.lambda_lo) * unit_uniform(rng);
  out.sh_input = ShCoeffs(sh_target.coeffs +
                          out.lambda_used * (sh_target.coeffs - out.ideal_point.coeffs));
  return out;
}

RasterImage reshade_image(const RasterImage& target, const NormalMap& normals,
                          const ShCoeffs& sh_target, const ShCoeffs& sh_input) {
  if (target.height() != normals.height || target.width() != normals.width) {
    throw InputError("reshade_image: image and normal map sizes differ");
  }
  RasterImage out = target;
  const Vec3 white = Vec3::Ones();
  for (std::size_t p = 0; p < target.pixel_count(); ++p) {
    if (normals.mask[p] == 0) {
      continue;
    }
    const Vec3 s_in = shade(normals.normals[p], white, sh_input);
    const Vec3 s_tgt = shade(normals.normals[p], white, sh_target);
    Vec3 rgb = target.pixel(p);
    for (int c = 0; c < 3; ++c) {
      const double ratio = s_in[c] == s_tgt[c] ? 1.0 : s_in[c] / std::max(s_tgt[c], kShadingFloor);
      rgb[c] = std::clamp(rgb[c] * ratio, 0.0, 1.0);
    }
    out.set_pixel(p, rgb);
  }
  return out;
}

ScalarMap shading_map(const NormalMap& normals, const ShCoeffs& sh) {
  ScalarMap map(normals.height, normals.width, 1.0);
  for (std::size_t p = 0; p < map.values.size(); ++p) {
    if (normals.mask[p] != 0) {
      map.values[p] = shade(normals.normals[p], Vec3::Ones(), sh).mean();
    }
  }
  return map;
}

RasterImage apply_darkness_degradation(const RasterImage& image, const ScalarMap& shading,
                                       const DegradeConfig& cfg, Rng& rng) {
  cfg.validate();
  if (shading.height != image.height() || shading.width != image.width()) {
    throw InputError("shading map and image sizes differ");
  }
  for (double s : shading.values) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw InputError("shading map values must lie in [0,1]");
    }
  }
  const int h = image.height();
  const int w = image.width();
  const ScalarMap local = box_mean3(shading);

  RasterImage blurred = image;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sigma = cfg.blur_max_sigma * (1.0 - local.at(y, x));
      if (!(sigma > 1e-12)) {
        continue;
      }
      const int radius = static_cast<int>(std::ceil(3.0 * sigma));
      Vec3 acc = Vec3::Zero();
      double norm = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) {
          continue;
        }
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) {
            continue;
          }
          const double k = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
          acc += k * image.pixel(image.index(yy, xx));
          norm += k;
        }
      }
      blurred.set_pixel(blurred.index(y, x), acc / norm);
    }
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t p = 0; p < blurred.pixel_count(); ++p) {
    const double sigma = cfg.noise_max_sigma * (1.0 - shading.values[p]);
    for (int c = 0; c < 3; ++c) {
      const double z = normal(rng);
      double& v = blurred.data()[3 * p + c];
      v = std::clamp(v + sigma * z, 0.0, 1.0);
    }
  }
  return blurred;
}

TrainingPair build_pair_from_image(const RasterImage& target, const NormalMap& normals,
                                   const ShCoeffs& sh_target, const ShCoeffs& mean,
                                   const DegradeConfig& cfg, Rng& rng) {
  TrainingPair pair;
  pair.target = target;
  pair.sh_target = sh_target;
  const DegradedLighting lit = degrade_sh(sh_target, mean, cfg, rng);
  pair.sh_input = lit.sh_input;
  const RasterImage reshaded = reshade_image(target, normals, sh_target, lit.sh_input);
  pair.input = apply_darkness_degradation(reshaded, shading_map(normals, lit.sh_input), cfg, rng);
  pair.provenance.seed = cfg.seed;
  pair.provenance.config = cfg;
  pair.provenance.lambda_used = lit.lambda_used;
  pair.provenance.ideal_point = lit.ideal_point;
  pair.provenance.resolved_radius = cfg.resolved_radius(mean);
  return pair;
}

TrainingPair build_pair(const MorphableModel& model, const FaceCoefficients& coeffs,
                        const Camera& camera, const RasterConfig& raster,
                        const ShCoeffs& sh_target, const ShCoeffs& mean,
                        const DegradeConfig& cfg, Rng& rng) {
  const FragmentBuffer frags = rasterize(evaluate_model(model, coeffs), camera, raster);
  const RasterImage target = shade(frags, sh_target);
  const GeometryBuffer g = geometry_buffer(frags, 0.5);
  return build_pair_from_image(target, g.normals, sh_target, mean, cfg, rng);
}

bool passes_brightness_filter(const TrainingPair& pair, const NormalMap& normals,
                              double min_brightness) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t p = 0; p < pair.input.pixel_count(); ++p) {
    if (normals.mask[p] != 0) {
      sum += pair.input.pixel(p).mean();
      ++count;
    }
  }
  return count > 0 && sum / static_cast<double>(count) >= min_brightness;
}

}  // namespace relit
