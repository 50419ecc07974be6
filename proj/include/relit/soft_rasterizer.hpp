// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "relit/common.hpp"
#include "relit/image.hpp"
#include "relit/morphable_model.hpp"
#include "relit/sh_lighting.hpp"

namespace relit {

/// Pinhole or orthographic camera looking down -z. Screen y grows downward.
/// Depth used for aggregation is camera-space z (larger = nearer).
struct Camera {
  enum class Kind { kOrthographic, kPerspective };

  Kind kind = Kind::kOrthographic;
  int height = 64;
  int width = 64;
  /// Pixels per scene unit (orthographic) or focal length in pixels (perspective).
  double scale = 26.0;
  double cx = 32.0;
  double cy = 32.0;

  /// Orthographic camera framing [-extent, extent]^2 around the origin.
  static Camera orthographic(int height, int width, double extent = 1.2);
  static Camera perspective(int height, int width, double focal);

  void validate() const;
};

struct RasterConfig {
  /// Spatial softness in pixels^2.
  double sigma = 0.4096;
  /// Depth temperature in scene-depth units.
  double gamma_depth = 1e-2;
  Vec3 background_color = Vec3::Zero();
  /// Depth of the fixed background logit. Unset: one unit behind the farthest vertex.
  std::optional<double> background_depth;
  /// Exterior triangles whose influence falls below this are skipped.
  double min_influence = 1e-4;
  /// Worker count for the fragment pass; 0 means hardware concurrency.
  int threads = 1;

  /// sigma = 1e-4 * min(H, W)^2.
  static RasterConfig defaults_for(const Camera& camera);

  void validate() const;
};

/// One triangle's contribution to one pixel. Shading-independent.
struct Fragment {
  int triangle = 0;
  double weight = 0.0;
  std::array<int, 3> vertices{};
  /// Barycentrics used for attribute interpolation (perspective-correct, clamped onto the
  /// triangle for exterior pixels).
  std::array<double, 3> bary{};
  Vec3 normal = Vec3::UnitZ();
  Vec3 albedo = Vec3::Zero();
  ShBasis basis = ShBasis::Zero();
};

/// Aggregation weights of every pixel, stored CSR-style in fixed triangle-index order.
class FragmentBuffer {
 public:
  FragmentBuffer() = default;
  FragmentBuffer(int height, int width, const Vec3& background_color);

  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  [[nodiscard]] std::span<const Fragment> fragments(std::size_t pixel) const {
    return {fragments_.data() + offsets_[pixel], offsets_[pixel + 1] - offsets_[pixel]};
  }
  [[nodiscard]] double background_weight(std::size_t pixel) const {
    return background_weight_[pixel];
  }
  [[nodiscard]] const Vec3& background_color() const { return background_color_; }
  [[nodiscard]] std::size_t total_fragments() const { return fragments_.size(); }

  /// Appends the fragments of the next pixel; pixels must be pushed in row-major order.
  void push_pixel(std::span<const Fragment> frags, double background_weight);

 private:
  int height_ = 0;
  int width_ = 0;
  Vec3 background_color_ = Vec3::Zero();
  std::vector<std::size_t> offsets_{0};
  std::vector<Fragment> fragments_;
  std::vector<double> background_weight_;
};

/// Geometry pass: distance sigmoid times depth softmax against the background logit.
FragmentBuffer rasterize(const Mesh& mesh, const Camera& camera, const RasterConfig& cfg);

/// Aggregated colour before the final [0,1] clamp, H*W*3 interleaved.
std::vector<double> shade_unclamped(const FragmentBuffer& frags, const ShCoeffs& sh);

/// Aggregated and clamped image; coverage = 1 - background weight.
RasterImage shade(const FragmentBuffer& frags, const ShCoeffs& sh);

/// Vector-Jacobian product: given d(loss)/d(unclamped pixel) (H*W*3) returns d(loss)/d(sh).
ShMatrix backprop_sh(const FragmentBuffer& frags, const ShCoeffs& sh,
                     std::span<const double> pixel_grad);

RasterImage render(const Mesh& mesh, const Camera& camera, const ShCoeffs& sh,
                   const RasterConfig& cfg);

struct AlbedoJacobianEntry {
  int vertex = 0;
  /// d pixel[c] / d albedo[vertex][c]; cross-channel derivatives vanish.
  Vec3 coefficient = Vec3::Zero();
};

struct RenderGradients {
  RasterImage image;
  /// Pixel values before the [0,1] clamp, H*W*3.
  std::vector<double> unclamped;
  /// 1 where the [0,1] clamp changed the value, H*W*3.
  std::vector<std::uint8_t> clamp_mask;
  /// d unclamped(p, c) / d sh(c, k), H*W*3*9. The other channels' coefficients do not
  /// influence channel c.
  std::vector<double> d_sh;
  /// CSR albedo Jacobian: entries of pixel p live in [albedo_offsets[p], albedo_offsets[p+1]).
  std::vector<std::size_t> albedo_offsets;
  std::vector<AlbedoJacobianEntry> albedo_entries;

  /// Full 27-wide view: coefficient index j = channel * 9 + term.
  [[nodiscard]] double d_pixel_d_sh(std::size_t pixel, int channel, int j) const;
  [[nodiscard]] std::span<const AlbedoJacobianEntry> albedo_jacobian(std::size_t pixel) const {
    return {albedo_entries.data() + albedo_offsets[pixel],
            albedo_offsets[pixel + 1] - albedo_offsets[pixel]};
  }
};

/// Render plus analytic Jacobians of the unclamped pixels w.r.t. SH and per-vertex albedo.
/// The max(0, .) floor uses derivative 1 at exactly zero.
RenderGradients render_with_grads(const Mesh& mesh, const Camera& camera, const ShCoeffs& sh,
                                  const RasterConfig& cfg);

/// evaluate_model followed by render.
RasterImage render_guidance(const MorphableModel& model, const FaceCoefficients& coeffs,
                            const Camera& camera, const ShCoeffs& sh, const RasterConfig& cfg);

/// Weight-averaged surface attributes per pixel, normalised by coverage.
struct GeometryBuffer {
  NormalMap normals;
  std::vector<Vec3> albedo;
  std::vector<double> coverage;
};

/// Pixels with coverage >= min_coverage are marked valid in the normal map.
GeometryBuffer geometry_buffer(const FragmentBuffer& frags, double min_coverage = 0.99);

}  // namespace relit
