// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/soft_rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

namespace relit {

namespace {

constexpr double kNearPlane = 1e-6;

struct ScreenTriangle {
  int index = 0;
  std::array<int, 3> v{};
  std::array<Eigen::Vector2d, 3> p{};
  std::array<double, 3> depth{};
  // 1 / w per vertex for perspective-correct interpolation (all 1 for orthographic).
  std::array<double, 3> inv_w{};
  double area2 = 0.0;  // signed, twice the screen area
  double min_x = 0.0, max_x = 0.0, min_y = 0.0, max_y = 0.0;
};

double log_sigmoid(double t) {
  return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
}

// Squared distance from q to segment ab, and the segment parameter of the closest point.
double segment_distance2(const Eigen::Vector2d& q, const Eigen::Vector2d& a,
                         const Eigen::Vector2d& b, double* t_out) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (q - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  *t_out = t;
  return (a + t * ab - q).squaredNorm();
}

std::vector<ScreenTriangle> setup_triangles(const Mesh& mesh, const Camera& camera,
                                            double influence_radius) {
  std::vector<Eigen::Vector2d> screen(mesh.num_vertices());
  std::vector<double> inv_w(mesh.num_vertices(), 1.0);
  std::vector<bool> visible(mesh.num_vertices(), true);
  for (int i = 0; i < mesh.num_vertices(); ++i) {
    const Vec3 p = mesh.positions.row(i);
    if (camera.kind == Camera::Kind::kOrthographic) {
      screen[i] = {camera.cx + camera.scale * p.x(), camera.cy - camera.scale * p.y()};
    } else {
      const double w = -p.z();
      if (w <= kNearPlane) {
        visible[i] = false;
        continue;
      }
      screen[i] = {camera.cx + camera.scale * p.x() / w, camera.cy - camera.scale * p.y() / w};
      inv_w[i] = 1.0 / w;
    }
  }

  std::vector<ScreenTriangle> tris;
  tris.reserve(mesh.num_faces());
  for (int f = 0; f < mesh.num_faces(); ++f) {
    ScreenTriangle t;
    t.index = f;
    bool ok = true;
    for (int k = 0; k < 3; ++k) {
      t.v[k] = mesh.faces(f, k);
      ok = ok && visible[t.v[k]];
      t.p[k] = screen[t.v[k]];
      t.depth[k] = mesh.positions(t.v[k], 2);
      t.inv_w[k] = inv_w[t.v[k]];
    }
    if (!ok) {
      continue;
    }
    const Eigen::Vector2d e1 = t.p[1] - t.p[0];
    const Eigen::Vector2d e2 = t.p[2] - t.p[0];
    t.area2 = e1.x() * e2.y() - e1.y() * e2.x();
    if (std::abs(t.area2) < 1e-12) {
      continue;
    }
    t.min_x = std::min({t.p[0].x(), t.p[1].x(), t.p[2].x()}) - influence_radius;
    t.max_x = std::max({t.p[0].x(), t.p[1].x(), t.p[2].x()}) + influence_radius;
    t.min_y = std::min({t.p[0].y(), t.p[1].y(), t.p[2].y()}) - influence_radius;
    t.max_y = std::max({t.p[0].y(), t.p[1].y(), t.p[2].y()}) + influence_radius;
    tris.push_back(t);
  }
  return tris;
}

struct Candidate {
  Fragment fragment;
  double logit = 0.0;
};

// Evaluates one pixel against every candidate triangle in index order.
void rasterize_pixel(const Mesh& mesh, const std::vector<ScreenTriangle>& tris,
                     const RasterConfig& cfg, double background_logit, double cutoff2,
                     const Eigen::Vector2d& q, std::vector<Candidate>& scratch,
                     std::vector<Fragment>& out, double& background_weight) {
  scratch.clear();
  for (const ScreenTriangle& t : tris) {
    if (q.x() < t.min_x || q.x() > t.max_x || q.y() < t.min_y || q.y() > t.max_y) {
      continue;
    }
    // Screen-space barycentrics.
    std::array<double, 3> b{};
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector2d& a = t.p[(k + 1) % 3];
      const Eigen::Vector2d& c = t.p[(k + 2) % 3];
      b[k] = ((c.x() - a.x()) * (q.y() - a.y()) - (c.y() - a.y()) * (q.x() - a.x())) / t.area2;
    }
    const bool inside = b[0] >= 0.0 && b[1] >= 0.0 && b[2] >= 0.0;

    double best = std::numeric_limits<double>::infinity();
    int best_edge = 0;
    double best_t = 0.0;
    for (int k = 0; k < 3; ++k) {
      double s = 0.0;
      const double d2 = segment_distance2(q, t.p[k], t.p[(k + 1) % 3], &s);
      if (d2 < best) {
        best = d2;
        best_edge = k;
        best_t = s;
      }
    }
    if (!inside && best > cutoff2) {
      continue;
    }
    if (!inside) {
      b = {0.0, 0.0, 0.0};
      b[best_edge] = 1.0 - best_t;
      b[(best_edge + 1) % 3] = best_t;
    }
    // Perspective-correct attribute weights.
    double norm = 0.0;
    for (int k = 0; k < 3; ++k) {
      b[k] *= t.inv_w[k];
      norm += b[k];
    }
    for (double& bk : b) {
      bk /= norm;
    }

    Candidate cand;
    Fragment& frag = cand.fragment;
    frag.triangle = t.index;
    frag.vertices = t.v;
    frag.bary = b;
    Vec3 n = Vec3::Zero();
    Vec3 albedo = Vec3::Zero();
    double depth = 0.0;
    for (int k = 0; k < 3; ++k) {
      n += b[k] * mesh.normals.row(t.v[k]).transpose();
      albedo += b[k] * mesh.albedo.row(t.v[k]).transpose();
      depth += b[k] * t.depth[k];
    }
    const double len = n.norm();
    if (len > 1e-12) {
      n /= len;
    } else {
      const Vec3 p0 = mesh.positions.row(t.v[0]);
      const Vec3 p1 = mesh.positions.row(t.v[1]);
      const Vec3 p2 = mesh.positions.row(t.v[2]);
      n = (p1 - p0).cross(p2 - p0).normalized();
    }
    frag.normal = n;
    frag.albedo = albedo;
    frag.basis = sh_basis_unchecked(n);

    const double signed_d2 = inside ? best : -best;
    cand.logit = log_sigmoid(signed_d2 / cfg.sigma) + depth / cfg.gamma_depth;
    scratch.push_back(cand);
  }

  double max_logit = background_logit;
  for (const Candidate& c : scratch) {
    max_logit = std::max(max_logit, c.logit);
  }
  double total = std::exp(background_logit - max_logit);
  for (Candidate& c : scratch) {
    c.fragment.weight = std::exp(c.logit - max_logit);
    total += c.fragment.weight;
  }
  out.clear();
  for (Candidate& c : scratch) {
    c.fragment.weight /= total;
    out.push_back(c.fragment);
  }
  background_weight = std::exp(background_logit - max_logit) / total;
}

template <typename Fn>
void parallel_rows(int height, int threads, Fn&& fn) {
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, std::max(1, height));
  if (workers == 1) {
    fn(0, height);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int begin = height * w / workers;
    const int end = height * (w + 1) / workers;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace

Camera Camera::orthographic(int height, int width, double extent) {
  Camera cam;
  cam.kind = Kind::kOrthographic;
  cam.height = height;
  cam.width = width;
  cam.scale = 0.5 * std::min(height, width) / extent;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

Camera Camera::perspective(int height, int width, double focal) {
  Camera cam;
  cam.kind = Kind::kPerspective;
  cam.height = height;
  cam.width = width;
  cam.scale = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

void Camera::validate() const {
  if (height < 1 || width < 1) {
    throw InputError("camera image size must be at least 1x1, got " + std::to_string(height) +
                     "x" + std::to_string(width));
  }
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw InputError("camera scale/focal length must be positive");
  }
}

RasterConfig RasterConfig::defaults_for(const Camera& camera) {
  RasterConfig cfg;
  const double side = std::min(camera.height, camera.width);
  cfg.sigma = 1e-4 * side * side;
  return cfg;
}

void RasterConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InputError("raster sigma must be positive");
  }
  if (!(gamma_depth > 0.0) || !std::isfinite(gamma_depth)) {
    throw InputError("raster gamma_depth must be positive");
  }
  if (background_color.minCoeff() < 0.0 || background_color.maxCoeff() > 1.0) {
    throw InputError("background colour must lie in [0,1]^3");
  }
  if (!(min_influence > 0.0 && min_influence < 0.5)) {
    throw InputError("min_influence must lie in (0, 0.5)");
  }
}

FragmentBuffer::FragmentBuffer(int height, int width, const Vec3& background_color)
    : height_(height), width_(width), background_color_(background_color) {
  offsets_.reserve(pixel_count() + 1);
  background_weight_.reserve(pixel_count());
}

void FragmentBuffer::push_pixel(std::span<const Fragment> frags, double background_weight) {
  fragments_.insert(fragments_.end(), frags.begin(), frags.end());
  offsets_.push_back(fragments_.size());
  background_weight_.push_back(background_weight);
}

FragmentBuffer rasterize(const Mesh& mesh, const Camera& camera, const RasterConfig& cfg) {
  camera.validate();
  cfg.validate();
  FragmentBuffer buffer(camera.height, camera.width, cfg.background_color);

  // Exterior influence sigmoid(-d2/sigma) >= eps  <=>  d2 <= sigma * ln((1 - eps) / eps).
  const double cutoff2 = cfg.sigma * std::log((1.0 - cfg.min_influence) / cfg.min_influence);
  const std::vector<ScreenTriangle> tris = setup_triangles(mesh, camera, std::sqrt(cutoff2));

  double background_depth = 0.0;
  if (cfg.background_depth) {
    background_depth = *cfg.background_depth;
  } else if (mesh.num_vertices() > 0) {
    background_depth = mesh.positions.col(2).minCoeff() - 1.0;
  }
  const double background_logit = background_depth / cfg.gamma_depth;

  const int h = camera.height;
  const int w = camera.width;
  std::vector<std::vector<Fragment>> pixel_frags(static_cast<std::size_t>(h) * w);
  std::vector<double> background(static_cast<std::size_t>(h) * w, 1.0);

  parallel_rows(h, cfg.threads, [&](int row_begin, int row_end) {
    std::vector<Candidate> scratch;
    for (int y = row_begin; y < row_end; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        const Eigen::Vector2d q(x + 0.5, y + 0.5);
        rasterize_pixel(mesh, tris, cfg, background_logit, cutoff2, q, scratch, pixel_frags[p],
                        background[p]);
      }
    }
  });

  for (std::size_t p = 0; p < pixel_frags.size(); ++p) {
    buffer.push_pixel(pixel_frags[p], background[p]);
  }
  return buffer;
}

std::vector<double> shade_unclamped(const FragmentBuffer& frags, const ShCoeffs& sh) {
  std::vector<double> out(3 * frags.pixel_count());
  for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
    Vec3 color = frags.background_weight(p) * frags.background_color();
    for (const Fragment& f : frags.fragments(p)) {
      color += f.weight * f.albedo.cwiseProduct(shade_irradiance(f.basis, sh));
    }
    out[3 * p] = color.x();
    out[3 * p + 1] = color.y();
    out[3 * p + 2] = color.z();
  }
  return out;
}

RasterImage shade(const FragmentBuffer& frags, const ShCoeffs& sh) {
  RasterImage image(frags.height(), frags.width());
  const std::vector<double> raw = shade_unclamped(frags, sh);
  image.data() = raw;
  for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
    image.coverage()[p] = 1.0 - frags.background_weight(p);
  }
  image.clamp_unit();
  return image;
}

ShMatrix backprop_sh(const FragmentBuffer& frags, const ShCoeffs& sh,
                     std::span<const double> pixel_grad) {
  if (pixel_grad.size() != 3 * frags.pixel_count()) {
    throw InputError("backprop_sh: gradient buffer has " + std::to_string(pixel_grad.size()) +
                     " entries, expected " + std::to_string(3 * frags.pixel_count()));
  }
  ShMatrix grad = ShMatrix::Zero();
  for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
    const double g[3] = {pixel_grad[3 * p], pixel_grad[3 * p + 1], pixel_grad[3 * p + 2]};
    if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) {
      continue;
    }
    for (const Fragment& f : frags.fragments(p)) {
      for (int c = 0; c < kShChannels; ++c) {
        if (g[c] == 0.0 || sh.coeffs.row(c).dot(f.basis.transpose()) < 0.0) {
          continue;
        }
        grad.row(c) += (g[c] * f.weight * f.albedo[c]) * f.basis.transpose();
      }
    }
  }
  return grad;
}

RasterImage render(const Mesh& mesh, const Camera& camera, const ShCoeffs& sh,
                   const RasterConfig& cfg) {
  return shade(rasterize(mesh, camera, cfg), sh);
}

double RenderGradients::d_pixel_d_sh(std::size_t pixel, int channel, int j) const {
  if (j / kShTerms != channel) {
    return 0.0;
  }
  return d_sh[(3 * pixel + channel) * kShTerms + j % kShTerms];
}

RenderGradients render_with_grads(const Mesh& mesh, const Camera& camera, const ShCoeffs& sh,
                                  const RasterConfig& cfg) {
  const FragmentBuffer frags = rasterize(mesh, camera, cfg);
  RenderGradients out;
  out.image = shade(frags, sh);
  out.unclamped = shade_unclamped(frags, sh);
  out.clamp_mask.resize(out.unclamped.size());
  for (std::size_t i = 0; i < out.unclamped.size(); ++i) {
    out.clamp_mask[i] = (out.unclamped[i] < 0.0 || out.unclamped[i] > 1.0) ? 1 : 0;
  }

  const std::size_t n = frags.pixel_count();
  out.d_sh.assign(n * 3 * kShTerms, 0.0);
  out.albedo_offsets.assign(1, 0);
  std::vector<AlbedoJacobianEntry> local;
  for (std::size_t p = 0; p < n; ++p) {
    local.clear();
    for (const Fragment& f : frags.fragments(p)) {
      Vec3 active;
      Vec3 irradiance;
      for (int c = 0; c < kShChannels; ++c) {
        const double dot = sh.coeffs.row(c).dot(f.basis.transpose());
        active[c] = dot >= 0.0 ? 1.0 : 0.0;
        irradiance[c] = std::max(0.0, dot);
        double* row = &out.d_sh[(3 * p + c) * kShTerms];
        const double scale = f.weight * f.albedo[c] * active[c];
        for (int k = 0; k < kShTerms; ++k) {
          row[k] += scale * f.basis[k];
        }
      }
      for (int k = 0; k < 3; ++k) {
        local.push_back({f.vertices[k], f.weight * f.bary[k] * irradiance});
      }
    }
    std::stable_sort(local.begin(), local.end(),
                     [](const auto& a, const auto& b) { return a.vertex < b.vertex; });
    for (const auto& e : local) {
      if (!out.albedo_entries.empty() && out.albedo_entries.size() > out.albedo_offsets.back() &&
          out.albedo_entries.back().vertex == e.vertex) {
        out.albedo_entries.back().coefficient += e.coefficient;
      } else {
        out.albedo_entries.push_back(e);
      }
    }
    out.albedo_offsets.push_back(out.albedo_entries.size());
  }
  return out;
}

RasterImage render_guidance(const MorphableModel& model, const FaceCoefficients& coeffs,
                            const Camera& camera, const ShCoeffs& sh, const RasterConfig& cfg) {
  return render(evaluate_model(model, coeffs), camera, sh, cfg);
}

GeometryBuffer geometry_buffer(const FragmentBuffer& frags, double min_coverage) {
  GeometryBuffer g;
  g.normals = NormalMap(frags.height(), frags.width());
  g.albedo.assign(frags.pixel_count(), Vec3::Zero());
  g.coverage.assign(frags.pixel_count(), 0.0);
  for (std::size_t p = 0; p < frags.pixel_count(); ++p) {
    Vec3 n = Vec3::Zero();
    Vec3 a = Vec3::Zero();
    double cov = 0.0;
    for (const Fragment& f : frags.fragments(p)) {
      n += f.weight * f.normal;
      a += f.weight * f.albedo;
      cov += f.weight;
    }
    g.coverage[p] = cov;
    if (cov > 0.0 && n.norm() > 1e-12) {
      g.normals.normals[p] = n.normalized();
      g.albedo[p] = a / cov;
      g.normals.mask[p] = cov >= min_coverage ? 1 : 0;
    }
  }
  return g;
}

}  // namespace relit
