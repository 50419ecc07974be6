// SPDX-License-Identifier: Apache-2.0
// Copyright Contributors to the relit project.

#include "relit/neural/attention.hpp"

#include <cmath>
#include <string>

namespace relit::nn {

namespace {

// Rows are spatial tokens, columns channels.
Eigen::MatrixXd tokens(const Tensor4& x, int n) {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(x.plane()), x.channels());
  for (int c = 0; c < x.channels(); ++c) {
    for (std::size_t p = 0; p < x.plane(); ++p) {
      t(static_cast<Eigen::Index>(p), c) = x.data()[x.offset(n, c, 0, 0) + p];
    }
  }
  return t;
}

void store_tokens(const Eigen::MatrixXd& t, int n, Tensor4& x) {
  for (int c = 0; c < x.channels(); ++c) {
    for (std::size_t p = 0; p < x.plane(); ++p) {
      x.data()[x.offset(n, c, 0, 0) + p] = t(static_cast<Eigen::Index>(p), c);
    }
  }
}

void row_softmax(Eigen::MatrixXd& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp();
    s.row(r) /= s.row(r).sum();
  }
}

struct Prepared {
  Tensor4 warped;
  double scale = 1.0;
};

Prepared prepare(const AttentionBlock& block, const Tensor4& feat, const Tensor4& guidance) {
  block.validate();
  if (feat.channels() != block.w_k.rows()) {
    throw InputError("attention: feature has " + std::to_string(feat.channels()) +
                     " channels, key weights expect " + std::to_string(block.w_k.rows()));
  }
  if (guidance.channels() != block.w_q.rows() || guidance.batch() != feat.batch()) {
    throw InputError("attention: guidance " + guidance.shape_string() +
                     " does not fit query weights / feature batch");
  }
  Prepared p;
  p.warped = block.warp.forward(guidance, feat.height(), feat.width());
  if (p.warped.height() != feat.height() || p.warped.width() != feat.width()) {
    throw InputError("attention: warp produced " + p.warped.shape_string() + " for feature " +
                     feat.shape_string());
  }
  p.scale = block.scaled ? 1.0 / std::sqrt(static_cast<double>(block.dim())) : 1.0;
  return p;
}

}  // namespace

Warp Warp::average_pool() {
  Warp w;
  w.forward = [](const Tensor4& g, int h, int wd) {
    return avg_pool(g, pool_factor(g, h, wd, "warp"));
  };
  w.backward = [](const Tensor4& g, const Tensor4& d) {
    return avg_pool_backward(d, g.height() / d.height());
  };
  return w;
}

AttentionBlock AttentionBlock::random(int guidance_channels, int in_channels, int dim, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](int rows) {
    Eigen::MatrixXd m(rows, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = normal(rng) / std::sqrt(static_cast<double>(rows));
    }
    return m;
  };
  AttentionBlock b;
  b.w_q = draw(guidance_channels);
  b.w_k = draw(in_channels);
  b.w_v = draw(in_channels);
  return b;
}

void AttentionBlock::validate() const {
  if (w_k.cols() < 1 || w_q.cols() != w_k.cols() || w_v.cols() != w_k.cols() ||
      w_v.rows() != w_k.rows()) {
    throw InputError("attention: inconsistent weight shapes");
  }
  if (!warp.forward || !warp.backward) {
    throw InputError("attention: warp operator not set");
  }
}

void AttentionBlock::collect(ParamList& out) {
  out.emplace_back(w_q.data(), static_cast<std::size_t>(w_q.size()));
  out.emplace_back(w_k.data(), static_cast<std::size_t>(w_k.size()));
  out.emplace_back(w_v.data(), static_cast<std::size_t>(w_v.size()));
}

AttentionBlock AttentionBlock::zeros_like() const {
  AttentionBlock z = *this;
  z.w_q.setZero();
  z.w_k.setZero();
  z.w_v.setZero();
  return z;
}

Tensor4 attention_forward(const AttentionBlock& block, const Tensor4& feat_in,
                          const Tensor4& guidance, std::vector<Eigen::MatrixXd>* weights) {
  const Prepared prep = prepare(block, feat_in, guidance);
  Tensor4 out(feat_in.batch(), block.dim(), feat_in.height(), feat_in.width());
  if (weights != nullptr) {
    weights->clear();
  }
  for (int n = 0; n < feat_in.batch(); ++n) {
    const Eigen::MatrixXd f = tokens(feat_in, n);
    const Eigen::MatrixXd q = tokens(prep.warped, n) * block.w_q;
    const Eigen::MatrixXd k = f * block.w_k;
    const Eigen::MatrixXd v = f * block.w_v;
    Eigen::MatrixXd a = (q * k.transpose()) * prep.scale;
    row_softmax(a);
    store_tokens(a * v, n, out);
    if (weights != nullptr) {
      weights->push_back(std::move(a));
    }
  }
  return out;
}

AttentionGrads attention_backward(const AttentionBlock& block, const Tensor4& feat_in,
                                  const Tensor4& guidance, const Tensor4& upstream) {
  const Prepared prep = prepare(block, feat_in, guidance);
  if (upstream.batch() != feat_in.batch() || upstream.channels() != block.dim() ||
      upstream.height() != feat_in.height() || upstream.width() != feat_in.width()) {
    throw InputError("attention: upstream gradient has shape " + upstream.shape_string());
  }
  AttentionGrads g;
  g.w_q = Eigen::MatrixXd::Zero(block.w_q.rows(), block.w_q.cols());
  g.w_k = Eigen::MatrixXd::Zero(block.w_k.rows(), block.w_k.cols());
  g.w_v = Eigen::MatrixXd::Zero(block.w_v.rows(), block.w_v.cols());
  g.feat_in = Tensor4::like(feat_in);
  Tensor4 d_warped = Tensor4::like(prep.warped);
  for (int n = 0; n < feat_in.batch(); ++n) {
    const Eigen::MatrixXd f = tokens(feat_in, n);
    const Eigen::MatrixXd gw = tokens(prep.warped, n);
    const Eigen::MatrixXd q = gw * block.w_q;
    const Eigen::MatrixXd k = f * block.w_k;
    const Eigen::MatrixXd v = f * block.w_v;
    Eigen::MatrixXd a = (q * k.transpose()) * prep.scale;
    row_softmax(a);

    const Eigen::MatrixXd d_out = tokens(upstream, n);
    Eigen::MatrixXd d_v = a.transpose() * d_out;
    const Eigen::MatrixXd d_a = d_out * v.transpose();
    const Eigen::VectorXd row_dot = (d_a.array() * a.array()).rowwise().sum();
    const Eigen::MatrixXd d_s =
        (a.array() * (d_a.colwise() - row_dot).array()).matrix() * prep.scale;
    const Eigen::MatrixXd d_q = d_s * k;
    const Eigen::MatrixXd d_k = d_s.transpose() * q;

    g.w_q += gw.transpose() * d_q;
    g.w_k += f.transpose() * d_k;
    g.w_v += f.transpose() * d_v;
    store_tokens(d_k * block.w_k.transpose() + d_v * block.w_v.transpose(), n, g.feat_in);
    store_tokens(d_q * block.w_q.transpose(), n, d_warped);
    g.values.push_back(std::move(d_v));
  }
  g.guidance = block.warp.backward(guidance, d_warped);
  return g;
}

}  // namespace relit::nn
