// Copyright 2026 The ffpa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace oracle
{

std::optional<Calib> parse_calib(const std::string & text)
{
  std::map<std::string, std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    for (auto & ch : line) {
      if (ch == ':') {
        ch = ' ';
      }
    }
    std::istringstream in(line);
    std::string key;
    if (!(in >> key)) {
      continue;
    }
    std::vector<double> v;
    double x;
    while (in >> x) {
      v.push_back(x);
    }
    rows[key] = v;
  }
  auto need = [&](const char * key, std::size_t n) -> const std::vector<double> * {
    auto it = rows.find(key);
    if (it == rows.end() || it->second.size() != n) {
      return nullptr;
    }
    return &it->second;
  };
  const auto * p2 = need("P2", 12);
  const auto * r0 = need("R0_rect", 9);
  const auto * tr = need("Tr_velo_to_cam", 12);
  if (!p2 || !r0 || !tr) {
    return std::nullopt;
  }
  Calib c;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 4; ++k) {
      c.p2[r][k] = (*p2)[r * 4 + k];
      c.tr[r][k] = (*tr)[r * 4 + k];
    }
    for (int k = 0; k < 3; ++k) {
      c.r0[r][k] = (*r0)[r * 3 + k];
    }
  }
  return c;
}

Mat34 compose(const Calib & c)
{
  double r4[4][4] = {};
  double t4[4][4] = {};
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) {
      r4[r][k] = c.r0[r][k];
    }
    for (int k = 0; k < 4; ++k) {
      t4[r][k] = c.tr[r][k];
    }
  }
  r4[3][3] = 1.0;
  t4[3][3] = 1.0;
  double rt[4][4] = {};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int k = 0; k < 4; ++k) {
        rt[i][j] += r4[i][k] * t4[k][j];
      }
    }
  }
  Mat34 out{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) {
      for (int k = 0; k < 4; ++k) {
        out[i][j] += c.p2[i][k] * rt[k][j];
      }
    }
  }
  return out;
}

std::optional<std::pair<double, double>> project(
  const Mat34 & p, double x, double y, double z, double width, double height)
{
  const double hx = p[0][0] * x + p[0][1] * y + p[0][2] * z + p[0][3];
  const double hy = p[1][0] * x + p[1][1] * y + p[1][2] * z + p[1][3];
  const double hz = p[2][0] * x + p[2][1] * y + p[2][2] * z + p[2][3];
  if (hz <= 0.0) {
    return std::nullopt;
  }
  const double u = hx / hz;
  const double v = hy / hz;
  if (u < 0.0 || v < 0.0 || u >= width || v >= height) {
    return std::nullopt;
  }
  return std::make_pair(u, v);
}

std::optional<std::pair<int, int>> spherical_cell(const Grid & g, double x, double y, double z)
{
  const double r = std::sqrt(x * x + y * y + z * z);
  const double az = std::atan2(y, x);
  const double el = std::asin(std::min(1.0, std::max(-1.0, z / r)));
  const double fc = std::floor((az - g.theta0) / g.dtheta);
  const double fr = std::floor((el - g.phi0) / g.dphi);
  if (fc < 0 || fr < 0 || fc >= g.width || fr >= g.height) {
    return std::nullopt;
  }
  return std::make_pair(static_cast<int>(fr), static_cast<int>(fc));
}

CellTable cell_table(const std::vector<Pt> & cloud, const Box & box, const Grid & grid,
  const Mat34 & composed, double width, double height)
{
  const std::size_t cells = static_cast<std::size_t>(grid.height) * grid.width;
  CellTable t;
  t.winner.assign(cells, -1);
  t.valid.assign(cells, 0);
  std::vector<double> best(cells, 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Pt & p = cloud[i];
    if (!(p.x >= box.x0 && p.x <= box.x1 && p.y >= box.y0 && p.y <= box.y1 && p.z >= box.z0 &&
          p.z <= box.z1)) {
      continue;
    }
    const double r = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
    if (r == 0.0) {
      continue;
    }
    const auto c = spherical_cell(grid, p.x, p.y, p.z);
    if (!c) {
      continue;
    }
    const std::size_t idx = static_cast<std::size_t>(c->first) * grid.width + c->second;
    if (t.winner[idx] < 0 || r < best[idx]) {
      t.winner[idx] = static_cast<long>(i);
      best[idx] = r;
    }
  }
  for (std::size_t idx = 0; idx < cells; ++idx) {
    if (t.winner[idx] < 0) {
      continue;
    }
    const Pt & p = cloud[static_cast<std::size_t>(t.winner[idx])];
    if (project(composed, p.x, p.y, p.z, width, height)) {
      t.valid[idx] = 1;
      ++t.valid_count;
    }
  }
  return t;
}

std::vector<std::size_t> window_knn(const std::vector<double> & xyz,
  const std::vector<unsigned char> & mask, int height, int width, std::size_t center, int kh,
  int kw, int k, double range)
{
  const int cr = static_cast<int>(center / width);
  const int cc = static_cast<int>(center % width);
  std::vector<std::pair<double, std::size_t>> all;
  for (int dr = -(kh / 2); dr <= kh / 2; ++dr) {
    for (int dc = -(kw / 2); dc <= kw / 2; ++dc) {
      const int r = cr + dr;
      const int c = cc + dc;
      if (r < 0 || c < 0 || r >= height || c >= width) {
        continue;
      }
      const std::size_t idx = static_cast<std::size_t>(r) * width + c;
      if (!mask[idx]) {
        continue;
      }
      const double dx = xyz[3 * idx] - xyz[3 * center];
      const double dy = xyz[3 * idx + 1] - xyz[3 * center + 1];
      const double dz = xyz[3 * idx + 2] - xyz[3 * center + 2];
      const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (d <= range) {
        all.emplace_back(d, idx);
      }
    }
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> out;
  for (const auto & [d, idx] : all) {
    if (out.size() == static_cast<std::size_t>(k)) {
      break;
    }
    out.push_back(idx);
  }
  while (out.size() < static_cast<std::size_t>(k)) {
    out.push_back(out.front());
  }
  return out;
}

std::vector<double> dense(const std::vector<float> & w, const std::vector<float> & b,
  std::size_t in, std::size_t out, const std::vector<double> & x)
{
  std::vector<double> y(out);
  for (std::size_t j = 0; j < out; ++j) {
    double acc = b[j];
    for (std::size_t i = 0; i < in; ++i) {
      acc += x[i] * static_cast<double>(w[i * out + j]);
    }
    y[j] = acc;
  }
  return y;
}

std::vector<double> relu(std::vector<double> v)
{
  for (auto & x : v) {
    x = std::max(0.0, x);
  }
  return v;
}

std::vector<double> cat(std::initializer_list<std::vector<double>> parts)
{
  std::vector<double> out;
  for (const auto & p : parts) {
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<double> softmax(const std::vector<double> & z)
{
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) {
    mx = std::max(mx, v);
  }
  std::vector<double> e(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(z[i] - mx);
    s += e[i];
  }
  for (auto & v : e) {
    v /= s;
  }
  return e;
}

std::vector<double> euclid(double xu, double xv, double yu, double yv)
{
  return {xu, xv, yu, yv, xu - yu, xv - yv, std::hypot(xu - yu, xv - yv)};
}

std::vector<double> encode_center(const Layer & offset, const Layer & shared,
  const std::vector<std::array<double, 3>> & positions,
  const std::vector<std::vector<double>> & features, std::size_t center,
  const std::vector<std::size_t> & neighbors)
{
  std::vector<double> pooled(shared.out, -std::numeric_limits<double>::infinity());
  for (std::size_t n : neighbors) {
    std::vector<double> d(3);
    for (int a = 0; a < 3; ++a) {
      // Offsets enter the layer as f32, like the point data they come from.
      d[a] = static_cast<float>(positions[n][a] - positions[center][a]);
    }
    const auto h = relu(shared(cat({relu(offset(d)), features[n], features[center]})));
    for (std::size_t c = 0; c < h.size(); ++c) {
      pooled[c] = std::max(pooled[c], h[c]);
    }
  }
  return pooled;
}

std::vector<double> idw_interpolate(const std::vector<std::array<double, 3>> & coarse,
  const std::vector<std::vector<double>> & coarse_features, const std::array<double, 3> & q)
{
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    const double dx = coarse[i][0] - q[0];
    const double dy = coarse[i][1] - q[1];
    const double dz = coarse[i][2] - q[2];
    d.emplace_back(dx * dx + dy * dy + dz * dz, i);
  }
  std::sort(d.begin(), d.end());
  const std::size_t n = std::min<std::size_t>(3, d.size());
  std::vector<double> w(n);
  double total = 0;
  for (std::size_t j = 0; j < n; ++j) {
    w[j] = 1.0 / (std::sqrt(d[j].first) + 1e-8);
    total += w[j];
  }
  std::vector<double> out(coarse_features.empty() ? 0 : coarse_features[0].size(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] += w[j] / total * coarse_features[d[j].second][c];
    }
  }
  return out;
}

LiCamOut licamfuse(const LiCam & p, const std::vector<double> & fl, const std::vector<double> & fi,
  const std::vector<double> & fe)
{
  const auto a = p.point(fl);
  const auto b = p.image(fi);
  const auto c = p.e(fe);
  std::vector<double> t(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    t[i] = std::tanh(a[i] + b[i] + c[i]);
  }
  const auto g = p.gate(t);
  LiCamOut out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double w = 1.0 / (1.0 + std::exp(-g[i]));
    out.gate.push_back(w);
    out.fused.push_back(w * fi[i] + (1.0 - w) * fl[i]);
  }
  return out;
}

AttnOut stage1(const Stage1 & p, const std::vector<double> & center,
  const std::vector<std::vector<double>> & cross, const std::vector<std::vector<double>> & infos)
{
  std::vector<std::vector<double>> emb;
  std::vector<double> logits;
  for (std::size_t j = 0; j < cross.size(); ++j) {
    emb.push_back(relu(p.embed(cat({infos[j], cross[j], center}))));
    logits.push_back(p.logit(relu(p.hidden(cat({infos[j], emb.back()}))))[0]);
  }
  AttnOut out;
  out.weights = softmax(logits);
  out.feature.assign(center.size(), 0.0);
  for (std::size_t j = 0; j < emb.size(); ++j) {
    for (std::size_t c = 0; c < out.feature.size(); ++c) {
      out.feature[c] += out.weights[j] * emb[j][c];
    }
  }
  return out;
}

AttnOut stage2(const Stage2 & p, const std::vector<double> & center,
  const std::vector<std::vector<double>> & neighbors, const std::vector<std::vector<double>> & infos)
{
  std::vector<double> logits;
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    logits.push_back(p.logit(relu(p.hidden(cat({neighbors[j], infos[j], center}))))[0]);
  }
  AttnOut out;
  out.weights = softmax(logits);
  out.feature.assign(center.size(), 0.0);
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    for (std::size_t c = 0; c < out.feature.size(); ++c) {
      out.feature[c] += out.weights[j] * neighbors[j][c];
    }
  }
  return out;
}

namespace
{

std::vector<double> info_f32(double xu, double xv, double yu, double yv)
{
  auto e = euclid(xu, xv, yu, yv);
  for (auto & v : e) {
    v = static_cast<float>(v);
  }
  return e;
}

std::vector<std::vector<double>> direction(const Direction & d,
  const std::vector<std::vector<double>> & own, const std::vector<std::vector<double>> & cross,
  const std::vector<std::pair<double, double>> & uv, const std::vector<std::size_t> & same,
  std::size_t k, const std::vector<std::size_t> & cross_table, std::size_t m)
{
  const std::size_t n = own.size();
  std::vector<std::vector<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<double>> s1_out;
    std::vector<std::vector<double>> s2_info;
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t j = same[i * k + t];
      std::vector<std::vector<double>> xs;
      std::vector<std::vector<double>> es;
      for (std::size_t s = 0; s < m; ++s) {
        const std::size_t q = cross_table[j * m + s];
        xs.push_back(cross[q]);
        es.push_back(info_f32(uv[j].first, uv[j].second, uv[q].first, uv[q].second));
      }
      s1_out.push_back(stage1(d.s1, own[j], xs, es).feature);
      s2_info.push_back(info_f32(uv[i].first, uv[i].second, uv[j].first, uv[j].second));
    }
    out[i] = stage2(d.s2, own[i], s1_out, s2_info).feature;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> bilicamfuse(const BiLiCam & p,
  const std::vector<std::vector<double>> & points, const std::vector<std::vector<double>> & pixels,
  const std::vector<std::pair<double, double>> & uv, const std::vector<std::size_t> & point_k,
  const std::vector<std::size_t> & pixel_m, const std::vector<std::size_t> & pixel_k,
  const std::vector<std::size_t> & point_m, std::size_t k, std::size_t m)
{
  const auto a = direction(p.lidar, points, pixels, uv, point_k, k, pixel_m, m);
  const auto b = direction(p.image, pixels, points, uv, pixel_k, k, point_m, m);
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto y = p.mix(cat({a[i], b[i]}));
    for (std::size_t c = 0; c < y.size(); ++c) {
      y[c] = p.gamma[c] * (y[c] - p.mean[c]) / std::sqrt(p.var[c] + p.eps) + p.beta[c];
      y[c] = std::max(0.0, y[c]);
    }
    out.push_back(y);
  }
  return out;
}

std::vector<double> conv2d(const std::vector<double> & in, int w, int h, int cin,
  const std::vector<float> & weight, const std::vector<float> & bias, int cout, int kernel,
  int stride, int & out_w, int & out_h)
{
  const int pad = kernel / 2;
  out_w = (w - 1) / stride + 1;
  out_h = (h - 1) / stride + 1;
  std::vector<double> out(static_cast<std::size_t>(out_w) * out_h * cout);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      for (int co = 0; co < cout; ++co) {
        double acc = bias[co];
        for (int ky = 0; ky < kernel; ++ky) {
          for (int kx = 0; kx < kernel; ++kx) {
            const int y = oy * stride - pad + ky;
            const int x = ox * stride - pad + kx;
            if (y < 0 || x < 0 || y >= h || x >= w) {
              continue;
            }
            for (int ci = 0; ci < cin; ++ci) {
              const double wt = weight[((static_cast<std::size_t>(ky) * kernel + kx) * cin + ci) * cout + co];
              acc += in[(static_cast<std::size_t>(y) * w + x) * cin + ci] * wt;
            }
          }
        }
        out[(static_cast<std::size_t>(oy) * out_w + ox) * cout + co] = acc;
      }
    }
  }
  return out;
}

std::vector<double> bilinear(const std::vector<float> & grid, int w, int h, int c, int downscale,
  double u, double v)
{
  double gx = u / downscale;
  double gy = v / downscale;
  gx = std::min(std::max(gx, 0.0), w - 1.0);
  gy = std::min(std::max(gy, 0.0), h - 1.0);
  const int x0 = static_cast<int>(gx);
  const int y0 = static_cast<int>(gy);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double ax = gx - x0;
  const double ay = gy - y0;
  auto at = [&](int y, int x, int ch) {
    return static_cast<double>(grid[(static_cast<std::size_t>(y) * w + x) * c + ch]);
  };
  std::vector<double> out(c);
  for (int ch = 0; ch < c; ++ch) {
    const double top = at(y0, x0, ch) + ax * (at(y0, x1, ch) - at(y0, x0, ch));
    const double bottom = at(y1, x0, ch) + ax * (at(y1, x1, ch) - at(y1, x0, ch));
    out[ch] = top + ay * (bottom - top);
  }
  return out;
}

std::vector<std::size_t> fps(const std::vector<std::array<double, 3>> & pts, std::size_t count)
{
  std::vector<std::size_t> out;
  if (pts.empty()) {
    return out;
  }
  std::vector<double> d(pts.size(), std::numeric_limits<double>::max());
  std::size_t cur = 0;
  while (out.size() < std::min(count, pts.size())) {
    out.push_back(cur);
    std::size_t arg = 0;
    double far = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double s = 0;
      for (int a = 0; a < 3; ++a) {
        s += (pts[i][a] - pts[cur][a]) * (pts[i][a] - pts[cur][a]);
      }
      d[i] = std::min(d[i], s);
      if (d[i] > far) {
        far = d[i];
        arg = i;
      }
    }
    cur = arg;
  }
  return out;
}

}  // namespace oracle
