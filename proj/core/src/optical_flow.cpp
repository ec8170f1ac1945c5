#include "stylefool/optical_flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "binary_io.hpp"
#include "stylefool/error.hpp"

namespace stylefool {
namespace {

struct Sample {
  int x0, y0, x1, y1;
  double wx, wy;
};

Sample bilinear_sample(double x, double y, int width, int height) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  Sample s;
  s.x0 = static_cast<int>(std::floor(x));
  s.y0 = static_cast<int>(std::floor(y));
  s.x1 = std::min(s.x0 + 1, width - 1);
  s.y1 = std::min(s.y0 + 1, height - 1);
  s.wx = x - s.x0;
  s.wy = y - s.y0;
  return s;
}

/// Best integer displacement for every pixel of `a` into `b`.
std::vector<float> block_match(const ImageTensor& a, const ImageTensor& b,
                               const BlockMatchParams& p) {
  const int h = a.height(), w = a.width(), c = a.channels();
  const int lo = p.patch / 2;          // window spans [-lo, patch-lo-1]
  const int hi = p.patch - lo - 1;
  const int ph = h + p.patch - 1, pw = w + p.patch - 1;  // padded window domain
  auto clampi = [](int v, int n) { return std::clamp(v, 0, n - 1); };

  std::vector<double> best_cost(std::size_t(h) * w, std::numeric_limits<double>::infinity());
  std::vector<int> best_mag(std::size_t(h) * w, std::numeric_limits<int>::max());
  std::vector<float> flow(std::size_t(h) * w * 2, 0.0f);
  std::vector<double> integral(std::size_t(ph + 1) * (pw + 1));

  // Scan offsets by increasing magnitude so ties keep the smallest displacement.
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -p.search_radius; dy <= p.search_radius; ++dy) {
    for (int dx = -p.search_radius; dx <= p.search_radius; ++dx) offsets.emplace_back(dx, dy);
  }
  std::stable_sort(offsets.begin(), offsets.end(), [](auto l, auto r) {
    return l.first * l.first + l.second * l.second < r.first * r.first + r.second * r.second;
  });

  for (auto [dx, dy] : offsets) {
    // integral[(y+1)*(pw+1) + (x+1)] = sum of squared differences over padded [0..y]x[0..x].
    for (int y = 0; y < ph; ++y) {
      double row = 0.0;
      const int ay = clampi(y - lo, h);
      const int by = clampi(y - lo + dy, h);
      for (int x = 0; x < pw; ++x) {
        const int ax = clampi(x - lo, w);
        const int bx = clampi(x - lo + dx, w);
        double d2 = 0.0;
        for (int k = 0; k < c; ++k) {
          const double d = double(a.at(ay, ax, k)) - double(b.at(by, bx, k));
          d2 += d * d;
        }
        row += d2;
        integral[std::size_t(y + 1) * (pw + 1) + x + 1] =
            integral[std::size_t(y) * (pw + 1) + x + 1] + row;
      }
    }
    const int mag = dx * dx + dy * dy;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Pixel (y,x) window covers padded rows y..y+lo+hi, cols x..x+lo+hi.
        const int y0 = y, y1 = y + lo + hi + 1, x0 = x, x1 = x + lo + hi + 1;
        const double cost = integral[std::size_t(y1) * (pw + 1) + x1] -
                            integral[std::size_t(y0) * (pw + 1) + x1] -
                            integral[std::size_t(y1) * (pw + 1) + x0] +
                            integral[std::size_t(y0) * (pw + 1) + x0];
        const std::size_t i = std::size_t(y) * w + x;
        if (cost < best_cost[i] || (cost == best_cost[i] && mag < best_mag[i])) {
          best_cost[i] = cost;
          best_mag[i] = mag;
          flow[2 * i] = static_cast<float>(dx);
          flow[2 * i + 1] = static_cast<float>(dy);
        }
      }
    }
  }
  return flow;
}

}  // namespace

FlowField estimate_flow(const ImageTensor& a, const ImageTensor& b, const BlockMatchParams& p) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    throw ValidationError("estimate_flow: frame dimensions differ");
  }
  if (p.patch < 1 || p.search_radius < 0) throw ValidationError("invalid block-match parameters");
  const int h = a.height(), w = a.width();
  FlowField field(h, w);
  field.displacement = block_match(a, b, p);
  const std::vector<float> backward = block_match(b, a, p);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = std::size_t(y) * w + x;
      const double fx = field.displacement[2 * i], fy = field.displacement[2 * i + 1];
      const Sample s = bilinear_sample(x + fx, y + fy, w, h);
      double bxy[2];
      for (int k = 0; k < 2; ++k) {
        auto at = [&](int yy, int xx) { return double(backward[(std::size_t(yy) * w + xx) * 2 + k]); };
        bxy[k] = (1 - s.wy) * ((1 - s.wx) * at(s.y0, s.x0) + s.wx * at(s.y0, s.x1)) +
                 s.wy * ((1 - s.wx) * at(s.y1, s.x0) + s.wx * at(s.y1, s.x1));
      }
      const double ex = fx + bxy[0], ey = fy + bxy[1];
      field.mask[i] = std::sqrt(ex * ex + ey * ey) <= p.occlusion_threshold ? 1.0f : 0.0f;
    }
  }
  return field;
}

template <typename T>
nn::Grid<T> warp(const nn::Grid<T>& frame, const FlowField& flow) {
  if (frame.height != flow.height || frame.width != flow.width) {
    throw ValidationError("warp: flow and frame dimensions differ");
  }
  nn::Grid<T> out(frame.height, frame.width, frame.channels);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      const Sample s = bilinear_sample(x + double(flow.dx(y, x)), y + double(flow.dy(y, x)),
                                       frame.width, frame.height);
      const T w00 = T((1 - s.wy) * (1 - s.wx)), w01 = T((1 - s.wy) * s.wx);
      const T w10 = T(s.wy * (1 - s.wx)), w11 = T(s.wy * s.wx);
      for (int c = 0; c < frame.channels; ++c) {
        out.at(y, x, c) = w00 * frame.at(s.y0, s.x0, c) + w01 * frame.at(s.y0, s.x1, c) +
                          w10 * frame.at(s.y1, s.x0, c) + w11 * frame.at(s.y1, s.x1, c);
      }
    }
  }
  return out;
}

template <typename T>
nn::Grid<T> warp_transpose(const nn::Grid<T>& grad, const FlowField& flow) {
  if (grad.height != flow.height || grad.width != flow.width) {
    throw ValidationError("warp_transpose: flow and gradient dimensions differ");
  }
  nn::Grid<T> out(grad.height, grad.width, grad.channels);
  for (int y = 0; y < grad.height; ++y) {
    for (int x = 0; x < grad.width; ++x) {
      const Sample s = bilinear_sample(x + double(flow.dx(y, x)), y + double(flow.dy(y, x)),
                                       grad.width, grad.height);
      const T w00 = T((1 - s.wy) * (1 - s.wx)), w01 = T((1 - s.wy) * s.wx);
      const T w10 = T(s.wy * (1 - s.wx)), w11 = T(s.wy * s.wx);
      for (int c = 0; c < grad.channels; ++c) {
        const T g = grad.at(y, x, c);
        out.at(s.y0, s.x0, c) += w00 * g;
        out.at(s.y0, s.x1, c) += w01 * g;
        out.at(s.y1, s.x0, c) += w10 * g;
        out.at(s.y1, s.x1, c) += w11 * g;
      }
    }
  }
  return out;
}

template nn::Grid<float> warp(const nn::Grid<float>&, const FlowField&);
template nn::Grid<double> warp(const nn::Grid<double>&, const FlowField&);
template nn::Grid<float> warp_transpose(const nn::Grid<float>&, const FlowField&);
template nn::Grid<double> warp_transpose(const nn::Grid<double>&, const FlowField&);

ImageTensor warp(const ImageTensor& frame, const FlowField& flow) {
  auto g = warp(nn::to_grid<double>(frame), flow);
  std::vector<float> data(g.data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::clamp(static_cast<float>(g.data[i]), 0.0f, 1.0f);
  }
  return ImageTensor(frame.height(), frame.width(), frame.channels(), std::move(data));
}

FlowField read_flow(const std::filesystem::path& path) {
  detail::BinaryReader in(path.string());
  in.expect_magic("FLO1");
  if (in.remaining() < 8) throw CorruptFileError("'" + path.string() + "': header truncated");
  FlowField f;
  f.height = static_cast<int>(in.u32());
  f.width = static_cast<int>(in.u32());
  const std::size_t n = std::size_t(f.height) * f.width;
  if (in.remaining() != n * 12) {
    throw CorruptFileError("'" + path.string() + "': payload does not match H*W");
  }
  f.displacement.resize(n * 2);
  f.mask.resize(n);
  in.f32s(f.displacement);
  in.f32s(f.mask);
  for (float m : f.mask) {
    if (m != 0.0f && m != 1.0f) throw ValidationError("'" + path.string() + "': mask not binary");
  }
  return f;
}

void write_flow(const FlowField& flow, const std::filesystem::path& path) {
  detail::BinaryWriter out(path.string());
  out.magic("FLO1");
  out.u32(static_cast<std::uint32_t>(flow.height));
  out.u32(static_cast<std::uint32_t>(flow.width));
  out.f32s(flow.displacement);
  out.f32s(flow.mask);
  out.finish();
}

}  // namespace stylefool
