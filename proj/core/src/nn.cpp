#include "stylefool/nn.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "stylefool/error.hpp"

namespace stylefool::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRow = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMapRow = Eigen::Map<const RowMatrix<T>>;

/// (9*in) x out kernel matrix; row (ky*3+kx)*in + ci.
template <typename T>
RowMatrix<T> kernel_matrix(const Conv3x3<T>& conv) {
  RowMatrix<T> k(9 * conv.in_channels, conv.out_channels);
  for (int o = 0; o < conv.out_channels; ++o) {
    for (int i = 0; i < conv.in_channels; ++i) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          k((ky * 3 + kx) * conv.in_channels + i, o) = conv.weights[conv.weight_index(o, i, ky, kx)];
        }
      }
    }
  }
  return k;
}

template <typename T>
RowMatrix<T> im2col(const Grid<T>& in) {
  const int c = in.channels;
  RowMatrix<T> cols = RowMatrix<T>::Zero(static_cast<Eigen::Index>(in.pixels()), 9 * c);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      T* row = cols.data() + (static_cast<std::size_t>(y) * in.width + x) * 9 * c;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= in.height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= in.width) continue;
          const T* src = &in.at(sy, sx, 0);
          std::copy(src, src + c, row + (ky * 3 + kx) * c);
        }
      }
    }
  }
  return cols;
}

template <typename T>
void check_conv_input(const Grid<T>& in, const Conv3x3<T>& conv) {
  if (in.channels != conv.in_channels) {
    throw ValidationError("convolution expects " + std::to_string(conv.in_channels) +
                          " input channels, got " + std::to_string(in.channels));
  }
}

}  // namespace

template <typename T>
Grid<T> conv3x3_forward(const Grid<T>& in, const Conv3x3<T>& conv) {
  check_conv_input(in, conv);
  Grid<T> out(in.height, in.width, conv.out_channels);
  const RowMatrix<T> cols = im2col(in);
  const RowMatrix<T> k = kernel_matrix(conv);
  MapRow<T> o(out.data.data(), static_cast<Eigen::Index>(out.pixels()), conv.out_channels);
  o.noalias() = cols * k;
  const Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(conv.bias.data(),
                                                                 conv.out_channels);
  o.rowwise() += b;
  return out;
}

template <typename T>
Grid<T> conv3x3_backward_input(const Grid<T>& dout, const Conv3x3<T>& conv) {
  if (dout.channels != conv.out_channels) {
    throw ValidationError("convolution gradient has the wrong channel count");
  }
  const int c = conv.in_channels;
  const RowMatrix<T> k = kernel_matrix(conv);
  ConstMapRow<T> d(dout.data.data(), static_cast<Eigen::Index>(dout.pixels()), dout.channels);
  const RowMatrix<T> dcols = d * k.transpose();
  Grid<T> din(dout.height, dout.width, c);
  for (int y = 0; y < dout.height; ++y) {
    for (int x = 0; x < dout.width; ++x) {
      const T* row = dcols.data() + (static_cast<std::size_t>(y) * dout.width + x) * 9 * c;
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= dout.height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= dout.width) continue;
          T* dst = &din.at(sy, sx, 0);
          const T* src = row + (ky * 3 + kx) * c;
          for (int i = 0; i < c; ++i) dst[i] += src[i];
        }
      }
    }
  }
  return din;
}

template <typename T>
void conv3x3_backward_params(const Grid<T>& in, const Grid<T>& dout, Conv3x3<T>& grad) {
  check_conv_input(in, grad);
  const RowMatrix<T> cols = im2col(in);
  ConstMapRow<T> d(dout.data.data(), static_cast<Eigen::Index>(dout.pixels()), dout.channels);
  const RowMatrix<T> dk = cols.transpose() * d;
  for (int o = 0; o < grad.out_channels; ++o) {
    for (int i = 0; i < grad.in_channels; ++i) {
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          grad.weights[grad.weight_index(o, i, ky, kx)] += dk((ky * 3 + kx) * grad.in_channels + i, o);
        }
      }
    }
    grad.bias[o] += d.col(o).sum();
  }
}

template <typename T>
Grid<T> relu_forward(Grid<T> in) {
  for (auto& v : in.data) v = v > T(0) ? v : T(0);
  return in;
}

template <typename T>
Grid<T> relu_backward(const Grid<T>& out, Grid<T> dout) {
  for (std::size_t i = 0; i < dout.data.size(); ++i) {
    if (!(out.data[i] > T(0))) dout.data[i] = T(0);
  }
  return dout;
}

template <typename T>
Grid<T> avgpool2_forward(const Grid<T>& in) {
  Grid<T> out(in.height / 2, in.width / 2, in.channels);
  const T quarter = T(0.25);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < in.channels; ++c) {
        out.at(y, x, c) = quarter * (in.at(2 * y, 2 * x, c) + in.at(2 * y, 2 * x + 1, c) +
                                     in.at(2 * y + 1, 2 * x, c) + in.at(2 * y + 1, 2 * x + 1, c));
      }
    }
  }
  return out;
}

template <typename T>
Grid<T> avgpool2_backward(const Grid<T>& dout, int in_height, int in_width) {
  Grid<T> din(in_height, in_width, dout.channels);
  const T quarter = T(0.25);
  for (int y = 0; y < dout.height; ++y) {
    for (int x = 0; x < dout.width; ++x) {
      for (int c = 0; c < dout.channels; ++c) {
        const T g = quarter * dout.at(y, x, c);
        din.at(2 * y, 2 * x, c) += g;
        din.at(2 * y, 2 * x + 1, c) += g;
        din.at(2 * y + 1, 2 * x, c) += g;
        din.at(2 * y + 1, 2 * x + 1, c) += g;
      }
    }
  }
  return din;
}

#define STYLEFOOL_NN_INSTANTIATE(T)                                                  \
  template Grid<T> conv3x3_forward(const Grid<T>&, const Conv3x3<T>&);               \
  template Grid<T> conv3x3_backward_input(const Grid<T>&, const Conv3x3<T>&);        \
  template void conv3x3_backward_params(const Grid<T>&, const Grid<T>&, Conv3x3<T>&); \
  template Grid<T> relu_forward(Grid<T>);                                            \
  template Grid<T> relu_backward(const Grid<T>&, Grid<T>);                           \
  template Grid<T> avgpool2_forward(const Grid<T>&);                                 \
  template Grid<T> avgpool2_backward(const Grid<T>&, int, int);

STYLEFOOL_NN_INSTANTIATE(float)
STYLEFOOL_NN_INSTANTIATE(double)

#undef STYLEFOOL_NN_INSTANTIATE

}  // namespace stylefool::nn
