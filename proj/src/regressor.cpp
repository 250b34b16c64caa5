#include "pnp/regressor.hpp"

#include <cmath>
#include <sstream>

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"
#include "pnp/random.hpp"

namespace pnp {
namespace {

using RowMatrix = ForwardCache::RowMatrix;
using MapW = Eigen::Map<const RowMatrix>;
using MapV = Eigen::Map<const Eigen::VectorXd>;
using MapWMut = Eigen::Map<RowMatrix>;
using MapVMut = Eigen::Map<Eigen::VectorXd>;

constexpr double kLeak = 0.01;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double silu(double z) { return z * sigmoid(z); }
double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

// rows = cin * 9 (ci, ky, kx), cols = y * w + x; zero padding of one pixel.
void im2col(const RowMatrix& in, std::size_t h, std::size_t w, RowMatrix& cols) {
  const auto cin = static_cast<std::size_t>(in.rows());
  cols.setZero(static_cast<Eigen::Index>(cin * 9), static_cast<Eigen::Index>(h * w));
  for (std::size_t c = 0; c < cin; ++c) {
    const double* src = in.row(static_cast<Eigen::Index>(c)).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* dst = cols.row(static_cast<Eigen::Index>(c * 9 + ky * 3 + kx)).data();
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          const double* s = src + sy * static_cast<std::ptrdiff_t>(w) + (kx - 1);
          double* d = dst + y * w;
          for (std::size_t x = x0; x < x1; ++x) d[x] = s[x];
        }
      }
    }
  }
}

void col2im(const RowMatrix& cols, std::size_t cin, std::size_t h, std::size_t w, RowMatrix& out) {
  out.setZero(static_cast<Eigen::Index>(cin), static_cast<Eigen::Index>(h * w));
  for (std::size_t c = 0; c < cin; ++c) {
    double* dst = out.row(static_cast<Eigen::Index>(c)).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* src = cols.row(static_cast<Eigen::Index>(c * 9 + ky * 3 + kx)).data();
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          const std::size_t x0 = kx == 0 ? 1 : 0;
          const std::size_t x1 = kx == 2 ? w - 1 : w;
          double* d = dst + sy * static_cast<std::ptrdiff_t>(w) + (kx - 1);
          const double* s = src + y * w;
          for (std::size_t x = x0; x < x1; ++x) d[x] += s[x];
        }
      }
    }
  }
}

// 2x2 mean pool; a trailing odd row/column is dropped.
RowMatrix pool(const RowMatrix& in, std::size_t h, std::size_t w) {
  const std::size_t ph = h / 2, pw = w / 2;
  RowMatrix out(in.rows(), static_cast<Eigen::Index>(ph * pw));
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const double* s = in.row(c).data();
    double* d = out.row(c).data();
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x) {
        const double* p = s + 2 * y * w + 2 * x;
        d[y * pw + x] = 0.25 * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  }
  return out;
}

RowMatrix unpool(const RowMatrix& grad, std::size_t h, std::size_t w) {
  const std::size_t ph = h / 2, pw = w / 2;
  RowMatrix out = RowMatrix::Zero(grad.rows(), static_cast<Eigen::Index>(h * w));
  for (Eigen::Index c = 0; c < grad.rows(); ++c) {
    const double* s = grad.row(c).data();
    double* d = out.row(c).data();
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x) {
        const double g = 0.25 * s[y * pw + x];
        double* p = d + 2 * y * w + 2 * x;
        p[0] = g;
        p[1] = g;
        p[w] = g;
        p[w + 1] = g;
      }
  }
  return out;
}

double head(HeadActivation a, double z) {
  switch (a) {
    case HeadActivation::kTanh: return std::tanh(z);
    case HeadActivation::kIdentity: return z;
    case HeadActivation::kLeakyRelu: return z > 0 ? z : kLeak * z;
  }
  return z;
}

double head_grad(HeadActivation a, double z) {
  switch (a) {
    case HeadActivation::kTanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case HeadActivation::kIdentity: return 1.0;
    case HeadActivation::kLeakyRelu: return z > 0 ? 1.0 : kLeak;
  }
  return 1.0;
}

}  // namespace

HeadActivation head_for(const ScalingSpec& scaling) {
  if (scaling.use_minmax) return HeadActivation::kTanh;
  return scaling.use_log ? HeadActivation::kIdentity : HeadActivation::kLeakyRelu;
}

const char* to_string(HeadActivation h) {
  switch (h) {
    case HeadActivation::kTanh: return "tanh";
    case HeadActivation::kIdentity: return "identity";
    case HeadActivation::kLeakyRelu: return "leaky_relu";
  }
  return "?";
}

std::string RegressorSpec::describe() const {
  std::ostringstream s;
  s << "regressor " << height << "x" << width << " out=" << outputs << " head=" << to_string(head) << " ch=";
  for (std::size_t c : channels) s << c << ',';
  s << " hidden=" << hidden << " act=silu pool=mean2";
  return s.str();
}

std::uint64_t RegressorSpec::hash() const { return fnv1a64(describe()); }

Regressor::Regressor(const RegressorSpec& spec) : spec_(spec) {
  require(spec.outputs >= 1 && spec.hidden >= 1, ErrorKind::kInvalidArgument, "empty regressor output");
  std::size_t h = spec.height, w = spec.width;
  for (int b = 0; b < 4; ++b) {
    require(h >= 2 && w >= 2, ErrorKind::kInvalidArgument, "input image too small for four pooling stages");
    h /= 2;
    w /= 2;
  }
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, std::size_t fan_in, bool bias) {
    layers_.push_back(Layer{std::move(name), offset, rows, cols, fan_in, bias});
    offset += rows * cols;
  };
  std::size_t cin = 1;
  for (int b = 0; b < 4; ++b) {
    const std::size_t cout = spec.channels[b];
    add("conv" + std::to_string(b + 1) + ".w", cout, cin * 9, cin * 9, false);
    add("conv" + std::to_string(b + 1) + ".b", cout, 1, cin * 9, true);
    cin = cout;
  }
  add("dense1.w", spec.hidden, cin, cin, false);
  add("dense1.b", spec.hidden, 1, cin, true);
  add("dense2.w", spec.outputs, spec.hidden, spec.hidden, false);
  add("dense2.b", spec.outputs, 1, spec.hidden, true);
  params_.assign(offset, 0.0);
}

void Regressor::init(std::uint64_t seed) {
  ++version_;
  Rng rng = Rng::derive(seed, 0x77);
  for (const Layer& l : layers_) {
    const double std = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
    for (std::size_t i = 0; i < l.size(); ++i) params_[l.offset + i] = l.bias ? 0.0 : std * rng.normal();
  }
}

std::vector<double> standardize(std::span<const double> image) {
  require(!image.empty(), ErrorKind::kInvalidArgument, "empty image");
  double mean = 0.0;
  for (double v : image) mean += v;
  mean /= static_cast<double>(image.size());
  double var = 0.0;
  for (double v : image) var += (v - mean) * (v - mean);
  var /= static_cast<double>(image.size());
  const double inv = 1.0 / std::sqrt(var + 1e-12);
  std::vector<double> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) out[i] = (image[i] - mean) * inv;
  return out;
}

Eigen::VectorXd forward(const Regressor& net, std::span<const double> image, ForwardCache* cache) {
  const RegressorSpec& spec = net.spec();
  require(image.size() == spec.height * spec.width, ErrorKind::kInvalidArgument,
          "image has " + std::to_string(image.size()) + " values, regressor expects " +
              std::to_string(spec.height * spec.width));
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const auto& L = net.layers();
  const double* p = net.params().data();

  RowMatrix a = Eigen::Map<const RowMatrix>(image.data(), 1, static_cast<Eigen::Index>(image.size()));
  std::size_t h = spec.height, w = spec.width;
  for (int b = 0; b < 4; ++b) {
    ForwardCache::Block& blk = c.blocks[b];
    blk.h = h;
    blk.w = w;
    im2col(a, h, w, blk.cols);
    const Regressor::Layer& lw = L[2 * b];
    const Regressor::Layer& lb = L[2 * b + 1];
    const MapW W(p + lw.offset, static_cast<Eigen::Index>(lw.rows), static_cast<Eigen::Index>(lw.cols));
    const MapV bias(p + lb.offset, static_cast<Eigen::Index>(lb.rows));
    blk.z.noalias() = W * blk.cols;
    blk.z.colwise() += bias;
    RowMatrix s = blk.z.unaryExpr([](double z) { return silu(z); });
    a = pool(s, h, w);
    h /= 2;
    w /= 2;
  }
  c.pooled_h = h;
  c.pooled_w = w;
  c.g = a.rowwise().mean();

  const Regressor::Layer& l1w = L[8];
  const Regressor::Layer& l1b = L[9];
  const Regressor::Layer& l2w = L[10];
  const Regressor::Layer& l2b = L[11];
  const MapW W1(p + l1w.offset, static_cast<Eigen::Index>(l1w.rows), static_cast<Eigen::Index>(l1w.cols));
  const MapV b1(p + l1b.offset, static_cast<Eigen::Index>(l1b.rows));
  const MapW W2(p + l2w.offset, static_cast<Eigen::Index>(l2w.rows), static_cast<Eigen::Index>(l2w.cols));
  const MapV b2(p + l2b.offset, static_cast<Eigen::Index>(l2b.rows));
  c.zh = W1 * c.g + b1;
  c.h = c.zh.unaryExpr([](double z) { return silu(z); });
  c.zo = W2 * c.h + b2;
  const HeadActivation act = spec.head;
  c.out = c.zo.unaryExpr([act](double z) { return head(act, z); });
  c.version = net.version();
  c.owner = &net;
  return c.out;
}

void backward(const Regressor& net, const ForwardCache& c, const Eigen::VectorXd& upstream, std::span<double> grad) {
  require(c.owner == &net && c.version == net.version(), ErrorKind::kInvalidState,
          "forward cache is stale (weights changed since forward)");
  require(grad.size() == net.size(), ErrorKind::kInvalidArgument, "gradient buffer size mismatch");
  require(upstream.size() == c.out.size(), ErrorKind::kInvalidArgument, "upstream gradient size mismatch");
  const auto& L = net.layers();
  const double* p = net.params().data();
  double* gp = grad.data();
  const HeadActivation act = net.spec().head;

  Eigen::VectorXd dzo(upstream.size());
  for (Eigen::Index j = 0; j < dzo.size(); ++j) dzo(j) = upstream(j) * head_grad(act, c.zo(j));

  const Regressor::Layer& l1w = L[8];
  const Regressor::Layer& l2w = L[10];
  const MapW W1(p + l1w.offset, static_cast<Eigen::Index>(l1w.rows), static_cast<Eigen::Index>(l1w.cols));
  const MapW W2(p + l2w.offset, static_cast<Eigen::Index>(l2w.rows), static_cast<Eigen::Index>(l2w.cols));
  MapWMut dW2(gp + l2w.offset, static_cast<Eigen::Index>(l2w.rows), static_cast<Eigen::Index>(l2w.cols));
  MapVMut db2(gp + L[11].offset, static_cast<Eigen::Index>(L[11].rows));
  dW2.noalias() += dzo * c.h.transpose();
  db2 += dzo;
  Eigen::VectorXd dh = W2.transpose() * dzo;
  Eigen::VectorXd dzh(dh.size());
  for (Eigen::Index j = 0; j < dh.size(); ++j) dzh(j) = dh(j) * silu_grad(c.zh(j));
  MapWMut dW1(gp + l1w.offset, static_cast<Eigen::Index>(l1w.rows), static_cast<Eigen::Index>(l1w.cols));
  MapVMut db1(gp + L[9].offset, static_cast<Eigen::Index>(L[9].rows));
  dW1.noalias() += dzh * c.g.transpose();
  db1 += dzh;
  const Eigen::VectorXd dg = W1.transpose() * dzh;

  const std::size_t spatial = c.pooled_h * c.pooled_w;
  RowMatrix da(dg.size(), static_cast<Eigen::Index>(spatial));
  for (Eigen::Index ch = 0; ch < dg.size(); ++ch) da.row(ch).setConstant(dg(ch) / static_cast<double>(spatial));

  for (int b = 3; b >= 0; --b) {
    const ForwardCache::Block& blk = c.blocks[b];
    RowMatrix dz = unpool(da, blk.h, blk.w);
    dz.array() *= blk.z.unaryExpr([](double z) { return silu_grad(z); }).array();
    const Regressor::Layer& lw = L[2 * b];
    const Regressor::Layer& lb = L[2 * b + 1];
    MapWMut dW(gp + lw.offset, static_cast<Eigen::Index>(lw.rows), static_cast<Eigen::Index>(lw.cols));
    MapVMut db(gp + lb.offset, static_cast<Eigen::Index>(lb.rows));
    dW.noalias() += dz * blk.cols.transpose();
    db += dz.rowwise().sum();
    if (b == 0) break;
    const MapW W(p + lw.offset, static_cast<Eigen::Index>(lw.rows), static_cast<Eigen::Index>(lw.cols));
    const RowMatrix dcols = W.transpose() * dz;
    col2im(dcols, lw.cols / 9, blk.h, blk.w, da);
  }
}

OptimizerConfig adam_config() { return OptimizerConfig{}; }

OptimizerConfig clipped_config() {
  OptimizerConfig c;
  c.beta1 = 0.965;
  c.beta2 = 0.999;
  c.eps = 1e-15;
  c.clip = 0.04;
  c.decay = 0.1;
  return c;
}

Optimizer::Optimizer(const OptimizerConfig& cfg, std::size_t n, double eta)
    : cfg_(cfg), m_(n, 0.0), v_(n, 0.0), eta_(eta) {
  require(eta >= 0.0, ErrorKind::kInvalidArgument, "learning rate must be non-negative");
}

void Optimizer::set_eta(double eta) {
  require(eta >= 0.0, ErrorKind::kInvalidArgument, "learning rate must be non-negative");
  eta_ = eta;
}

void Optimizer::step(Regressor& net, std::span<const double> grad) {
  require(grad.size() == m_.size() && net.size() == m_.size(), ErrorKind::kInvalidArgument, "optimizer size mismatch");
  double norm2 = 0.0;
  for (double g : grad) {
    if (!std::isfinite(g)) fail(ErrorKind::kTrainingDivergence, "non-finite gradient; step rejected");
    norm2 += g * g;
  }
  const double norm = std::sqrt(norm2);
  if (!std::isfinite(norm)) fail(ErrorKind::kTrainingDivergence, "gradient norm overflow; step rejected");
  const double scale = cfg_.clip > 0.0 && norm > cfg_.clip ? cfg_.clip / norm : 1.0;

  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::span<double> w = net.mutable_params();
  double upd2 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double g = grad[i] * scale;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g * g;
    const double u = (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
    const double before = w[i];
    w[i] -= cfg_.decay * eta_ * w[i];
    w[i] -= eta_ * u;
    upd2 += (w[i] - before) * (w[i] - before);
  }
  last_update_norm_ = std::sqrt(upd2);
}

void save_checkpoint(const std::filesystem::path& path, const Regressor& net) {
  BinaryWriter w;
  w.bytes("PNPW");
  w.u16(kCheckpointVersion);
  w.u64(net.spec().hash());
  w.u32(static_cast<std::uint32_t>(net.layers().size()));
  const auto p = net.params();
  for (const Regressor::Layer& l : net.layers()) {
    w.u32(static_cast<std::uint32_t>(l.size()));
    for (std::size_t i = 0; i < l.size(); ++i) w.f64(p[l.offset + i]);
  }
  w.save(path);
}

void load_checkpoint(const std::filesystem::path& path, Regressor& net) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_bytes("PNPW");
  require(r.u16() == kCheckpointVersion, ErrorKind::kCacheMismatch, "unsupported checkpoint version");
  const std::uint64_t stored = r.u64();
  if (stored != net.spec().hash()) {
    fail(ErrorKind::kCacheMismatch, path.string() + " holds weights for layer spec " + hex64(stored) + ", expected " +
                                        hex64(net.spec().hash()));
  }
  require(r.u32() == net.layers().size(), ErrorKind::kCacheMismatch, "checkpoint layer count differs");
  std::vector<double> values(net.size());
  for (const Regressor::Layer& l : net.layers()) {
    require(r.u32() == l.size(), ErrorKind::kCacheMismatch, "checkpoint layer " + l.name + " has the wrong size");
    for (std::size_t i = 0; i < l.size(); ++i) values[l.offset + i] = r.f64();
  }
  require(r.at_end(), ErrorKind::kIo, "trailing bytes in " + path.string());
  std::span<double> dst = net.mutable_params();
  std::copy(values.begin(), values.end(), dst.begin());
}

}  // namespace pnp
