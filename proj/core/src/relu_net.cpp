#include "deepprae/relu_net.hpp"

#include "deepprae/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace deepprae {

void MlpSpec::validate() const {
  if (input_dim < 1) throw InvalidArgument("mlp input_dim must be positive");
  if (hidden.empty()) throw InvalidArgument("mlp needs at least one hidden layer");
  for (int w : hidden)
    if (w < 1) throw InvalidArgument("mlp hidden widths must be positive");
}

MlpSpec MlpSpec::default_for(int input_dim) { return MlpSpec{input_dim, {input_dim <= 5 ? 32 : 64}}; }

int MlpParams::neuron_count() const {
  int n = 0;
  for (int l = 0; l + 1 < static_cast<int>(layers.size()); ++l) n += static_cast<int>(layers[l].bias.size());
  return n;
}

void MlpParams::validate() const {
  if (input_scale.size() != input_shift.size() || input_scale.size() == 0)
    throw DimensionMismatch("mlp input affine shape");
  if (layers.size() < 2) throw InvalidArgument("mlp needs at least one hidden layer");
  Eigen::Index in = input_scale.size();
  for (const auto& l : layers) {
    if (l.weight.cols() != in || l.weight.rows() != l.bias.size()) throw DimensionMismatch("mlp layer shape");
    if (!l.weight.allFinite() || !l.bias.allFinite()) throw DomainError("mlp parameters must be finite");
    in = l.weight.rows();
  }
  if (in != 1) throw DimensionMismatch("mlp output width must be 1");
  if (!input_scale.allFinite() || !input_shift.allFinite()) throw DomainError("mlp input affine must be finite");
}

MlpParams zero_params(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  p.input_scale = Vec::Ones(spec.input_dim);
  p.input_shift = Vec::Zero(spec.input_dim);
  int in = spec.input_dim;
  for (int w : spec.hidden) {
    p.layers.push_back({Mat::Zero(w, in), Vec::Zero(w)});
    in = w;
  }
  p.layers.push_back({Mat::Zero(1, in), Vec::Zero(1)});
  return p;
}

std::vector<DenseLayer> folded_layers(const MlpParams& p) {
  std::vector<DenseLayer> out = p.layers;
  const auto& first = p.layers.front();
  out.front().weight = first.weight * p.input_scale.asDiagonal();
  out.front().bias = first.bias + first.weight * p.input_shift;
  return out;
}

std::vector<Vec> preactivations(const MlpParams& p, const Vec& x) {
  if (x.size() != p.input_dim()) throw DimensionMismatch("logit input dimension");
  std::vector<Vec> out;
  Vec h = p.input_scale.cwiseProduct(x) + p.input_shift;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Vec u = p.layers[l].weight * h + p.layers[l].bias;
    out.push_back(u);
    if (l + 1 < p.layers.size()) h = u.cwiseMax(0.0);
  }
  return out;
}

double logit(const MlpParams& p, const Vec& x) { return preactivations(p, x).back()[0]; }

std::vector<Interval> interval_bounds(const MlpParams& p, const Box& box) {
  if (box.dim() != p.input_dim()) throw DimensionMismatch("interval box dimension");
  std::vector<Interval> out;
  const auto layers = folded_layers(p);
  Vec lo = box.lower, hi = box.upper;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Mat& W = layers[l].weight;
    const Mat Wp = W.cwiseMax(0.0), Wn = W.cwiseMin(0.0);
    Vec ul = Wp * lo + Wn * hi + layers[l].bias;
    Vec uh = Wp * hi + Wn * lo + layers[l].bias;
    if (!ul.allFinite() || !uh.allFinite()) throw UnboundedNeuron("interval propagation produced a non-finite bound");
    out.push_back({ul, uh});
    lo = ul.cwiseMax(0.0);
    hi = uh.cwiseMax(0.0);
  }
  return out;
}

namespace {

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double sigmoid(double t) { return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t)); }

double batch_loss_grad(const MlpParams& p, std::span<const LabeledSample> samples,
                       std::span<const std::size_t> idx, double pos_weight, std::vector<DenseLayer>* grad) {
  const auto B = static_cast<Eigen::Index>(idx.size());
  const int d = p.input_dim();
  Mat h(d, B);
  Vec y(B), w(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = samples[idx[b]];
    if (s.point.size() != d) throw DimensionMismatch("training sample dimension");
    h.col(b) = p.input_scale.cwiseProduct(s.point) + p.input_shift;
    y[b] = s.label;
    w[b] = s.label == 1 ? pos_weight : 1.0;
  }
  const double wsum = w.sum();

  const std::size_t L = p.layers.size();
  std::vector<Mat> acts{h};
  std::vector<Mat> pre;
  for (std::size_t l = 0; l < L; ++l) {
    Mat u = (p.layers[l].weight * acts.back()).colwise() + p.layers[l].bias;
    pre.push_back(u);
    if (l + 1 < L) acts.push_back(u.cwiseMax(0.0));
  }
  const Mat& t = pre.back();
  double loss = 0.0;
  Mat delta(1, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    loss += w[b] * (y[b] > 0.5 ? softplus(-t(0, b)) : softplus(t(0, b)));
    delta(0, b) = w[b] * (sigmoid(t(0, b)) - y[b]) / wsum;
  }
  loss /= wsum;
  if (!grad) return loss;

  grad->resize(L);
  for (std::size_t l = L; l-- > 0;) {
    (*grad)[l].weight = delta * acts[l].transpose();
    (*grad)[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Mat back = p.layers[l].weight.transpose() * delta;
      delta = back.cwiseProduct((pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

}  // namespace

double loss_and_gradient(const MlpParams& p, std::span<const LabeledSample> samples, double pos_weight,
                         std::vector<DenseLayer>* grad) {
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  return batch_loss_grad(p, samples, idx, pos_weight, grad);
}

MlpParams train(std::span<const LabeledSample> samples, const MlpSpec& spec, const TrainConfig& cfg) {
  spec.validate();
  if (!(cfg.learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (cfg.epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (cfg.batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  std::size_t n1 = 0;
  for (const auto& s : samples) {
    if (s.point.size() != spec.input_dim) throw DimensionMismatch("training sample dimension");
    if (s.label == 1) ++n1;
  }
  const std::size_t n0 = samples.size() - n1;
  if (n0 == 0 || n1 == 0) throw SingleClassData("training data must contain both labels");
  const double pos_weight = cfg.class_weight_positive.value_or(static_cast<double>(n0) / static_cast<double>(n1));

  MlpParams p = zero_params(spec);
  const int d = spec.input_dim;
  Vec mean = Vec::Zero(d), sq = Vec::Zero(d);
  for (const auto& s : samples) mean += s.point;
  mean /= static_cast<double>(samples.size());
  for (const auto& s : samples) sq += (s.point - mean).cwiseAbs2();
  for (int j = 0; j < d; ++j) {
    const double sd = std::sqrt(sq[j] / static_cast<double>(samples.size()));
    p.input_scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
    p.input_shift[j] = -mean[j] * p.input_scale[j];
  }

  Rng rng(cfg.seed);
  for (auto& l : p.layers) {
    const double r = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    std::uniform_real_distribution<double> u(-r, r);
    for (Eigen::Index j = 0; j < l.weight.cols(); ++j)
      for (Eigen::Index i = 0; i < l.weight.rows(); ++i) l.weight(i, j) = u(rng);
  }

  // RMSProp without momentum.
  constexpr double decay = 0.9, eps = 1e-8;
  std::vector<DenseLayer> v;
  for (const auto& l : p.layers) v.push_back({Mat::Zero(l.weight.rows(), l.weight.cols()), Vec::Zero(l.bias.size())});

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<DenseLayer> g;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t len = std::min(bs, order.size() - start);
      epoch_loss += batch_loss_grad(p, samples, std::span(order).subspan(start, len), pos_weight, &g);
      for (std::size_t l = 0; l < p.layers.size(); ++l) {
        v[l].weight = decay * v[l].weight + (1 - decay) * g[l].weight.cwiseAbs2();
        v[l].bias = decay * v[l].bias + (1 - decay) * g[l].bias.cwiseAbs2();
        p.layers[l].weight.array() -= cfg.learning_rate * g[l].weight.array() / (v[l].weight.array().sqrt() + eps);
        p.layers[l].bias.array() -= cfg.learning_rate * g[l].bias.array() / (v[l].bias.array().sqrt() + eps);
      }
    }
    if (!std::isfinite(epoch_loss)) throw NonFiniteLoss("training loss diverged at epoch " + std::to_string(epoch));
  }
  p.final_loss = loss_and_gradient(p, samples, pos_weight, nullptr);
  if (!std::isfinite(p.final_loss)) throw NonFiniteLoss("final training loss is not finite");
  return p;
}

// ------------------------------------------------------------ serialization

namespace {

constexpr char kMagic[8] = {'D', 'P', 'R', 'A', 'E', 'M', 'L', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : b_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw TruncatedStream("model stream ended early");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string_view bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string save_params(const MlpParams& p) {
  p.validate();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(p.input_dim()));
  put_u32(out, static_cast<std::uint32_t>(p.layers.size()));
  for (const auto& l : p.layers) {
    put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
    put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
  }
  for (Eigen::Index j = 0; j < p.input_scale.size(); ++j) put_f64(out, p.input_scale[j]);
  for (Eigen::Index j = 0; j < p.input_shift.size(); ++j) put_f64(out, p.input_shift[j]);
  for (const auto& l : p.layers) {
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i)
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) put_f64(out, l.weight(i, j));
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) put_f64(out, l.bias[i]);
  }
  put_f64(out, p.final_loss);
  return out;
}

MlpParams load_params(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.size() < sizeof kMagic) throw TruncatedStream("model stream ended early");
  if (r.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
    throw FormatVersionMismatch("not a model file (bad magic)");
  const auto version = r.u32();
  if (version != kVersion) throw FormatVersionMismatch("unsupported model version " + std::to_string(version));
  MlpParams p;
  const auto d = r.u32();
  const auto nl = r.u32();
  if (d == 0 || nl < 2 || nl > 1024) throw FormatVersionMismatch("implausible model header");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t l = 0; l < nl; ++l) {
    const auto rows = r.u32();
    const auto cols = r.u32();
    shapes.emplace_back(rows, cols);
  }
  p.input_scale.resize(d);
  p.input_shift.resize(d);
  for (std::uint32_t j = 0; j < d; ++j) p.input_scale[j] = r.f64();
  for (std::uint32_t j = 0; j < d; ++j) p.input_shift[j] = r.f64();
  for (auto [rows, cols] : shapes) {
    r.need(8ull * (static_cast<std::size_t>(rows) * cols + rows));
    DenseLayer l{Mat(rows, cols), Vec(rows)};
    for (std::uint32_t i = 0; i < rows; ++i)
      for (std::uint32_t j = 0; j < cols; ++j) l.weight(i, j) = r.f64();
    for (std::uint32_t i = 0; i < rows; ++i) l.bias[i] = r.f64();
    p.layers.push_back(std::move(l));
  }
  p.final_loss = r.f64();
  if (!r.done()) throw FormatVersionMismatch("trailing bytes after model");
  p.validate();
  return p;
}

void save_params_file(const MlpParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  const auto bytes = save_params(p);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

MlpParams load_params_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return load_params(ss.str());
}

}  // namespace deepprae
