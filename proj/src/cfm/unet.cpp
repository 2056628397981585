#include "flowvc/cfm/unet.hpp"

#include <cmath>

#include "flowvc/errors.hpp"

namespace flowvc::cfm {

Tensor time_features(double t, std::size_t dim, double scale) {
  if (dim < 2 || dim % 2 != 0) throw InputError("time embedding dim must be even and positive");
  const std::size_t half = dim / 2;
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < half; ++i) {
    const double w = std::exp(-std::log(10000.0) * static_cast<double>(i) / static_cast<double>(half));
    v[i] = std::sin(scale * t * w);
    v[half + i] = std::cos(scale * t * w);
  }
  return Tensor::from({dim}, std::move(v));
}

ResBlock ResBlock::init(std::size_t channels, std::size_t time_dim, std::size_t groups, num::Rng& rng) {
  ResBlock b;
  b.norm1 = num::NormAffine::init(channels);
  b.conv1 = num::Conv1d::init(channels, channels, 3, rng, 1, 1);
  b.time_proj = num::Linear::init(time_dim, channels, rng);
  b.norm2 = num::NormAffine::init(channels);
  b.conv2 = num::Conv1d::init(channels, channels, 3, rng, 1, 1, 0.5);
  b.groups = groups;
  return b;
}

Tensor ResBlock::operator()(const Tensor& x, const Tensor& temb, const timbre::TimbreCondition& film) const {
  Tensor h = num::group_norm(x, groups, norm1.gamma, norm1.beta);
  h = conv1(num::silu(timbre::film_apply(h, film)));
  h = num::add_per_row(h, time_proj(temb));
  h = num::group_norm(h, groups, norm2.gamma, norm2.beta);
  h = conv2(num::silu(timbre::film_apply(h, film)));
  return x + h;
}

void ResBlock::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  norm1.visit_parameters(num::join_name(prefix, "norm1"), fn);
  conv1.visit_parameters(num::join_name(prefix, "conv1"), fn);
  time_proj.visit_parameters(num::join_name(prefix, "time"), fn);
  norm2.visit_parameters(num::join_name(prefix, "norm2"), fn);
  conv2.visit_parameters(num::join_name(prefix, "conv2"), fn);
}

VectorFieldNet VectorFieldNet::init(const UNetConfig& cfg, num::Rng& rng) {
  if (cfg.levels == 0) throw InputError("U-Net needs at least one level");
  if (cfg.hidden % cfg.groups != 0) throw InputError("U-Net hidden width must be divisible by groups");
  VectorFieldNet n;
  n.cfg_ = cfg;
  const std::size_t c = cfg.hidden;
  n.conv_in_ = num::Conv1d::init(cfg.n_mels + cfg.fused_dim, c, 3, rng, 1, 1);
  n.time_in_ = num::Linear::init(cfg.time_dim, c, rng);
  n.time_out_ = num::Linear::init(c, cfg.time_dim, rng);
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    std::vector<ResBlock> blocks;
    for (std::size_t r = 0; r < cfg.res_blocks; ++r) blocks.push_back(ResBlock::init(c, cfg.time_dim, cfg.groups, rng));
    n.down_.push_back(std::move(blocks));
    if (l + 1 < cfg.levels) n.downsample_.push_back(num::Conv1d::init(c, c, 3, rng, 2, 1));
  }
  n.mid_.push_back(ResBlock::init(c, cfg.time_dim, cfg.groups, rng));
  for (std::size_t l = 0; l < cfg.levels; ++l) {
    n.merge_.push_back(num::Conv1d::init(2 * c, c, 1, rng));
    std::vector<ResBlock> blocks;
    for (std::size_t r = 0; r < cfg.res_blocks; ++r) blocks.push_back(ResBlock::init(c, cfg.time_dim, cfg.groups, rng));
    n.up_.push_back(std::move(blocks));
  }
  n.norm_out_ = num::NormAffine::init(c);
  n.conv_out_ = num::Conv1d::init(c, cfg.n_mels, 3, rng, 1, 1, 0.5);
  n.null_fused_ = Tensor::zeros({cfg.fused_dim}, true);
  n.null_gamma_ = Tensor::full({c}, 1.0, true);
  n.null_beta_ = Tensor::zeros({c}, true);
  return n;
}

Tensor VectorFieldNet::operator()(const Tensor& x, double t, const ConditionSet& h) const {
  if (x.ndim() != 2 || x.rows() != cfg_.n_mels) throw InputError("vector field: state must be [n_mels x T]");
  const std::size_t frames = x.cols();
  Tensor fused;
  timbre::TimbreCondition film;
  if (h.active) {
    if (!h.fused.defined() || h.fused.rows() != cfg_.fused_dim || h.fused.cols() != frames) {
      throw InputError("vector field: fused condition must be [fused_dim x T]");
    }
    if (!h.timbre.gamma.defined() || h.timbre.dim() != cfg_.hidden) {
      throw InputError("vector field: timbre condition dim must equal the hidden width");
    }
    fused = h.fused;
    film = h.timbre;
  } else {
    fused = num::broadcast_cols(null_fused_, frames);
    film = {null_gamma_, null_beta_};
  }

  const Tensor temb = time_out_(num::silu(time_in_(time_features(t, cfg_.time_dim))));
  Tensor hcur = conv_in_(num::concat_rows({x, fused}));
  std::vector<Tensor> skips;
  for (std::size_t l = 0; l < cfg_.levels; ++l) {
    for (const auto& b : down_[l]) hcur = b(hcur, temb, film);
    skips.push_back(hcur);
    if (l + 1 < cfg_.levels) hcur = downsample_[l](hcur);
  }
  for (const auto& b : mid_) hcur = b(hcur, temb, film);
  for (std::size_t i = 0; i < cfg_.levels; ++i) {
    const std::size_t l = cfg_.levels - 1 - i;
    const Tensor& skip = skips[l];
    hcur = merge_[i](num::concat_rows({num::interpolate_time(hcur, skip.cols()), skip}));
    for (const auto& b : up_[i]) hcur = b(hcur, temb, film);
  }
  hcur = num::silu(num::group_norm(hcur, cfg_.groups, norm_out_.gamma, norm_out_.beta));
  return conv_out_(hcur);
}

void VectorFieldNet::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  conv_in_.visit_parameters(num::join_name(prefix, "conv_in"), fn);
  time_in_.visit_parameters(num::join_name(prefix, "time_in"), fn);
  time_out_.visit_parameters(num::join_name(prefix, "time_out"), fn);
  for (std::size_t l = 0; l < down_.size(); ++l) {
    for (std::size_t r = 0; r < down_[l].size(); ++r) {
      down_[l][r].visit_parameters(num::join_name(prefix, "down" + std::to_string(l) + ".res" + std::to_string(r)), fn);
    }
  }
  for (std::size_t l = 0; l < downsample_.size(); ++l) {
    downsample_[l].visit_parameters(num::join_name(prefix, "downsample" + std::to_string(l)), fn);
  }
  for (std::size_t r = 0; r < mid_.size(); ++r) mid_[r].visit_parameters(num::join_name(prefix, "mid" + std::to_string(r)), fn);
  for (std::size_t i = 0; i < up_.size(); ++i) {
    merge_[i].visit_parameters(num::join_name(prefix, "merge" + std::to_string(i)), fn);
    for (std::size_t r = 0; r < up_[i].size(); ++r) {
      up_[i][r].visit_parameters(num::join_name(prefix, "up" + std::to_string(i) + ".res" + std::to_string(r)), fn);
    }
  }
  norm_out_.visit_parameters(num::join_name(prefix, "norm_out"), fn);
  conv_out_.visit_parameters(num::join_name(prefix, "conv_out"), fn);
  fn(num::join_name(prefix, "null_fused"), null_fused_);
  fn(num::join_name(prefix, "null_gamma"), null_gamma_);
  fn(num::join_name(prefix, "null_beta"), null_beta_);
}

MlpField MlpField::init(std::size_t dim, std::size_t hidden, std::size_t time_dim, num::Rng& rng) {
  MlpField f;
  f.time_dim_ = time_dim;
  f.in_ = num::Linear::init(dim + time_dim, hidden, rng);
  f.hidden1_ = num::Linear::init(hidden, hidden, rng);
  f.hidden2_ = num::Linear::init(hidden, hidden, rng);
  f.out_ = num::Linear::init(hidden, dim, rng, 0.5);
  return f;
}

Tensor MlpField::operator()(const Tensor& x, double t, const ConditionSet&) const {
  const Tensor tf = num::broadcast_cols(time_features(t, time_dim_), x.cols());
  Tensor h = num::silu(in_(num::concat_rows({x, tf})));
  h = num::silu(hidden1_(h));
  h = num::silu(hidden2_(h));
  return out_(h);
}

void MlpField::visit_parameters(const std::string& prefix, const num::ParamVisitor& fn) {
  in_.visit_parameters(num::join_name(prefix, "in"), fn);
  hidden1_.visit_parameters(num::join_name(prefix, "hidden1"), fn);
  hidden2_.visit_parameters(num::join_name(prefix, "hidden2"), fn);
  out_.visit_parameters(num::join_name(prefix, "out"), fn);
}

}  // namespace flowvc::cfm
