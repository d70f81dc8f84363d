#include "ada/generator.hpp"

#include <algorithm>

#include "ada/errors.hpp"
#include "ada/hash.hpp"
#include "ada/serialize.hpp"

namespace ada {

namespace {

constexpr nn::ConvGeometry kDown{4, 2, 1};
constexpr nn::ConvGeometry kUp{4, 2, 1};
constexpr double kInitStd = 0.02;

}  // namespace

nlohmann::json GeneratorConfig::to_json() const {
  return {{"image_channels", image_channels},
          {"d_z", d_z},
          {"widths", widths},
          {"skip_connections", skip_connections}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  c.image_channels = j.at("image_channels").get<int>();
  c.d_z = j.at("d_z").get<int>();
  c.widths = j.at("widths").get<std::array<int, 3>>();
  c.skip_connections = j.at("skip_connections").get<bool>();
  return c;
}

Tensor tile_latent(const LatentBatch& z, int height, int width) {
  const Shape s = z.shape();
  Tensor out(Shape{s.n, s.c, height, width});
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int n = 0; n < s.n; ++n) {
    auto code = z.sample(n);
    auto dst = out.sample(n);
    for (int c = 0; c < s.c; ++c) {
      std::fill_n(dst.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                  code[static_cast<std::size_t>(c)]);
    }
  }
  return out;
}

int GeneratorNet::dec_in_channels(int block) const {
  const auto& w = config_.widths;
  switch (block) {
    case 0: return w[2];
    case 1: return w[1] + (config_.skip_connections ? w[1] : 0);
    default: return w[0] + (config_.skip_connections ? w[0] : 0);
  }
}

GeneratorNet::GeneratorNet(GeneratorConfig config, std::uint64_t seed)
    : config_(config), head_(config.widths[0], config.image_channels, nn::ConvGeometry{1, 1, 0}) {
  if (config_.d_z <= 0 || config_.image_channels <= 0) {
    throw ShapeError("generator needs positive d_z and image channels");
  }
  const auto& w = config_.widths;
  int in = config_.image_channels;
  for (int i = 0; i < 3; ++i) {
    enc_conv_.emplace_back(in + config_.d_z, w[static_cast<std::size_t>(i)], kDown, false);
    enc_bn_.emplace_back(w[static_cast<std::size_t>(i)]);
    in = w[static_cast<std::size_t>(i)];
  }
  const std::array<int, 3> dec_out{w[1], w[0], w[0]};
  for (int j = 0; j < 3; ++j) {
    dec_conv_.emplace_back(dec_in_channels(j), dec_out[static_cast<std::size_t>(j)], kUp, false);
    dec_bn_.emplace_back(dec_out[static_cast<std::size_t>(j)]);
  }
  Rng rng(seed);
  for (auto& c : enc_conv_) nn::init_normal(c, rng, kInitStd);
  for (auto& c : dec_conv_) nn::init_normal(c, rng, kInitStd);
  nn::init_normal(head_, rng, kInitStd);
}

void GeneratorNet::check_inputs(const Tensor& pixels, const LatentBatch& z) const {
  const Shape s = pixels.shape();
  if (s.c != config_.image_channels) {
    throw ShapeError("generator expects " + std::to_string(config_.image_channels) +
                     " image channels, got " + s.str());
  }
  if (s.h % 8 != 0 || s.w % 8 != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError("generator input height and width must be multiples of 8, got " + s.str());
  }
  if (z.shape().c != config_.d_z || z.shape().h != 1 || z.shape().w != 1) {
    throw ShapeError("latent length " + std::to_string(z.shape().c) + " does not match d_z = " +
                     std::to_string(config_.d_z));
  }
  if (z.shape().n != s.n) {
    throw ShapeError("latent batch has " + std::to_string(z.shape().n) + " codes for " +
                     std::to_string(s.n) + " images");
  }
}

GeneratorNet::Pass GeneratorNet::forward(const Tensor& pixels, const LatentBatch& z,
                                         nn::Mode mode) const {
  check_inputs(pixels, z);
  Pass p;
  p.mode = mode;
  const Tensor* h = &pixels;
  for (std::size_t i = 0; i < 3; ++i) {
    p.enc_in[i] = concat_channels(*h, tile_latent(z, h->shape().h, h->shape().w));
    p.enc_conv[i] = enc_conv_[i].forward(p.enc_in[i], mode);
    p.enc_bn[i] = enc_bn_[i].forward(p.enc_conv[i], mode);
    p.enc_out[i] = relu_.forward(p.enc_bn[i], mode);
    h = &p.enc_out[i];
  }
  for (std::size_t j = 0; j < 3; ++j) {
    if (j == 0) {
      p.dec_in[j] = p.enc_out[2];
    } else if (config_.skip_connections) {
      p.dec_in[j] = concat_channels(p.dec_out[j - 1], p.enc_out[2 - j]);
    } else {
      p.dec_in[j] = p.dec_out[j - 1];
    }
    p.dec_conv[j] = dec_conv_[j].forward(p.dec_in[j], mode);
    p.dec_bn[j] = dec_bn_[j].forward(p.dec_conv[j], mode);
    p.dec_out[j] = relu_.forward(p.dec_bn[j], mode);
  }
  p.head_pre = head_.forward(p.dec_out[2], mode);
  p.perturbation = tanh_.forward(p.head_pre, mode);
  return p;
}

Tensor GeneratorNet::generate(const Tensor& pixels, const LatentBatch& z, nn::Mode mode) const {
  return forward(pixels, z, mode).perturbation;
}

Tensor GeneratorNet::generate(const Tensor& pixels, const LatentCode& z, nn::Mode mode) const {
  if (z.size() != config_.d_z) {
    throw ShapeError("latent length " + std::to_string(z.size()) + " does not match d_z = " +
                     std::to_string(config_.d_z));
  }
  return generate(pixels, broadcast_latent(z, pixels.shape().n), mode);
}

void GeneratorNet::backward(const Pass& p, const Tensor& grad_perturbation,
                            nn::Gradients& grads) const {
  // Parameter layout: enc (conv, bn) x3, dec (conv, bn) x3, head (w, b).
  std::size_t slot = 0;
  std::array<std::size_t, 3> enc_conv_slot{}, enc_bn_slot{}, dec_conv_slot{}, dec_bn_slot{};
  for (std::size_t i = 0; i < 3; ++i) {
    enc_conv_slot[i] = slot++;
    enc_bn_slot[i] = slot;
    slot += 2;
  }
  for (std::size_t j = 0; j < 3; ++j) {
    dec_conv_slot[j] = slot++;
    dec_bn_slot[j] = slot;
    slot += 2;
  }
  const std::size_t head_slot = slot;
  if (grads.size() != head_slot + 2) throw ShapeError("generator: gradient buffer mismatch");
  auto span_at = [&grads](std::size_t at, std::size_t count) {
    return std::span<Tensor>(grads.data() + at, count);
  };

  const nn::Mode mode = p.mode;
  Tensor g = tanh_.backward(p.head_pre, p.perturbation, grad_perturbation, mode, {});
  g = head_.backward(p.dec_out[2], p.head_pre, g, mode, span_at(head_slot, 2));

  std::array<Tensor, 3> skip_grad;  // extra gradient reaching enc_out[i] through skips
  for (int jj = 2; jj >= 0; --jj) {
    const auto j = static_cast<std::size_t>(jj);
    g = relu_.backward(p.dec_bn[j], p.dec_out[j], g, mode, {});
    g = dec_bn_[j].backward(p.dec_conv[j], p.dec_bn[j], g, mode, span_at(dec_bn_slot[j], 2));
    g = dec_conv_[j].backward(p.dec_in[j], p.dec_conv[j], g, mode, span_at(dec_conv_slot[j], 1));
    if (j > 0 && config_.skip_connections) {
      Tensor main, skip;
      split_channels(g, p.dec_out[j - 1].shape().c, main, skip);
      skip_grad[2 - j] = std::move(skip);
      g = std::move(main);
    }
  }
  for (int ii = 2; ii >= 0; --ii) {
    const auto i = static_cast<std::size_t>(ii);
    if (!skip_grad[i].empty()) g += skip_grad[i];
    g = relu_.backward(p.enc_bn[i], p.enc_out[i], g, mode, {});
    g = enc_bn_[i].backward(p.enc_conv[i], p.enc_bn[i], g, mode, span_at(enc_bn_slot[i], 2));
    g = enc_conv_[i].backward(p.enc_in[i], p.enc_conv[i], g, mode, span_at(enc_conv_slot[i], 1));
    if (i > 0) {
      Tensor main, latent;
      split_channels(g, p.enc_in[i].shape().c - config_.d_z, main, latent);
      g = std::move(main);
    }
  }
}

void GeneratorNet::update_running_stats(const Pass& pass) {
  for (std::size_t i = 0; i < 3; ++i) enc_bn_[i].update_running_stats(pass.enc_conv[i]);
  for (std::size_t j = 0; j < 3; ++j) dec_bn_[j].update_running_stats(pass.dec_conv[j]);
}

std::vector<Tensor*> GeneratorNet::params() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < 3; ++i) {
    for (Tensor* t : enc_conv_[i].params()) out.push_back(t);
    for (Tensor* t : enc_bn_[i].params()) out.push_back(t);
  }
  for (std::size_t j = 0; j < 3; ++j) {
    for (Tensor* t : dec_conv_[j].params()) out.push_back(t);
    for (Tensor* t : dec_bn_[j].params()) out.push_back(t);
  }
  for (Tensor* t : head_.params()) out.push_back(t);
  return out;
}

std::vector<Tensor*> GeneratorNet::state() {
  std::vector<Tensor*> out;
  for (std::size_t i = 0; i < 3; ++i) {
    for (Tensor* t : enc_conv_[i].state()) out.push_back(t);
    for (Tensor* t : enc_bn_[i].state()) out.push_back(t);
  }
  for (std::size_t j = 0; j < 3; ++j) {
    for (Tensor* t : dec_conv_[j].state()) out.push_back(t);
    for (Tensor* t : dec_bn_[j].state()) out.push_back(t);
  }
  for (Tensor* t : head_.state()) out.push_back(t);
  return out;
}

nn::Gradients GeneratorNet::zero_gradients() {
  nn::Gradients g;
  for (Tensor* p : params()) g.emplace_back(p->shape());
  return g;
}

std::size_t GeneratorNet::num_params() {
  std::size_t n = 0;
  for (Tensor* p : params()) n += p->size();
  return n;
}

std::string GeneratorNet::weights_hash() const {
  Sha256 h;
  for (const Tensor* t : const_cast<GeneratorNet*>(this)->state()) h.update(*t);
  return h.hex_digest();
}

void GeneratorNet::save(const std::filesystem::path& path, const nlohmann::json& meta) const {
  nlohmann::json header{{"kind", "generator"}, {"config", config_.to_json()}, {"meta", meta}};
  std::vector<const Tensor*> tensors;
  for (Tensor* t : const_cast<GeneratorNet*>(this)->state()) tensors.push_back(t);
  save_checkpoint(path, std::move(header), tensors);
}

GeneratorNet GeneratorNet::load(const std::filesystem::path& path, nlohmann::json* meta) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.header.value("kind", "") != "generator") {
    throw IoError(path.string() + " is not a generator checkpoint");
  }
  GeneratorNet net(GeneratorConfig::from_json(ck.header.at("config")), 0);
  auto state = net.state();
  if (state.size() != ck.tensors.size()) throw IoError(path.string() + ": tensor count mismatch");
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!(state[i]->shape() == ck.tensors[i].shape())) {
      throw IoError(path.string() + ": tensor shape mismatch at index " + std::to_string(i));
    }
    *state[i] = std::move(ck.tensors[i]);
  }
  if (meta != nullptr) *meta = ck.header.value("meta", nlohmann::json::object());
  return net;
}

// ------------------------------------------------------------------ craft

CraftPass craft_pass(const GeneratorNet& net, const ImageBatch& batch, const LatentBatch& z,
                     AttackBudget budget, nn::Mode mode) {
  CraftPass out;
  out.gen = net.forward(batch.pixels, z, mode);
  out.candidate = Tensor(batch.pixels.shape());
  for (std::size_t i = 0; i < out.candidate.size(); ++i) {
    out.candidate[i] = batch.pixels[i] + budget.epsilon * out.gen.perturbation[i];
  }
  out.adversarial.pixels = project_to_budget(out.candidate, batch.pixels, budget);
  out.adversarial.labels = batch.labels;
  return out;
}

ImageBatch craft(const GeneratorNet& net, const ImageBatch& batch, const LatentBatch& z,
                 AttackBudget budget) {
  return craft_pass(net, batch, z, budget, nn::Mode::Eval).adversarial;
}

ImageBatch craft(const GeneratorNet& net, const ImageBatch& batch, const LatentCode& z,
                 AttackBudget budget) {
  if (z.size() != net.config().d_z) {
    throw ShapeError("latent length " + std::to_string(z.size()) + " does not match d_z = " +
                     std::to_string(net.config().d_z));
  }
  return craft(net, batch, broadcast_latent(z, batch.size()), budget);
}

Tensor craft_backward(const CraftPass& pass, const Tensor& clean, const Tensor& grad_adv,
                      AttackBudget budget) {
  Tensor grad(grad_adv.shape());
  const double eps = budget.epsilon;
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double lo = std::max(clean[i] - eps, 0.0);
    const double hi = std::min(clean[i] + eps, 1.0);
    const double v = pass.candidate[i];
    grad[i] = (v >= lo && v <= hi) ? eps * grad_adv[i] : 0.0;
  }
  return grad;
}

}  // namespace ada
