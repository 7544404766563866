#include "adakd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "adakd/rng.hpp"

namespace adakd::model {

Activation parse_activation(const std::string& text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw std::invalid_argument("parse_activation: expected \"relu\" or \"tanh\", got \"" +
                              text + "\"");
}

std::string activation_str(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

void GradientSet::zero() {
  for (ParamBlock& blk : blocks) {
    std::fill(blk.w.begin(), blk.w.end(), 0.0);
    std::fill(blk.b.begin(), blk.b.end(), 0.0);
  }
}

void GradientSet::scale(double s) {
  for (ParamBlock& blk : blocks) {
    for (double& v : blk.w) v *= s;
    for (double& v : blk.b) v *= s;
  }
}

void GradientSet::add(const GradientSet& other) {
  if (other.blocks.size() != blocks.size()) {
    throw std::invalid_argument("GradientSet::add: block count mismatch");
  }
  for (std::size_t l = 0; l < blocks.size(); ++l) {
    ParamBlock& dst = blocks[l];
    const ParamBlock& src = other.blocks[l];
    if (src.w.size() != dst.w.size() || src.b.size() != dst.b.size()) {
      throw std::invalid_argument("GradientSet::add: shape mismatch");
    }
    for (std::size_t i = 0; i < dst.w.size(); ++i) dst.w[i] += src.w[i];
    for (std::size_t i = 0; i < dst.b.size(); ++i) dst.b[i] += src.b[i];
  }
}

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes, Activation act)
    : sizes_(std::move(layer_sizes)), act_(act) {
  if (sizes_.size() < 2) {
    throw std::invalid_argument("DenseNet: need at least input and output layers");
  }
  for (std::size_t s : sizes_) {
    if (s == 0) throw std::invalid_argument("DenseNet: zero-width layer");
  }
  blocks_.resize(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    blocks_[l].in = sizes_[l];
    blocks_[l].out = sizes_[l + 1];
    blocks_[l].w.assign(sizes_[l] * sizes_[l + 1], 0.0);
    blocks_[l].b.assign(sizes_[l + 1], 0.0);
  }
}

void DenseNet::init(std::uint64_t seed) {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    ParamBlock& blk = blocks_[l];
    rng::Engine eng(rng::mix(rng::mix(seed, rng::kStreamInit), l));
    const double bound = std::sqrt(1.0 / static_cast<double>(blk.in));
    for (double& v : blk.w) v = eng.uniform(-bound, bound);
    std::fill(blk.b.begin(), blk.b.end(), 0.0);
  }
}

DenseNet DenseNet::make(std::vector<std::size_t> layer_sizes, Activation act,
                        std::uint64_t seed) {
  DenseNet net(std::move(layer_sizes), act);
  net.init(seed);
  return net;
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
  Trace trace;
  return forward(x, trace);
}

std::vector<double> DenseNet::forward(std::span<const double> x,
                                      Trace& trace) const {
  if (x.size() != sizes_.front()) {
    throw std::invalid_argument("DenseNet::forward: input size mismatch");
  }
  const std::size_t n_layers = blocks_.size();
  // resize keeps the inner buffers, so a reused Trace stops allocating
  // after its first pass.
  trace.inputs.resize(n_layers);
  trace.pre.resize(n_layers);
  trace.inputs[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const ParamBlock& blk = blocks_[l];
    const std::vector<double>& in = trace.inputs[l];
    std::vector<double>& pre = trace.pre[l];
    pre.resize(blk.out);
    for (std::size_t o = 0; o < blk.out; ++o) {
      double acc = blk.b[o];
      const double* row = blk.w.data() + o * blk.in;
      for (std::size_t i = 0; i < blk.in; ++i) acc += row[i] * in[i];
      pre[o] = acc;
    }
    if (l + 1 < n_layers) {
      std::vector<double>& nxt = trace.inputs[l + 1];
      nxt.resize(blk.out);
      if (act_ == Activation::relu) {
        for (std::size_t o = 0; o < blk.out; ++o) {
          nxt[o] = pre[o] > 0.0 ? pre[o] : 0.0;
        }
      } else {
        for (std::size_t o = 0; o < blk.out; ++o) nxt[o] = std::tanh(pre[o]);
      }
    }
  }
  return trace.pre.back();
}

void DenseNet::backward_into(const Trace& trace, std::span<const double> dlogits,
                             GradientSet& grads) const {
  const std::size_t n_layers = blocks_.size();
  if (trace.pre.size() != n_layers || trace.inputs.size() != n_layers) {
    throw std::invalid_argument("DenseNet::backward_into: trace shape mismatch");
  }
  if (dlogits.size() != sizes_.back() || grads.blocks.size() != n_layers) {
    throw std::invalid_argument("DenseNet::backward_into: gradient shape mismatch");
  }
  std::vector<double> dpre(dlogits.begin(), dlogits.end());
  std::vector<double> din;
  for (std::size_t l = n_layers; l-- > 0;) {
    const ParamBlock& blk = blocks_[l];
    const std::vector<double>& in = trace.inputs[l];
    ParamBlock& g = grads.blocks[l];
    for (std::size_t o = 0; o < blk.out; ++o) {
      const double d = dpre[o];
      double* grow = g.w.data() + o * blk.in;
      for (std::size_t i = 0; i < blk.in; ++i) grow[i] += d * in[i];
      g.b[o] += d;
    }
    if (l == 0) break;
    din.assign(blk.in, 0.0);
    for (std::size_t o = 0; o < blk.out; ++o) {
      const double d = dpre[o];
      const double* row = blk.w.data() + o * blk.in;
      for (std::size_t i = 0; i < blk.in; ++i) din[i] += d * row[i];
    }
    // din is d/d(post-activation of layer l-1); fold in the activation.
    const std::vector<double>& prev_pre = trace.pre[l - 1];
    dpre.resize(blk.in);
    if (act_ == Activation::relu) {
      for (std::size_t i = 0; i < blk.in; ++i) {
        dpre[i] = prev_pre[i] > 0.0 ? din[i] : 0.0;
      }
    } else {
      for (std::size_t i = 0; i < blk.in; ++i) {
        const double th = std::tanh(prev_pre[i]);
        dpre[i] = din[i] * (1.0 - th * th);
      }
    }
  }
}

GradientSet DenseNet::zero_gradients() const {
  GradientSet g;
  g.blocks.resize(blocks_.size());
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    g.blocks[l].in = blocks_[l].in;
    g.blocks[l].out = blocks_[l].out;
    g.blocks[l].w.assign(blocks_[l].w.size(), 0.0);
    g.blocks[l].b.assign(blocks_[l].b.size(), 0.0);
  }
  return g;
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const ParamBlock& blk : blocks_) n += blk.w.size() + blk.b.size();
  return n;
}

void DenseNet::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("DenseNet::save: cannot open " + path.string());
  }
  out << "adakd-model v1\n";
  out << "activation " << activation_str(act_) << "\n";
  out << "layers";
  for (std::size_t s : sizes_) out << ' ' << s;
  out << "\n";
  char buf[48];
  for (const ParamBlock& blk : blocks_) {
    for (double v : blk.w) {
      std::snprintf(buf, sizeof buf, "%a\n", v);
      out << buf;
    }
    for (double v : blk.b) {
      std::snprintf(buf, sizeof buf, "%a\n", v);
      out << buf;
    }
  }
  if (!out) {
    throw std::runtime_error("DenseNet::save: write failed for " + path.string());
  }
}

DenseNet DenseNet::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("DenseNet::load: cannot open " + path.string());
  }
  std::string line;
  if (!std::getline(in, line) || line != "adakd-model v1") {
    throw std::runtime_error("DenseNet::load: " + path.string() +
                             ": bad or unsupported header");
  }
  if (!std::getline(in, line) || line.rfind("activation ", 0) != 0) {
    throw std::runtime_error("DenseNet::load: " + path.string() +
                             ": missing activation line");
  }
  const Activation act = parse_activation(line.substr(11));
  if (!std::getline(in, line) || line.rfind("layers", 0) != 0) {
    throw std::runtime_error("DenseNet::load: " + path.string() +
                             ": missing layers line");
  }
  std::istringstream sizes_in(line.substr(6));
  std::vector<std::size_t> sizes;
  std::size_t s = 0;
  while (sizes_in >> s) sizes.push_back(s);
  DenseNet net(std::move(sizes), act);
  for (ParamBlock& blk : net.blocks_) {
    auto read_all = [&](std::vector<double>& vals) {
      for (double& v : vals) {
        if (!std::getline(in, line)) {
          throw std::runtime_error("DenseNet::load: " + path.string() +
                                   ": truncated parameter list");
        }
        char* end = nullptr;
        v = std::strtod(line.c_str(), &end);
        if (end == line.c_str()) {
          throw std::runtime_error("DenseNet::load: " + path.string() +
                                   ": bad parameter value \"" + line + "\"");
        }
      }
    };
    read_all(blk.w);
    read_all(blk.b);
  }
  return net;
}

}  // namespace adakd::model
