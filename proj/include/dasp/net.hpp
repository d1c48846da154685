// Copyright 2026 dasp authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dasp/io.hpp"
#include "dasp/layers.hpp"

namespace dasp::nn {

/// Chain of layers driven by a line-oriented descriptor, one layer per line:
///   dense in=257 out=128 act=relu
///   conv1d in=1 out=8 width=16 stride=4 dilation=1 pool=avg pool_n=2 act=relu
///   lstm in=64 hidden=32
///   gru in=64 hidden=32
/// Dense layers apply per column; conv/recurrent layers consume (C x T).
struct Sequential {
  enum class Kind { dense, conv1d, lstm, gru };
  struct Entry {
    Kind kind;
    DenseLayer dense;
    Conv1dLayer conv;
    RecurrentCell cell;
  };
  std::vector<Entry> layers;

  static std::map<std::string, std::string> parse_fields(
      const std::string& line, std::string* kind) {
    std::istringstream ss(line);
    if (!(ss >> *kind)) throw std::invalid_argument("net: empty layer line");
    std::map<std::string, std::string> fields;
    std::string token;
    while (ss >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("net: expected key=value, got '" + token +
                                    "'");
      fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return fields;
  }

  static Sequential from_descriptor(const std::string& text, Rng& rng) {
    Sequential net;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      bool blank = true;
      for (char c : line)
        if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
      if (blank) continue;
      std::string kind;
      auto fields = parse_fields(line, &kind);
      auto need = [&](const std::string& key) {
        auto it = fields.find(key);
        if (it == fields.end())
          throw std::invalid_argument("net: " + kind + " needs " + key + "=");
        return it->second;
      };
      auto get = [&](const std::string& key, const std::string& fallback) {
        auto it = fields.find(key);
        return it == fields.end() ? fallback : it->second;
      };
      Entry e;
      if (kind == "dense") {
        e.kind = Kind::dense;
        e.dense = DenseLayer(std::stoul(need("in")), std::stoul(need("out")),
                             activation_from_string(get("act", "identity")),
                             rng);
      } else if (kind == "conv1d") {
        e.kind = Kind::conv1d;
        const std::string pool = get("pool", "none");
        Pooling pooling = Pooling::none;
        if (pool == "avg" || pool == "average") pooling = Pooling::average;
        else if (pool == "max") pooling = Pooling::max;
        else if (pool == "decimate") pooling = Pooling::decimate;
        else if (pool != "none")
          throw std::invalid_argument("net: unknown pool '" + pool + "'");
        e.conv = Conv1dLayer(
            std::stoul(need("in")), std::stoul(need("out")),
            std::stoul(need("width")),
            activation_from_string(get("act", "identity")), rng,
            std::stoul(get("stride", "1")), std::stoul(get("dilation", "1")),
            pooling, std::stoul(get("pool_n", "1")));
      } else if (kind == "lstm" || kind == "gru") {
        e.kind = kind == "lstm" ? Kind::lstm : Kind::gru;
        e.cell = RecurrentCell(
            kind == "lstm" ? RecurrentKind::lstm : RecurrentKind::gru,
            std::stoul(need("in")), std::stoul(need("hidden")), rng);
      } else {
        throw std::invalid_argument("net: unknown layer kind '" + kind + "'");
      }
      net.layers.push_back(std::move(e));
    }
    if (net.layers.empty())
      throw std::invalid_argument("net: descriptor has no layers");
    return net;
  }

  std::string descriptor() const {
    std::ostringstream os;
    for (const Entry& e : layers) {
      switch (e.kind) {
        case Kind::dense:
          os << "dense in=" << e.dense.in_dim() << " out=" << e.dense.out_dim()
             << " act=" << to_string(e.dense.activation) << "\n";
          break;
        case Kind::conv1d:
          os << "conv1d in=" << e.conv.in_channels
             << " out=" << e.conv.out_channels() << " width=" << e.conv.width
             << " stride=" << e.conv.stride << " dilation=" << e.conv.dilation
             << " act=" << to_string(e.conv.activation) << "\n";
          break;
        case Kind::lstm:
        case Kind::gru:
          os << (e.kind == Kind::lstm ? "lstm" : "gru")
             << " in=" << e.cell.input_size << " hidden=" << e.cell.state_size
             << "\n";
          break;
      }
    }
    return os.str();
  }

  ad::Var forward(ad::Tape& t, ad::Var x, BoundParams* bound = nullptr) const {
    ad::Var h = x;
    for (const Entry& e : layers) {
      switch (e.kind) {
        case Kind::dense: h = e.dense.forward(t, h, bound); break;
        case Kind::conv1d: h = e.conv.forward(t, h, bound); break;
        case Kind::lstm:
        case Kind::gru: h = e.cell.unroll(t, h, bound); break;
      }
    }
    return h;
  }

  Tensor evaluate(const Tensor& x) const {
    ad::Tape t;
    return t.val(forward(t, t.constant(x)));
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (Entry& e : layers) {
      switch (e.kind) {
        case Kind::dense:
          out.push_back(&e.dense.W);
          out.push_back(&e.dense.b);
          break;
        case Kind::conv1d:
          out.push_back(&e.conv.kernels);
          out.push_back(&e.conv.bias);
          break;
        case Kind::lstm:
        case Kind::gru:
          for (auto& W : e.cell.W) out.push_back(&W);
          for (auto& U : e.cell.U) out.push_back(&U);
          for (auto& b : e.cell.b) out.push_back(&b);
          break;
      }
    }
    return out;
  }

  io::Checkpoint to_checkpoint() const {
    io::Checkpoint cp;
    auto& self = const_cast<Sequential&>(*this);
    std::vector<Tensor*> params = self.parameters();
    for (std::size_t i = 0; i < params.size(); ++i)
      cp["param" + std::to_string(i)] = *params[i];
    return cp;
  }

  void load_checkpoint(const io::Checkpoint& cp) {
    std::vector<Tensor*> params = parameters();
    if (cp.size() != params.size())
      throw std::runtime_error("net: checkpoint has " +
                               std::to_string(cp.size()) + " tensors, net has " +
                               std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto it = cp.find("param" + std::to_string(i));
      if (it == cp.end())
        throw std::runtime_error("net: checkpoint missing param" +
                                 std::to_string(i));
      params[i]->require_same_shape(it->second, "load_checkpoint");
      *params[i] = it->second;
    }
  }
};

}  // namespace dasp::nn
