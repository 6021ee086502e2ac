#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "safmn/error.hpp"

namespace safmn {

enum class PoolKind { max, avg, nearest };
enum class AttnKind { gelu, sigmoid, none };
enum class MixerKind { ccm, ccm_with_se, channel_mlp, inverted_residual, none };
enum class NormKind { layernorm, none, batchnorm, frozen_batchnorm, l2 };

// Batch norm uses batch statistics in train mode and running statistics in eval mode.
enum class Mode { train, eval };

/// Which parts of the spatially-adaptive modulation block are present.
/// `enabled = false` removes the block (and its preceding norm) entirely.
struct SafmSwitches {
  bool enabled = true;
  bool modulation = true;   // product with the block input
  bool multiscale = true;   // pooled pyramid; otherwise one full-resolution depthwise conv
  bool aggregation = true;  // 1x1 conv after the concat

  friend bool operator==(const SafmSwitches&, const SafmSwitches&) = default;
};

struct VariantSpec {
  SafmSwitches safm{};
  PoolKind pool = PoolKind::max;
  AttnKind attn = AttnKind::gelu;
  MixerKind mixer = MixerKind::ccm;
  NormKind norm = NormKind::layernorm;
  // Pyramid levels (2, 4, 8) whose downsampling is skipped; that channel
  // group is then convolved at full resolution.
  std::set<int> drop_scales;

  friend bool operator==(const VariantSpec&, const VariantSpec&) = default;
};

struct ModelConfig {
  std::size_t num_blocks = 8;
  std::size_t channels = 36;
  std::size_t scale = 4;
  VariantSpec variant{};

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void validate(const ModelConfig& cfg) {
  if (cfg.channels == 0 || cfg.channels % 4 != 0) {
    throw ConfigError("channels must be a positive multiple of 4, got " +
                      std::to_string(cfg.channels));
  }
  if (cfg.scale < 1) throw ConfigError("scale must be >= 1");
  if (cfg.num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
  for (int s : cfg.variant.drop_scales) {
    if (s != 2 && s != 4 && s != 8) {
      throw ConfigError("drop_scales entries must be 2, 4 or 8, got " + std::to_string(s));
    }
  }
  if (!cfg.variant.drop_scales.empty() &&
      !(cfg.variant.safm.enabled && cfg.variant.safm.multiscale)) {
    throw ConfigError("drop_scales requires the multi-scale representation");
  }
}

// --- text form used by checkpoints and the CLI -----------------------------

inline std::string to_string(PoolKind k) {
  switch (k) {
    case PoolKind::max: return "max";
    case PoolKind::avg: return "avg";
    case PoolKind::nearest: return "nearest";
  }
  return "?";
}
inline std::string to_string(AttnKind k) {
  switch (k) {
    case AttnKind::gelu: return "gelu";
    case AttnKind::sigmoid: return "sigmoid";
    case AttnKind::none: return "none";
  }
  return "?";
}
inline std::string to_string(MixerKind k) {
  switch (k) {
    case MixerKind::ccm: return "ccm";
    case MixerKind::ccm_with_se: return "ccm_with_se";
    case MixerKind::channel_mlp: return "channel_mlp";
    case MixerKind::inverted_residual: return "inverted_residual";
    case MixerKind::none: return "none";
  }
  return "?";
}
inline std::string to_string(NormKind k) {
  switch (k) {
    case NormKind::layernorm: return "layernorm";
    case NormKind::none: return "none";
    case NormKind::batchnorm: return "batchnorm";
    case NormKind::frozen_batchnorm: return "frozen_batchnorm";
    case NormKind::l2: return "l2";
  }
  return "?";
}

namespace detail {
template <class E>
E parse_enum(std::string_view text, std::initializer_list<E> all, const char* axis) {
  for (E e : all) {
    if (to_string(e) == text) return e;
  }
  throw ConfigError(std::string("unknown ") + axis + " value '" + std::string(text) + "'");
}
}  // namespace detail

inline std::string safm_to_string(const SafmSwitches& s) {
  if (!s.enabled) return "none";
  if (s.modulation && s.multiscale && s.aggregation) return "full";
  std::string out;
  auto add = [&](const char* t) { out += out.empty() ? t : std::string("+") + t; };
  if (!s.modulation) add("no_fm");
  if (!s.multiscale) add("no_mr");
  if (!s.aggregation) add("no_fa");
  return out;
}

inline SafmSwitches safm_from_string(std::string_view text) {
  SafmSwitches s;
  if (text == "full") return s;
  if (text == "none") {
    s.enabled = false;
    return s;
  }
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('+', pos), text.size());
    const std::string_view tok = text.substr(pos, end - pos);
    if (tok == "no_fm") {
      s.modulation = false;
    } else if (tok == "no_mr") {
      s.multiscale = false;
    } else if (tok == "no_fa") {
      s.aggregation = false;
    } else {
      throw ConfigError("unknown safm value '" + std::string(text) + "'");
    }
    pos = end + 1;
  }
  return s;
}

/// "safm=full;pool=max;attn=gelu;mixer=ccm;norm=layernorm;drop="
inline std::string to_string(const VariantSpec& v) {
  std::ostringstream os;
  os << "safm=" << safm_to_string(v.safm) << ";pool=" << to_string(v.pool)
     << ";attn=" << to_string(v.attn) << ";mixer=" << to_string(v.mixer)
     << ";norm=" << to_string(v.norm) << ";drop=";
  bool first = true;
  for (int s : v.drop_scales) {
    os << (first ? "" : ",") << s;
    first = false;
  }
  return os.str();
}

inline VariantSpec variant_from_string(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find(';', pos), text.size());
    const std::string_view item = text.substr(pos, end - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string_view::npos) throw ConfigError("malformed variant item '" + std::string(item) + "'");
    kv[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    pos = end + 1;
  }
  VariantSpec v;
  for (const auto& [key, value] : kv) {
    if (key == "safm") {
      v.safm = safm_from_string(value);
    } else if (key == "pool") {
      v.pool = detail::parse_enum(value, {PoolKind::max, PoolKind::avg, PoolKind::nearest}, "pool");
    } else if (key == "attn") {
      v.attn = detail::parse_enum(value, {AttnKind::gelu, AttnKind::sigmoid, AttnKind::none}, "attn");
    } else if (key == "mixer") {
      v.mixer = detail::parse_enum(value,
                                   {MixerKind::ccm, MixerKind::ccm_with_se, MixerKind::channel_mlp,
                                    MixerKind::inverted_residual, MixerKind::none},
                                   "mixer");
    } else if (key == "norm") {
      v.norm = detail::parse_enum(value,
                                  {NormKind::layernorm, NormKind::none, NormKind::batchnorm,
                                   NormKind::frozen_batchnorm, NormKind::l2},
                                  "norm");
    } else if (key == "drop") {
      std::size_t p = 0;
      while (p < value.size()) {
        const std::size_t e = std::min(value.find(',', p), value.size());
        try {
          v.drop_scales.insert(std::stoi(value.substr(p, e - p)));
        } catch (const std::exception&) {
          throw ConfigError("malformed drop_scales '" + value + "'");
        }
        p = e + 1;
      }
    } else {
      throw ConfigError("unknown variant key '" + key + "'");
    }
  }
  return v;
}

}  // namespace safmn
