#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "safmn/model/config.hpp"

namespace safmn {

struct NamedVariant {
  std::string name;
  std::string label;  // ablation row this configuration reproduces
  VariantSpec spec;
};

// Ablation configurations, keyed by kebab-case names.
inline const std::vector<NamedVariant>& variant_registry() {
  static const std::vector<NamedVariant> registry = [] {
    std::vector<NamedVariant> r;
    auto add = [&r](std::string name, std::string label, auto&& tweak) {
      VariantSpec v;
      tweak(v);
      r.push_back({std::move(name), std::move(label), v});
    };
    add("baseline", "Baseline", [](VariantSpec&) {});
    add("no-safm", "SAFM -> None", [](VariantSpec& v) { v.safm.enabled = false; });
    add("no-ccm", "CCM -> None", [](VariantSpec& v) { v.mixer = MixerKind::none; });
    add("safm-no-fm", "(a): w/o FM", [](VariantSpec& v) { v.safm.modulation = false; });
    add("safm-no-mr", "(b): w/o MR", [](VariantSpec& v) { v.safm.multiscale = false; });
    add("safm-no-fa", "(c): w/o FA", [](VariantSpec& v) { v.safm.aggregation = false; });
    add("safm-no-fm-mr", "(a) + (b)", [](VariantSpec& v) {
      v.safm.modulation = false;
      v.safm.multiscale = false;
    });
    add("safm-no-fm-fa", "(a) + (c)", [](VariantSpec& v) {
      v.safm.modulation = false;
      v.safm.aggregation = false;
    });
    add("safm-no-fm-mr-fa", "(a) + (b) + (c)", [](VariantSpec& v) {
      v.safm.modulation = false;
      v.safm.multiscale = false;
      v.safm.aggregation = false;
    });
    add("pool-avg", "AdaptiveMaxPool -> AdaptiveAvgPool",
        [](VariantSpec& v) { v.pool = PoolKind::avg; });
    add("pool-nearest", "AdaptiveMaxPool -> Nearest interpolate",
        [](VariantSpec& v) { v.pool = PoolKind::nearest; });
    add("attn-none", "GELU -> None", [](VariantSpec& v) { v.attn = AttnKind::none; });
    add("attn-sigmoid", "GELU -> Sigmoid", [](VariantSpec& v) { v.attn = AttnKind::sigmoid; });
    add("ccm-se", "w/ SE", [](VariantSpec& v) { v.mixer = MixerKind::ccm_with_se; });
    add("ccm-channel-mlp", "CCM -> Channel MLP",
        [](VariantSpec& v) { v.mixer = MixerKind::channel_mlp; });
    add("ccm-inverted-residual", "CCM -> Inverted residual block",
        [](VariantSpec& v) { v.mixer = MixerKind::inverted_residual; });
    add("no-ln", "LN -> None", [](VariantSpec& v) { v.norm = NormKind::none; });
    add("norm-bn", "LN -> BN", [](VariantSpec& v) { v.norm = NormKind::batchnorm; });
    add("norm-fbn", "LN -> FBN", [](VariantSpec& v) { v.norm = NormKind::frozen_batchnorm; });
    add("norm-l2", "LN -> L2 normalization", [](VariantSpec& v) { v.norm = NormKind::l2; });
    add("no-scale-8", "w/o Scale 8", [](VariantSpec& v) { v.drop_scales = {8}; });
    add("no-scale-8-4", "w/o Scale 8&4", [](VariantSpec& v) { v.drop_scales = {8, 4}; });
    add("no-scale-8-4-2", "w/o Scale 8&4&2", [](VariantSpec& v) { v.drop_scales = {8, 4, 2}; });
    return r;
  }();
  return registry;
}

inline std::optional<VariantSpec> find_variant(std::string_view name) {
  for (const auto& v : variant_registry()) {
    if (v.name == name) return v.spec;
  }
  return std::nullopt;
}

inline std::string variant_names(std::string_view sep = ", ") {
  std::string out;
  for (const auto& v : variant_registry()) {
    if (!out.empty()) out += sep;
    out += v.name;
  }
  return out;
}

}  // namespace safmn
