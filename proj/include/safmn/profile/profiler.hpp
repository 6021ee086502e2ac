#pragma once

#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "safmn/error.hpp"
#include "safmn/model/blocks.hpp"
#include "safmn/model/config.hpp"
#include "safmn/model/safmn.hpp"

namespace safmn {

// conv_only: multiply-accumulates of convolutions, nothing else.
// reference_tool: additionally counts the auxiliary ops a common PyTorch
// FLOP counter charges for: 1 per output element of nearest interpolation,
// 1 per input element of adaptive average pooling, 5 per element of a
// training-mode affine batch norm.
enum class FlopConvention { conv_only, reference_tool };

struct LayerRecord {
  std::string name;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t flops = 0;
  std::uint64_t acts = 0;

  friend bool operator==(const LayerRecord&, const LayerRecord&) = default;
};

struct ComplexityReport {
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  FlopConvention convention = FlopConvention::conv_only;
  std::vector<LayerRecord> records;
  LayerRecord total{"TOTAL", "total"};
};

namespace detail {

class ReportBuilder {
 public:
  ReportBuilder(std::size_t h, std::size_t w, FlopConvention conv) {
    rep_.in_h = h;
    rep_.in_w = w;
    rep_.convention = conv;
  }

  void conv(std::string name, std::size_t c_in, std::size_t c_out, std::size_t k,
            std::size_t groups, std::size_t h, std::size_t w) {
    const std::uint64_t per_out = (c_in / groups) * k * k;
    const std::uint64_t outs = static_cast<std::uint64_t>(c_out) * h * w;
    add({std::move(name), groups > 1 && groups == c_in ? "dwconv" : "conv",
         per_out * c_out + c_out, per_out * outs, outs});
  }

  void norm(std::string name, NormKind kind, std::size_t c, std::size_t h, std::size_t w) {
    if (kind == NormKind::none) return;
    LayerRecord r{std::move(name), to_string(kind)};
    if (kind == NormKind::layernorm || kind == NormKind::batchnorm) r.params = 2 * c;
    if (kind == NormKind::batchnorm && aux()) r.flops = 5ull * c * h * w;
    add(std::move(r));
  }

  // Parameter-free op with an optional auxiliary FLOP charge.
  void aux_op(std::string name, std::string kind, std::uint64_t charge) {
    add({std::move(name), std::move(kind), 0, aux() ? charge : 0, 0});
  }

  bool aux() const { return rep_.convention == FlopConvention::reference_tool; }

  ComplexityReport take() { return std::move(rep_); }

 private:
  void add(LayerRecord r) {
    rep_.total.params += r.params;
    rep_.total.flops += r.flops;
    rep_.total.acts += r.acts;
    rep_.records.push_back(std::move(r));
  }

  ComplexityReport rep_;
};

inline void profile_safm(ReportBuilder& b, const std::string& p, const VariantSpec& v,
                         std::size_t c, std::size_t h, std::size_t w) {
  const SafmSwitches& sw = v.safm;
  if (sw.multiscale) {
    const std::size_t part = c / kPyramidLevels;
    for (std::size_t i = 0; i < kPyramidLevels; ++i) {
      const std::string id = std::to_string(i);
      const bool pooled = i > 0 && !v.drop_scales.contains(1 << i);
      if (!pooled) {
        b.conv(p + ".dw." + id, part, part, 3, part, h, w);
        continue;
      }
      const std::size_t ph = pyramid_size(h, i), pw = pyramid_size(w, i);
      switch (v.pool) {
        case PoolKind::max: b.aux_op(p + ".pool." + id, "maxpool", 0); break;
        case PoolKind::avg: b.aux_op(p + ".pool." + id, "avgpool", std::uint64_t{part} * h * w); break;
        case PoolKind::nearest:
          b.aux_op(p + ".pool." + id, "interp", std::uint64_t{part} * ph * pw);
          break;
      }
      b.conv(p + ".dw." + id, part, part, 3, part, ph, pw);
      b.aux_op(p + ".upsample." + id, "interp", std::uint64_t{part} * h * w);
    }
  } else {
    b.conv(p + ".dw.0", c, c, 3, c, h, w);
  }
  if (sw.aggregation) b.conv(p + ".aggr", c, c, 1, 1, h, w);
}

inline void profile_mixer(ReportBuilder& b, const std::string& p, MixerKind kind, std::size_t c,
                          std::size_t h, std::size_t w) {
  const std::size_t hidden = 2 * c;
  b.conv(p + ".expand", c, hidden, kind == MixerKind::channel_mlp ? 1 : 3, 1, h, w);
  if (kind == MixerKind::inverted_residual) b.conv(p + ".dw", hidden, hidden, 3, hidden, h, w);
  if (kind == MixerKind::ccm_with_se) {
    b.aux_op(p + ".se.pool", "avgpool", std::uint64_t{hidden} * h * w);
    b.conv(p + ".se.reduce", hidden, hidden / 4, 1, 1, 1, 1);
    b.conv(p + ".se.expand", hidden / 4, hidden, 1, 1, 1, 1);
  }
  b.conv(p + ".project", hidden, c, 1, 1, h, w);
}

}  // namespace detail

/// Symbolic complexity profile of `cfg` for an LR input of in_h x in_w. No
/// tensors are allocated.
inline ComplexityReport profile_model(const ModelConfig& cfg, std::size_t in_h, std::size_t in_w,
                                      FlopConvention conv = FlopConvention::conv_only) {
  validate(cfg);
  if (in_h == 0 || in_w == 0) throw DimensionError("profile: input size must be positive");
  const std::size_t c = cfg.channels;
  const VariantSpec& v = cfg.variant;
  detail::ReportBuilder b(in_h, in_w, conv);
  b.conv("head", 3, c, 3, 1, in_h, in_w);
  for (std::size_t i = 0; i < cfg.num_blocks; ++i) {
    const std::string p = "blocks." + std::to_string(i);
    if (v.safm.enabled) {
      b.norm(p + ".norm1", v.norm, c, in_h, in_w);
      detail::profile_safm(b, p + ".safm", v, c, in_h, in_w);
    }
    if (v.mixer != MixerKind::none) {
      b.norm(p + ".norm2", v.norm, c, in_h, in_w);
      detail::profile_mixer(b, p + ".ccm", v.mixer, c, in_h, in_w);
    }
  }
  b.conv("tail", c, 3 * cfg.scale * cfg.scale, 3, 1, in_h, in_w);
  b.aux_op("shuffle", "shuffle", 0);
  return b.take();
}

inline std::uint64_t count_params(const ModelConfig& cfg) { return profile_model(cfg, 1, 1).total.params; }

inline std::uint64_t count_flops(const ModelConfig& cfg, std::size_t in_h, std::size_t in_w,
                                 FlopConvention conv = FlopConvention::conv_only) {
  return profile_model(cfg, in_h, in_w, conv).total.flops;
}

inline std::uint64_t count_acts(const ModelConfig& cfg, std::size_t in_h, std::size_t in_w) {
  return profile_model(cfg, in_h, in_w).total.acts;
}

template <class T>
std::uint64_t count_params(const SafmnModel<T>& model) { return count_params(model.config()); }

template <class T>
std::uint64_t count_flops(const SafmnModel<T>& model, std::size_t in_h, std::size_t in_w,
                          FlopConvention conv = FlopConvention::conv_only) {
  return count_flops(model.config(), in_h, in_w, conv);
}

template <class T>
std::uint64_t count_acts(const SafmnModel<T>& model, std::size_t in_h, std::size_t in_w) {
  return count_acts(model.config(), in_h, in_w);
}

enum class ReportFormat { table, csv, json_lines };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "table") return ReportFormat::table;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json-lines" || s == "jsonl") return ReportFormat::json_lines;
  throw UsageError("unknown report format '" + std::string(s) + "' (expected table, csv or json-lines)");
}

/// Columns: name, kind, params, flops, acts; the last row is TOTAL.
inline std::string emit_report(const ComplexityReport& rep, ReportFormat fmt) {
  std::ostringstream os;
  std::vector<const LayerRecord*> rows;
  for (const auto& r : rep.records) rows.push_back(&r);
  rows.push_back(&rep.total);
  switch (fmt) {
    case ReportFormat::table: {
      std::size_t wname = 4;
      for (const auto* r : rows) wname = std::max(wname, r->name.size());
      auto line = [&](const std::string& n, const std::string& k, const std::string& p,
                      const std::string& f, const std::string& a) {
        os << std::left << std::setw(static_cast<int>(wname)) << n << "  " << std::setw(9) << k
           << std::right << std::setw(10) << p << std::setw(16) << f << std::setw(13) << a << '\n';
      };
      os << "# input " << rep.in_h << "x" << rep.in_w << '\n';
      line("name", "kind", "params", "flops", "acts");
      for (const auto* r : rows) {
        line(r->name, r->kind, std::to_string(r->params), std::to_string(r->flops),
             std::to_string(r->acts));
      }
      break;
    }
    case ReportFormat::csv:
      os << "name,kind,params,flops,acts\n";
      for (const auto* r : rows) {
        os << r->name << ',' << r->kind << ',' << r->params << ',' << r->flops << ',' << r->acts << '\n';
      }
      break;
    case ReportFormat::json_lines:
      for (const auto* r : rows) {
        nlohmann::ordered_json j;
        j["name"] = r->name;
        j["kind"] = r->kind;
        j["params"] = r->params;
        j["flops"] = r->flops;
        j["acts"] = r->acts;
        os << j.dump() << '\n';
      }
      break;
  }
  return os.str();
}

inline std::string emit_report(const ComplexityReport& rep, std::string_view fmt) {
  return emit_report(rep, report_format_from_string(fmt));
}

}  // namespace safmn
