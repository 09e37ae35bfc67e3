#include "structkv/metrics.hpp"

#include <charconv>
#include <sstream>

namespace structkv {

namespace {

// Shortest round-trip decimal rendering; keeps CSV output byte-stable.
std::string format_real(Scalar v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw InternalError("format_real failed");
  return std::string(buf, ptr);
}

}  // namespace

Scalar attention_mass_recovery(const PrefillTrace& full_trace,
                               const IndexSet& retained, Index layer) {
  if (!full_trace.has_oracle()) {
    throw UsageError("recovery needs a reference trace run in oracle mode");
  }
  if (layer < 0 ||
      layer >= static_cast<Index>(full_trace.oracle_attention.size())) {
    throw UsageError("recovery: layer out of range");
  }
  const auto& heads = full_trace.oracle_attention[static_cast<std::size_t>(layer)];
  const Index n = heads.empty() ? 0 : heads[0].rows();
  const Index w_eff = std::min(full_trace.skv_cfg.window, n);

  Scalar acc = 0.0;
  Index rows_counted = 0;
  for (const auto& a : heads) {
    for (Index t = n - w_eff; t < n; ++t) {
      Scalar covered = 0.0;
      Scalar total = 0.0;
      for (Index j = 0; j < a.cols(); ++j) {
        const Scalar weight = a(t, j);
        total += weight;
        if (retained.contains(j)) covered += weight;
      }
      acc += total > 0.0 ? covered / total : 0.0;
      ++rows_counted;
    }
  }
  return rows_counted > 0 ? acc / static_cast<Scalar>(rows_counted) : 0.0;
}

FidelityReport recovery_report(const PrefillTrace& full_trace,
                               const PrefillTrace& policy_trace) {
  const auto n_layers = static_cast<Index>(policy_trace.layers.size());
  FidelityReport report;
  report.policy = policy_trace.policy;
  report.config_hash = policy_trace.config_hash;
  report.per_layer.resize(n_layers);
  for (Index l = 0; l < n_layers; ++l) {
    const auto& retained =
        policy_trace.layers[static_cast<std::size_t>(l)].kv_indices;
    report.per_layer[l] = attention_mass_recovery(full_trace, retained, l);
  }
  report.mean =
      n_layers > 0 ? report.per_layer.sum() / static_cast<Scalar>(n_layers)
                   : 0.0;
  return report;
}

FlopReport flop_report(const PrefillTrace& trace) {
  const auto& m = trace.model_cfg;
  const auto d = static_cast<Scalar>(m.head_dim);
  const auto heads = static_cast<Scalar>(m.n_heads);
  const auto groups = static_cast<Scalar>(m.n_kv_groups);
  const auto h = static_cast<Scalar>(m.hidden_dim);
  const auto mlp = static_cast<Scalar>(m.mlp_dim());
  const auto n_full = static_cast<Scalar>(trace.n_tokens);

  const auto attn_flops = [&](Scalar n) {
    return 2.0 * heads * n * n * d    // Q K^T
           + 2.0 * heads * n * n * d; // A V
  };
  const auto proj_flops = [&](Scalar n) {
    return 2.0 * n * h * (heads * d)        // Q
           + 2.0 * 2.0 * n * h * (groups * d)  // K, V
           + 2.0 * n * (heads * d) * h;     // output
  };
  const auto mlp_flops = [&](Scalar n) {
    return 3.0 * 2.0 * n * h * mlp;  // gate, up, down
  };

  FlopReport report;
  report.pivot_layer = trace.pivot.pivot_layer;
  Scalar post_pivot = 0.0;
  Scalar post_pivot_full = 0.0;
  for (const auto& rec : trace.layers) {
    const auto n = static_cast<Scalar>(rec.n_current);
    report.attention_per_layer.push_back(attn_flops(n));
    report.projection_per_layer.push_back(proj_flops(n));
    report.mlp_per_layer.push_back(mlp_flops(n));
    report.attention_per_layer_full.push_back(attn_flops(n_full));
    report.total += attn_flops(n) + proj_flops(n) + mlp_flops(n);
    report.total_full += attn_flops(n_full) + proj_flops(n_full) + mlp_flops(n_full);
    if (report.pivot_layer >= 0 && rec.layer > report.pivot_layer) {
      post_pivot += attn_flops(n);
      post_pivot_full += attn_flops(n_full);
    }
  }
  report.total_ratio =
      report.total_full > 0.0 ? report.total / report.total_full : 1.0;
  report.post_pivot_attention_ratio =
      post_pivot_full > 0.0 ? post_pivot / post_pivot_full : 1.0;
  return report;
}

std::string recovery_csv(const FidelityReport& report,
                         std::uint64_t manifest_hash) {
  std::ostringstream os;
  os << "# manifest_hash=" << manifest_hash << "\n";
  os << "layer,policy,recovery\n";
  for (Index l = 0; l < report.per_layer.size(); ++l) {
    os << l << "," << report.policy << "," << format_real(report.per_layer[l])
       << "\n";
  }
  return os.str();
}

std::string flop_csv(const FlopReport& report, std::uint64_t manifest_hash) {
  std::ostringstream os;
  os << "# manifest_hash=" << manifest_hash << "\n";
  os << "# attention = 2*H*n^2*d (scores) + 2*H*n^2*d (context);"
        " projections = 2*n*h*(H*d) + 4*n*h*(G*d) + 2*n*(H*d)*h;"
        " mlp = 6*n*h*m\n";
  os << "layer,attention_flops,projection_flops,mlp_flops,attention_flops_full\n";
  for (std::size_t l = 0; l < report.attention_per_layer.size(); ++l) {
    os << l << "," << format_real(report.attention_per_layer[l]) << ","
       << format_real(report.projection_per_layer[l]) << ","
       << format_real(report.mlp_per_layer[l]) << ","
       << format_real(report.attention_per_layer_full[l]) << "\n";
  }
  os << "# total=" << format_real(report.total)
     << " total_full=" << format_real(report.total_full)
     << " total_ratio=" << format_real(report.total_ratio)
     << " post_pivot_attention_ratio="
     << format_real(report.post_pivot_attention_ratio) << "\n";
  return os.str();
}

}  // namespace structkv
