#include "splatedit/attention_control.hpp"

#include <algorithm>

namespace splatedit {

DualBranchResult dual_branch_step(const Denoiser& denoiser, const NoiseSchedule& sched,
                                  const TensorGrid<double>& z_source_t, const TensorGrid<double>& z_edit_t,
                                  int t, const PromptEmbedding& p, const PromptEmbedding& p_star,
                                  const TokenAlignment& ct, const TensorGrid<double>& eta_t,
                                  const DualBranchConfig& config) {
    if (eta_t.size() == 0) throw DataError("dual_branch_step: missing noise map for timestep");

    DualBranchResult out;

    // source branch: plain replay, maps recorded
    Denoiser::Result src = denoiser.predict(z_source_t, t, p);
    out.source_record = src.record;
    out.source_next = eps_to_mu(z_source_t, src.eps, t, sched);
    out.source_next.data += sched.sigma[t] * eta_t.data;

    const auto enabled = [](const std::vector<int>& layers, int layer) {
        return std::find(layers.begin(), layers.end(), layer) != layers.end();
    };

    DenoiserHooks hooks;
    hooks.attention_tap = [&](int layer, AttentionKind kind, const Eigen::MatrixXd& computed) {
        if (kind == AttentionKind::Cross) {
            if (!enabled(config.cross_layers, layer)) return computed;
            const auto it = out.source_record.cross.find({layer, t});
            if (it == out.source_record.cross.end()) return computed;
            return inject_cross(it->second, computed, t, config.tau_cross, ct);
        }
        if (!enabled(config.self_layers, layer)) return computed;
        const auto it = out.source_record.self.find({layer, t});
        if (it == out.source_record.self.end()) return computed;
        return inject_self(it->second, computed, t, config.tau_self);
    };
    hooks.skip_tap = config.edit_skip_tap;

    out.edit_forward = denoiser.forward(z_edit_t, t, p_star, hooks);
    out.edit_record = out.edit_forward.record;
    out.edit_next = eps_to_mu(z_edit_t, out.edit_forward.eps, t, sched);
    out.edit_next.data += sched.sigma[t] * eta_t.data;
    return out;
}

}  // namespace splatedit
