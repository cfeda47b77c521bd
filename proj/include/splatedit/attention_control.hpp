#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "splatedit/denoiser.hpp"
#include "splatedit/diffusion.hpp"
#include "splatedit/prompt.hpp"

namespace splatedit {

/// Maps each edit-prompt token index to its source-prompt counterpart, or
/// nullopt when the token is new. Injective on the mapped part.
struct TokenAlignment {
    std::vector<std::optional<int>> target_to_source;

    int target_count() const { return static_cast<int>(target_to_source.size()); }
};

/// Greedy left-to-right exact string matching: each target token consumes the
/// first unconsumed source token with the same string.
inline TokenAlignment align_tokens(const PromptEmbedding& source, const PromptEmbedding& target) {
    if (source.token_count() == 0 || target.token_count() == 0)
        throw ConfigError("align_tokens: prompts must be nonempty");
    TokenAlignment ct;
    std::vector<bool> consumed(source.token_count(), false);
    for (const std::string& tok : target.tokens) {
        std::optional<int> match;
        for (int i = 0; i < source.token_count(); ++i) {
            if (!consumed[i] && source.tokens[i] == tok) {
                match = i;
                consumed[i] = true;
                break;
            }
        }
        ct.target_to_source.push_back(match);
    }
    return ct;
}

/// Cross-attention injection. While injection is active (t >= tau_cross),
/// column j comes from the source map at column CT(j); unmatched tokens and
/// inactive timesteps keep the target column. Rows are renormalized after a
/// genuine mix; if the substitution changed nothing the target map is
/// returned untouched so that injecting a branch's own maps is bitwise
/// neutral.
inline Eigen::MatrixXd inject_cross(const Eigen::MatrixXd& w_source, const Eigen::MatrixXd& w_target,
                                    double t, double tau_cross, const TokenAlignment& ct) {
    if (w_source.rows() != w_target.rows())
        throw DataError("inject_cross: row counts differ");
    if (ct.target_count() != w_target.cols())
        throw DataError("inject_cross: alignment does not cover the target tokens");
    if (t < tau_cross) return w_target;

    Eigen::MatrixXd out = w_target;
    bool changed = false;
    for (int j = 0; j < ct.target_count(); ++j) {
        const auto& src_col = ct.target_to_source[j];
        if (!src_col.has_value()) continue;
        if (*src_col < 0 || *src_col >= w_source.cols())
            throw DataError("inject_cross: alignment references a missing source column");
        if ((out.col(j).array() == w_source.col(*src_col).array()).all()) continue;
        out.col(j) = w_source.col(*src_col);
        changed = true;
    }
    if (!changed) return w_target;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double s = out.row(i).sum();
        if (s > 1e-300) out.row(i) /= s;
    }
    return out;
}

/// Self-attention injection: source map while t >= tau_self, else target.
inline Eigen::MatrixXd inject_self(const Eigen::MatrixXd& w_source, const Eigen::MatrixXd& w_target,
                                   double t, double tau_self) {
    if (w_source.rows() != w_target.rows() || w_source.cols() != w_target.cols())
        throw DataError("inject_self: shape mismatch");
    return t < tau_self ? w_target : w_source;
}

struct DualBranchConfig {
    double tau_cross = 0.0;
    double tau_self = 0.0;
    std::vector<int> cross_layers = {0, 1};  // layers where cross injection may fire
    std::vector<int> self_layers = {0, 1};
    /// Optional skip-feature transform for the edit branch (frequency
    /// annealing); the source branch always replays unmodified.
    std::function<TensorGrid<double>(int level, const TensorGrid<double>&)> edit_skip_tap;
};

struct DualBranchResult {
    TensorGrid<double> source_next, edit_next;
    AttentionRecord source_record;  // raw source maps
    AttentionRecord edit_record;    // maps as used by the edit branch (post-injection)
    Denoiser::Forward edit_forward;
};

/// One timestep of the dual-branch scheme: the source branch replays the
/// stored eta_t with prompt p and records its maps, then the edit branch
/// runs with prompt p*, overriding its maps per inject_cross/inject_self and
/// sharing the same eta_t. Source always runs first within the step.
DualBranchResult dual_branch_step(const Denoiser& denoiser, const NoiseSchedule& sched,
                                  const TensorGrid<double>& z_source_t, const TensorGrid<double>& z_edit_t,
                                  int t, const PromptEmbedding& p, const PromptEmbedding& p_star,
                                  const TokenAlignment& ct, const TensorGrid<double>& eta_t,
                                  const DualBranchConfig& config);

}  // namespace splatedit
