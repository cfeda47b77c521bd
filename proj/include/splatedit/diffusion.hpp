#pragma once

#include <Eigen/Core>
#include <functional>

#include "splatedit/grid_io.hpp"
#include "splatedit/tensor.hpp"

namespace splatedit {

/// Ancestral noise schedule. Arrays are indexed by timestep, entry 0 holding
/// the t=0 conventions (alpha_bar[0] = 1, beta[0] = sigma[0] = 0).
struct NoiseSchedule {
    int timesteps = 0;
    Eigen::VectorXd beta;
    Eigen::VectorXd alpha_bar;
    Eigen::VectorXd sigma;
};

/// Linear beta ramp; alpha_bar[t] = prod(1 - beta_s). sigma_t = sqrt(beta_t),
/// which is strictly positive at every step so the noise-map recovery below
/// is total (see README on the variance choice).
NoiseSchedule make_schedule(int timesteps, double beta_start, double beta_end);

/// Prompt-conditioned epsilon prediction; the prompt is baked into the
/// closure.
using EpsFn = std::function<TensorGrid<double>(const TensorGrid<double>& z_t, int t)>;

/// Posterior mean from an epsilon prediction:
/// mu = (z_t - beta_t / sqrt(1 - alpha_bar_t) * eps) / sqrt(1 - beta_t).
TensorGrid<double> eps_to_mu(const TensorGrid<double>& z_t, const TensorGrid<double>& eps, int t,
                             const NoiseSchedule& sched);

/// Builds the forward trajectory z_t = sqrt(alpha_bar_t) z0 +
/// sqrt(1 - alpha_bar_t) eps_t with eps_t drawn independently per timestep
/// from a per-step split of `seed`, then recovers the noise maps
/// eta_t = (z_{t-1} - mu(z_t, t)) / sigma_t. Replaying eta through
/// sample_step reproduces z0 up to float roundoff.
NoiseTrajectory forward_invert(const TensorGrid<double>& z0, const NoiseSchedule& sched, std::uint64_t seed,
                               const EpsFn& eps_fn);

/// One ancestral step z_{t-1} = mu(z_t, t) + sigma_t * noise. Pass a stored
/// eta_t for edit-friendly replay, or nullptr with an rng to draw fresh
/// noise (sigma_t = 0 suppresses the noise term).
TensorGrid<double> sample_step(const TensorGrid<double>& z_t, int t, const NoiseSchedule& sched,
                               const EpsFn& eps_fn, const TensorGrid<double>* noise, Rng* rng = nullptr);

/// Full replay from z_T through all stored noise maps; returns the
/// reconstructed z0.
TensorGrid<double> replay_trajectory(const NoiseTrajectory& traj, const NoiseSchedule& sched,
                                     const EpsFn& eps_fn);

}  // namespace splatedit
