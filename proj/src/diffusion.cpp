#include "splatedit/diffusion.hpp"

#include <cmath>

#include "splatedit/errors.hpp"

namespace splatedit {

NoiseSchedule make_schedule(int timesteps, double beta_start, double beta_end) {
    if (timesteps < 1) throw ConfigError("schedule: timesteps must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw ConfigError("schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.beta = Eigen::VectorXd::Zero(timesteps + 1);
    s.alpha_bar = Eigen::VectorXd::Zero(timesteps + 1);
    s.sigma = Eigen::VectorXd::Zero(timesteps + 1);
    s.alpha_bar[0] = 1.0;
    for (int t = 1; t <= timesteps; ++t) {
        s.beta[t] = timesteps == 1 ? beta_start
                                   : beta_start + (beta_end - beta_start) * (t - 1) / (timesteps - 1);
        s.alpha_bar[t] = s.alpha_bar[t - 1] * (1.0 - s.beta[t]);
        s.sigma[t] = std::sqrt(s.beta[t]);
    }
    return s;
}

TensorGrid<double> eps_to_mu(const TensorGrid<double>& z_t, const TensorGrid<double>& eps, int t,
                             const NoiseSchedule& sched) {
    z_t.require_same_shape(eps, "eps_to_mu");
    if (t < 1 || t > sched.timesteps) throw DataError("eps_to_mu: timestep out of range");
    const double beta = sched.beta[t];
    const double coeff = beta / std::sqrt(1.0 - sched.alpha_bar[t]);
    TensorGrid<double> mu = TensorGrid<double>::zeros_like(z_t);
    mu.data = (z_t.data - coeff * eps.data) / std::sqrt(1.0 - beta);
    return mu;
}

NoiseTrajectory forward_invert(const TensorGrid<double>& z0, const NoiseSchedule& sched, std::uint64_t seed,
                               const EpsFn& eps_fn) {
    const int T = sched.timesteps;
    NoiseTrajectory traj;
    traj.timesteps = T;
    traj.seed = seed;
    traj.latents.assign(T + 1, TensorGrid<double>::zeros_like(z0));
    traj.noise_maps.assign(T + 1, TensorGrid<double>::zeros_like(z0));
    traj.latents[0] = z0;

    Rng base(seed);
    for (int t = 1; t <= T; ++t) {
        Rng step_rng = base.split(static_cast<std::uint64_t>(t));
        const TensorGrid<double> eps_t = random_normal_like(z0, step_rng);
        traj.latents[t].data =
            std::sqrt(sched.alpha_bar[t]) * z0.data + std::sqrt(1.0 - sched.alpha_bar[t]) * eps_t.data;
    }
    for (int t = T; t >= 1; --t) {
        const TensorGrid<double> mu = eps_to_mu(traj.latents[t], eps_fn(traj.latents[t], t), t, sched);
        const TensorGrid<double>& z_prev = traj.latents[t - 1];
        if (sched.sigma[t] <= 0.0) {
            if (linf_diff(z_prev, mu) > 1e-9)
                throw NumericalError("forward_invert: sigma_t = 0 but z_{t-1} != mu (schedule/denoiser inconsistency)");
            continue;  // eta stays zero
        }
        traj.noise_maps[t].data = (z_prev.data - mu.data) / sched.sigma[t];
    }
    return traj;
}

TensorGrid<double> sample_step(const TensorGrid<double>& z_t, int t, const NoiseSchedule& sched,
                               const EpsFn& eps_fn, const TensorGrid<double>* noise, Rng* rng) {
    if (t < 1 || t > sched.timesteps) throw DataError("sample_step: timestep out of range");
    TensorGrid<double> out = eps_to_mu(z_t, eps_fn(z_t, t), t, sched);
    if (sched.sigma[t] <= 0.0) return out;
    if (noise != nullptr) {
        out.require_same_shape(*noise, "sample_step noise");
        out.data += sched.sigma[t] * noise->data;
    } else {
        if (rng == nullptr) throw DataError("sample_step: need either stored noise or an rng");
        const TensorGrid<double> fresh = random_normal_like(z_t, *rng);
        out.data += sched.sigma[t] * fresh.data;
    }
    return out;
}

TensorGrid<double> replay_trajectory(const NoiseTrajectory& traj, const NoiseSchedule& sched,
                                     const EpsFn& eps_fn) {
    if (traj.timesteps != sched.timesteps) throw DataError("replay: trajectory/schedule timestep mismatch");
    TensorGrid<double> z = traj.latents[traj.timesteps];
    for (int t = traj.timesteps; t >= 1; --t) z = sample_step(z, t, sched, eps_fn, &traj.noise_maps[t]);
    return z;
}

}  // namespace splatedit
