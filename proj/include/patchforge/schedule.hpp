#pragma once

#include <cstddef>
#include <vector>

#include "patchforge/errors.hpp"

namespace patchforge {

// Diffusion noise schedule. Index convention: betas[t-1] belongs to
// timestep t for t = 1..T, and alpha_bar(0) == 1 (clean data).
struct NoiseSchedule {
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;  // alpha_bars[t-1] = prod_{s<=t} alpha_s
    std::size_t T = 0;

    static NoiseSchedule from_betas(std::vector<double> b) {
        NoiseSchedule s;
        s.betas = std::move(b);
        s.T = s.betas.size();
        if (s.T == 0) throw ConfigError("schedule: empty beta list");
        double bar = 1.0;
        for (double beta : s.betas) {
            if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("schedule: beta outside (0, 1)");
            double alpha = 1.0 - beta;
            bar *= alpha;
            s.alphas.push_back(alpha);
            s.alpha_bars.push_back(bar);
        }
        return s;
    }

    // Linear beta ramp, the common convention for stand-in backends.
    static NoiseSchedule linear(std::size_t timesteps, double beta_start = 1e-4,
                                double beta_end = 2e-2) {
        if (timesteps == 0) throw ConfigError("schedule: zero timesteps");
        std::vector<double> b(timesteps);
        for (std::size_t i = 0; i < timesteps; ++i)
            b[i] = timesteps == 1
                       ? beta_start
                       : beta_start + (beta_end - beta_start) * static_cast<double>(i) /
                                          static_cast<double>(timesteps - 1);
        return from_betas(std::move(b));
    }

    double alpha_bar(std::size_t t) const {
        if (t > T) throw RangeError("schedule: timestep beyond T");
        return t == 0 ? 1.0 : alpha_bars[t - 1];
    }
};

}  // namespace patchforge
