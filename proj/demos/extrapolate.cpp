// Simulate a binary cohort, build its learning curve with the harness, fit
// both curve models and extrapolate to ten times the cohort size.

#include <cstdio>
#include <vector>

#include "lcurve/lcurve.hpp"

int main() {
    using namespace lcurve;

    SynthSpec spec;
    spec.n = 800;
    spec.coefficients = {0.9, 0.6, -0.4};
    spec.seed = 42;
    const Cohort cohort = generate_synthetic(spec);

    HarnessConfig cfg;
    cfg.total_n = cohort.size();
    cfg.m = 10;
    cfg.s1 = 50;
    cfg.k = 20;
    cfg.seed = 42;
    const PerformanceTable table = run_harness(cohort, cfg);
    std::printf("%zu points, %zu missing\n", table.points.size(), table.missing);

    const NlsFit nls = fit_nls(table.points);
    McmcConfig mcmc;
    mcmc.iterations = 2000;
    mcmc.burn_in = 1000;
    const GpFit gp = fit_gp(table.points, {}, mcmc);

    const std::vector<double> at{800.0, 8000.0};
    const auto pn = predict_nls(nls, at, 0.95, true);
    const auto pg = predict_gp(gp, at);
    std::printf("NLS  a=%.3f b=%.3f c=%.3f converged=%d\n", nls.params.a, nls.params.b, nls.params.c, nls.converged);
    for (std::size_t i = 0; i < at.size(); ++i) {
        std::printf("n=%6.0f  NLS %.3f [%.3f, %.3f]   GP %.3f [%.3f, %.3f]\n", at[i], pn.mean[i], pn.lower[i],
                    pn.upper[i], pg.mean[i], pg.lower[i], pg.upper[i]);
    }
    return 0;
}
