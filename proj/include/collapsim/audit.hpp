#pragma once

// Offline checks of the identities the stepper is supposed to satisfy:
// probability bookkeeping across one recorded step, pointwise commutation
// of the conserved operators with the kick field, the three-line energy
// deviation decomposition, and the martingale property of branch-weight
// traces. Everything is a pure function of recorded data, so a failed run
// can be reaudited from disk.

#include <string>
#include <string_view>
#include <vector>

#include "collapsim/collapse.hpp"
#include "collapsim/grid.hpp"
#include "collapsim/operators.hpp"
#include "collapsim/potential.hpp"
#include "collapsim/spectral.hpp"

namespace collapsim {

struct AuditCheck {
    std::string name;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;       // max_residual <= tolerance, set in one place
};

struct AuditReport {
    std::vector<AuditCheck> checks;
    std::vector<double> series;    // optional per-step / per-checkpoint data

    bool all_pass() const;
    const AuditCheck* find(std::string_view name) const;
};

std::string to_text(const AuditReport& rep);

// Splits the density change across one recorded SDE step into transport,
// -div J dt with the current taken on `before`, and transfer,
// rho v (dxi* + dxi) with the kick field rebuilt on the replayed pre-kick
// state. Checks: "probability integral" (tolerance pinned at 1e-10) and
// "pointwise decomposition" (absolute residual vs pointwise_tol). With a
// region, "branch transfer" compares the integrated prediction over the
// region against the finite difference of the branch weight.
AuditReport density_change_decomposition(const WaveFunction& before,
                                         const WaveFunction& after,
                                         const PotentialSpec& pot,
                                         const CollapseParams& params,
                                         const NoiseIncrement& noise,
                                         double pointwise_tol,
                                         const Region* branch_region = nullptr,
                                         double branch_tol = 0.0);

enum class ConservedQ { P, L };

// max_i |Q(w psi) - w (Q psi)| over the grid, scaled by the largest
// derivative the grid can represent, with w the centered interaction shape
// (V - <V>) normalized to unit peak. The commutator vanishes identically
// because w depends only on the separation; what remains is the aliasing
// of the spectral product rule, which serves as the per-grid floor.
double operator_commutation_residual(const WaveFunction& psi,
                                     const PotentialFields& fields,
                                     ConservedQ which, SpectralWorkspace& ws);

// Checks over a recorded observable series: "per-step drift" (largest
// step-to-step change of <Q>), "total drift" (end-to-start change relative
// to the initial magnitude), and, when residual samples are supplied,
// "operator identity" (largest sampled commutation residual). The series
// field of the report holds the per-step changes. L needs a planar grid.
AuditReport conservation_report(const std::vector<Observables>& series,
                                const std::vector<double>& commutation_residuals,
                                ConservedQ which, double per_step_tol,
                                double total_rel_tol, double pointwise_tol);

// One-step energy deviation, each line divided by dt so the quadratic term
// reads as a deterministic heating rate: proportional_term is
// (dxi + dxi*) <H v>_sym / dt, gradient_term is Re(dxi <[H, v]>) / dt with
// the commutator taken from the analytic potential derivatives, and
// quadratic_term is sum_a (1/2 m_a) integral rho |grad_a v|^2, nonnegative
// by construction. ke_relativistic_correction is the closed-form
// first-order kinetic benchmark -<T>^2 / (2 rest_energy).
struct EnergyDeviationTerms {
    double proportional_term = 0.0;
    double gradient_term = 0.0;
    double quadratic_term = 0.0;
    double ke_relativistic_correction = 0.0;
};

EnergyDeviationTerms energy_deviation_terms(const WaveFunction& psi,
                                            const PotentialFields& fields,
                                            const CollapseParams& params,
                                            const GammaRecord& g,
                                            const NoiseIncrement& n,
                                            SpectralWorkspace& ws);

// Sample mean of mu^2 at every checkpoint against the shared start
// (column 0), in standard-error units; the worst checkpoint is the
// residual and 3 is the tolerance. Needs at least 100 equally long
// traces. The report series holds the per-checkpoint deviations.
AuditReport martingale_check(const std::vector<std::vector<double>>& traces);

}  // namespace collapsim
