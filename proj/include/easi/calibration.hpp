#pragma once

#include "easi/params.hpp"
#include "easi/welfare.hpp"

namespace easi::calibration {

// Built-in demo calibration for the 4-utility system (electricity, water,
// sewerage, gas). Price blocks and first-order Engel/demographic terms are
// anchored to the published point estimates; the unpublished entries
// (sewerage row/column, off-diagonal B, higher-order Engel terms, D) are
// completed so that every adding-up / homogeneity / symmetry constraint
// holds exactly.
EasiParams colombian_utilities();

// Small J=3, L=2, R=2 system used as ground truth in recovery experiments.
EasiParams recovery_truth();

// colombian_utilities() with the price blocks shrunk until the normalized Slutsky
// matrix at the representative point is safely negative semidefinite.
EasiParams concave_calibrated();

// Electricity-tax scenario on the published strata 4-6 figures: baseline
// rates, prices, quantities, users and own-price elasticities. Stratum share
// vectors come from the mean-difference tables; representative expenditures
// are calibrated so baseline per-household EVs reproduce the published cents
// values under the linearized rule.
welfare::TaxScenario electricity_tax_scenario(const EasiParams& params);

}  // namespace easi::calibration
