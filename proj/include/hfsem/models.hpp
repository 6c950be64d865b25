#pragma once

// The three candidate models of the simulation study.

#include "hfsem/semspec.hpp"

namespace hfsem {

/// One-factor exogenous, two-factor endogenous model with simple
/// structure (q = 22). Correctly specified for the bundled truth.
SemSpec model1();
/// Model 1 plus a cross loading of x7 on eta_2 (q = 23). Nests Model 1.
SemSpec model2();
/// Single endogenous factor (q = 21). Misspecified for the bundled truth.
SemSpec model3();

/// Truth-matching parameter vectors.
VectorXd model1_theta0();
VectorXd model2_theta0();

}  // namespace hfsem
