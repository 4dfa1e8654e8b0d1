#pragma once

#include "gconc/autodiff.hpp"
#include "gconc/bounds.hpp"
#include "gconc/conditions.hpp"
#include "gconc/dual.hpp"
#include "gconc/errors.hpp"
#include "gconc/expr.hpp"
#include "gconc/gaussian.hpp"
#include "gconc/growth.hpp"
#include "gconc/interpolation.hpp"
#include "gconc/quadrature.hpp"
#include "gconc/random.hpp"
#include "gconc/report_io.hpp"
