#pragma once

#include "mlkmc/ensemble.hpp"
#include "mlkmc/errors.hpp"
#include "mlkmc/fields.hpp"
#include "mlkmc/lattice.hpp"
#include "mlkmc/observables.hpp"
#include "mlkmc/oracle.hpp"
#include "mlkmc/potentials.hpp"
#include "mlkmc/random.hpp"
#include "mlkmc/rates.hpp"
#include "mlkmc/samplers.hpp"
#include "mlkmc/config.hpp"
#include "mlkmc/experiments.hpp"
#include "mlkmc/output.hpp"
#include "mlkmc/validate.hpp"
