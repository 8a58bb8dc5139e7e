#pragma once

// Umbrella header.

#include "pathmeasure/bernoulli.hpp"
#include "pathmeasure/channels.hpp"
#include "pathmeasure/correlations.hpp"
#include "pathmeasure/csv.hpp"
#include "pathmeasure/decay.hpp"
#include "pathmeasure/errors.hpp"
#include "pathmeasure/hamiltonian.hpp"
#include "pathmeasure/integrators.hpp"
#include "pathmeasure/numeric.hpp"
#include "pathmeasure/scattering.hpp"
#include "pathmeasure/semiclassical.hpp"
#include "pathmeasure/shooting.hpp"
#include "pathmeasure/version.hpp"
