#pragma once

#include "mpal/errors.hpp"
#include "mpal/lattice.hpp"
#include "mpal/rng.hpp"
#include "mpal/random_field.hpp"
#include "mpal/hamiltonian.hpp"
#include "mpal/spectral.hpp"
#include "mpal/msa.hpp"
#include "mpal/radial_descent.hpp"
#include "mpal/stats.hpp"
#include "mpal/parallel.hpp"
#include "mpal/io.hpp"
#include "mpal/experiments.hpp"
#include "mpal/version.hpp"
