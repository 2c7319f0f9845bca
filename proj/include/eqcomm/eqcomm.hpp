#pragma once

// Umbrella header.

#include "eqcomm/bits.hpp"
#include "eqcomm/complexlin.hpp"
#include "eqcomm/error.hpp"
#include "eqcomm/factorization.hpp"
#include "eqcomm/gf2codes.hpp"
#include "eqcomm/parallel.hpp"
#include "eqcomm/protocols_classical.hpp"
#include "eqcomm/protocols_quantum.hpp"
#include "eqcomm/random.hpp"
#include "eqcomm/ranks.hpp"
#include "eqcomm/rational.hpp"
