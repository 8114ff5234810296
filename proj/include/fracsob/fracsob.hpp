#pragma once

#include "common.hpp"
#include "manifold.hpp"
#include "kernel.hpp"
#include "pairs.hpp"
#include "quadrature.hpp"
#include "sobolev.hpp"
#include "fields.hpp"
#include "euclidean.hpp"
#include "bubbles.hpp"
#include "solver.hpp"
#include "io.hpp"
