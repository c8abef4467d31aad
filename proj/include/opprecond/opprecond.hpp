#pragma once

#include "opprecond/quadrature.hpp"
#include "opprecond/mesh.hpp"
#include "opprecond/discretization.hpp"
#include "opprecond/operators.hpp"
#include "opprecond/precond.hpp"
#include "opprecond/spectral.hpp"
#include "opprecond/io.hpp"
#include "opprecond/bench.hpp"
