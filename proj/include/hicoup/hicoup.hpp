#ifndef HICOUP_HICOUP_HPP
#define HICOUP_HICOUP_HPP

#include "hicoup/bem.hpp"
#include "hicoup/cluster.hpp"
#include "hicoup/coupling.hpp"
#include "hicoup/dense.hpp"
#include "hicoup/dual_basis.hpp"
#include "hicoup/experiments.hpp"
#include "hicoup/fem.hpp"
#include "hicoup/geometry.hpp"
#include "hicoup/harith.hpp"
#include "hicoup/hmatrix.hpp"
#include "hicoup/mesh.hpp"
#include "hicoup/probe.hpp"
#include "hicoup/quadrature.hpp"
#include "hicoup/solver.hpp"

#endif
