#pragma once

#include "fderiv/derivative.hpp"
#include "fderiv/error.hpp"
#include "fderiv/expr.hpp"
#include "fderiv/expr_function.hpp"
#include "fderiv/filterbase.hpp"
#include "fderiv/flimit.hpp"
#include "fderiv/oracle.hpp"
