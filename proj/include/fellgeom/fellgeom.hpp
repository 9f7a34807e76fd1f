#pragma once

#include "fellgeom/matrix_core.hpp"
#include "fellgeom/groupoid.hpp"
#include "fellgeom/fell_bundle.hpp"
#include "fellgeom/representation.hpp"
#include "fellgeom/sheaf.hpp"
#include "fellgeom/dirac.hpp"
#include "fellgeom/io.hpp"
