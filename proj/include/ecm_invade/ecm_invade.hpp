#pragma once

#include "ecm_invade/config.hpp"
#include "ecm_invade/diagnostics.hpp"
#include "ecm_invade/entropy_scheme.hpp"
#include "ecm_invade/errors.hpp"
#include "ecm_invade/explicit.hpp"
#include "ecm_invade/grid.hpp"
#include "ecm_invade/ic.hpp"
#include "ecm_invade/io.hpp"
#include "ecm_invade/model.hpp"
#include "ecm_invade/rk.hpp"
#include "ecm_invade/runner.hpp"
#include "ecm_invade/waves.hpp"
