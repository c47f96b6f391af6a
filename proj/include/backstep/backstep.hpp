#pragma once

/// Umbrella header for the backstepping library.

#include "acceptance.hpp"
#include "bound.hpp"
#include "characteristics.hpp"
#include "closed_form.hpp"
#include "controller.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "functions.hpp"
#include "kernel_field.hpp"
#include "motion_planner.hpp"
#include "observer.hpp"
#include "picard.hpp"
#include "reference_systems.hpp"
#include "simulator.hpp"
#include "system_model.hpp"
#include "transform.hpp"
#include "volterra.hpp"
