#pragma once

#include "pam/adjoint.hpp"
#include "pam/contraction.hpp"
#include "pam/experiment.hpp"
#include "pam/models/crn.hpp"
#include "pam/models/dataset.hpp"
#include "pam/models/nn.hpp"
#include "pam/models/parallel.hpp"
#include "pam/models/scalar.hpp"
#include "pam/norms.hpp"
#include "pam/optimizer.hpp"
#include "pam/rng.hpp"
#include "pam/trace.hpp"
