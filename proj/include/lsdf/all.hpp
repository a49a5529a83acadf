#pragma once

// Convenience header pulling in the whole toolkit.

#include "lsdf/acpf.hpp"
#include "lsdf/case_io.hpp"
#include "lsdf/case_model.hpp"
#include "lsdf/error.hpp"
#include "lsdf/evaluation.hpp"
#include "lsdf/factor_io.hpp"
#include "lsdf/factor_matrix.hpp"
#include "lsdf/lsdf.hpp"
#include "lsdf/matpower.hpp"
#include "lsdf/ptdf.hpp"
#include "lsdf/report_io.hpp"
#include "lsdf/sample_store.hpp"
#include "lsdf/sampling.hpp"
#include "lsdf/text.hpp"
