#pragma once

#include "finsler/types.hpp"
#include "finsler/norms.hpp"
#include "finsler/dual_geometry.hpp"
#include "finsler/check_report.hpp"
#include "finsler/domain.hpp"
#include "finsler/eigensolver.hpp"
#include "finsler/model1d.hpp"
#include "finsler/probes.hpp"
#include "finsler/analysis.hpp"
#include "finsler/report.hpp"
