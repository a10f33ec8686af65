#pragma once

#include "aaslab/aas.hpp"
#include "aaslab/common.hpp"
#include "aaslab/config.hpp"
#include "aaslab/ela.hpp"
#include "aaslab/functions.hpp"
#include "aaslab/generator.hpp"
#include "aaslab/io.hpp"
#include "aaslab/pipeline.hpp"
#include "aaslab/portfolio.hpp"
#include "aaslab/sampling.hpp"
#include "aaslab/selection.hpp"
#include "aaslab/svg.hpp"
#include "aaslab/trees.hpp"
