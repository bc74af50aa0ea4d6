#pragma once

#include "svbrd/classification.hpp"
#include "svbrd/error.hpp"
#include "svbrd/features.hpp"
#include "svbrd/io.hpp"
#include "svbrd/kalman.hpp"
#include "svbrd/kinematics.hpp"
#include "svbrd/lane_change.hpp"
#include "svbrd/library_io.hpp"
#include "svbrd/llm/backend.hpp"
#include "svbrd/llm/prompts.hpp"
#include "svbrd/llm/response_parser.hpp"
#include "svbrd/metrics.hpp"
#include "svbrd/pipeline.hpp"
#include "svbrd/predicate.hpp"
#include "svbrd/rule.hpp"
#include "svbrd/samples.hpp"
#include "svbrd/seed_library.hpp"
#include "svbrd/synth.hpp"
#include "svbrd/trajectory.hpp"
#include "svbrd/types.hpp"
#include "svbrd/verification.hpp"
