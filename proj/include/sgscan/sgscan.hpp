#pragma once

#include "sgscan/anomaly_detector.hpp"
#include "sgscan/anonymizer.hpp"
#include "sgscan/chrono.hpp"
#include "sgscan/corpus_index.hpp"
#include "sgscan/datasources.hpp"
#include "sgscan/error.hpp"
#include "sgscan/evaluator.hpp"
#include "sgscan/failure_classifier.hpp"
#include "sgscan/log_model.hpp"
#include "sgscan/outage_detector.hpp"
#include "sgscan/parallel.hpp"
#include "sgscan/pipeline.hpp"
#include "sgscan/synthesizer.hpp"
#include "sgscan/text.hpp"
#include "sgscan/vicinity.hpp"

namespace sgscan {
inline constexpr const char* kVersion = "0.1.0";
}  // namespace sgscan
