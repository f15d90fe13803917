#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "ablr/meta_store.hpp"

namespace ablr {

enum class AcquisitionKind { expected_improvement, greedy_mean };
enum class TieBreak { lowest_index, seeded_random };

struct AcquisitionConfig {
    AcquisitionKind kind = AcquisitionKind::expected_improvement;
    double xi = 0.01;
    TieBreak tie_break = TieBreak::lowest_index;
    std::uint64_t tie_seed = 0;
};

double std_normal_pdf(double x);
double std_normal_cdf(double x);

// EI = sigma*[gamma*Phi(gamma) + N(gamma;0,1)] with
// gamma = (mu - y_best - xi)/sigma, for maximization. sigma = 0 yields 0.
double expected_improvement(double mu, double sigma, double y_best, double xi);

struct CandidatePrediction {
    PipelineId pipeline;
    double mu = 0.0;
    double sigma = 0.0;
};

// Argmax of the acquisition over unevaluated candidates. With no observation
// yet (y_best absent) the cold-start rule picks the largest predictive mean.
// Exact ties go to the lowest pipeline index (or a seeded random choice).
// Throws AllEvaluated when no candidate remains.
PipelineId select_next(const std::vector<CandidatePrediction>& predictions,
                       const std::unordered_set<std::int32_t>& evaluated,
                       std::optional<double> y_best, const AcquisitionConfig& config);

}  // namespace ablr
