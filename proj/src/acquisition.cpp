#include "ablr/acquisition.hpp"

#include <algorithm>
#include <cmath>

#include "ablr/errors.hpp"
#include "ablr/rng.hpp"

namespace ablr {

double std_normal_pdf(double x) {
    static const double kInvSqrt2Pi = 1.0 / std::sqrt(2.0 * M_PI);
    return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) {
    static const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
    return 0.5 * std::erfc(-x * kInvSqrt2);
}

double expected_improvement(double mu, double sigma, double y_best, double xi) {
    if (!(sigma > 0.0)) return 0.0;
    const double gamma = (mu - y_best - xi) / sigma;
    const double ei = sigma * (gamma * std_normal_cdf(gamma) + std_normal_pdf(gamma));
    return std::max(ei, 0.0);
}

PipelineId select_next(const std::vector<CandidatePrediction>& predictions,
                       const std::unordered_set<std::int32_t>& evaluated,
                       std::optional<double> y_best, const AcquisitionConfig& config) {
    std::vector<std::int32_t> best_ids;
    double best_value = 0.0;
    for (const auto& cand : predictions) {
        if (evaluated.count(cand.pipeline.index)) continue;
        double value;
        if (config.kind == AcquisitionKind::greedy_mean || !y_best.has_value()) {
            value = cand.mu;  // cold start falls back to the predictive mean
        } else {
            value = expected_improvement(cand.mu, cand.sigma, *y_best, config.xi);
        }
        if (best_ids.empty() || value > best_value) {
            best_value = value;
            best_ids.assign(1, cand.pipeline.index);
        } else if (value == best_value) {
            best_ids.push_back(cand.pipeline.index);
        }
    }
    if (best_ids.empty()) throw AllEvaluated("every candidate pipeline has been evaluated");
    std::sort(best_ids.begin(), best_ids.end());
    if (config.tie_break == TieBreak::seeded_random && best_ids.size() > 1) {
        Rng rng(derive_seed(config.tie_seed, {static_cast<std::uint64_t>(best_ids.size())}));
        return PipelineId{best_ids[rng.bounded(best_ids.size())]};
    }
    return PipelineId{best_ids.front()};
}

}  // namespace ablr
