#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "deblur/dataset.hpp"
#include "deblur/metrics.hpp"
#include "deblur/tensor.hpp"

namespace deblur {

struct MetricRow {
    std::string id;
    double ssim = 0.0;
    double psnr = 0.0; // +inf marks a zero-error pair
};

struct RowError {
    std::string id;
    std::string message;
};

/// Per-pair SSIM/PSNR rows in manifest order plus the failures that were
/// skipped. Aggregates are over the successful rows only.
struct MetricReport {
    std::vector<MetricRow> rows;
    std::vector<RowError> errors;

    /// NaN when there are no rows.
    double mean_ssim() const;

    /// Mean over the finite rows; +inf when every row is infinite, NaN
    /// when there are no rows.
    double mean_psnr() const;
};

using Predictor = std::function<Tensor(const Tensor&)>;

/// Runs the predictor over each pair's degraded image and scores it
/// against the clean reference. Unreadable or mismatched pairs become
/// error entries; row order always matches the input order. `threads > 1`
/// fans rows out across workers without changing any result.
MetricReport evaluate_pairs(const std::vector<PairRow>& pairs, const Predictor& predictor,
                            const SsimParams& params, int threads = 1);

/// CSV: header `id,ssim,psnr`, six decimals, literal `inf` for the
/// infinite marker, final line `mean,<ssim>,<psnr>`.
void write_metric_csv(const MetricReport& report, const std::filesystem::path& path);

std::string format_fixed6(double v);

} // namespace deblur
