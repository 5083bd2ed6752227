#include "deblur/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <thread>

#include "deblur/image.hpp"

namespace deblur {

double MetricReport::mean_ssim() const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    for (const MetricRow& r : rows) acc += r.ssim;
    return acc / static_cast<double>(rows.size());
}

double MetricReport::mean_psnr() const {
    if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
    double acc = 0.0;
    std::size_t finite = 0;
    for (const MetricRow& r : rows) {
        if (std::isinf(r.psnr)) continue;
        acc += r.psnr;
        ++finite;
    }
    if (finite == 0) return std::numeric_limits<double>::infinity();
    return acc / static_cast<double>(finite);
}

MetricReport evaluate_pairs(const std::vector<PairRow>& pairs, const Predictor& predictor,
                            const SsimParams& params, int threads) {
    params.validate();
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");

    struct Slot {
        bool ok = false;
        MetricRow row;
        std::string error;
    };
    std::vector<Slot> slots(pairs.size());

    auto score_one = [&](std::size_t i) {
        Slot& slot = slots[i];
        slot.row.id = pairs[i].id;
        try {
            if (!pairs[i].has_clean())
                throw std::runtime_error("row has no clean reference");
            const Tensor degraded = to_tensor(read_image(pairs[i].degraded));
            const Tensor clean = to_tensor(read_image(pairs[i].clean));
            const Tensor restored = predictor(degraded);
            require_same_shape(restored, clean, "evaluate_pairs");
            slot.row.ssim = ssim(restored, clean, params);
            slot.row.psnr = psnr(restored, clean, params.dynamic_range);
            slot.ok = true;
        } catch (const std::exception& e) {
            slot.error = e.what();
        }
    };

    if (threads == 1 || pairs.size() < 2) {
        for (std::size_t i = 0; i < pairs.size(); ++i) score_one(i);
    } else {
        const std::size_t workers =
            std::min(static_cast<std::size_t>(threads), pairs.size());
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < pairs.size(); i += workers) score_one(i);
            });
        for (std::thread& t : pool) t.join();
    }

    // rows come out in manifest order regardless of worker scheduling
    MetricReport report;
    for (Slot& slot : slots) {
        if (slot.ok)
            report.rows.push_back(std::move(slot.row));
        else
            report.errors.push_back(RowError{slot.row.id, std::move(slot.error)});
    }
    return report;
}

std::string format_fixed6(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

void write_metric_csv(const MetricReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "id,ssim,psnr\n";
    for (const MetricRow& r : report.rows)
        out << r.id << ',' << format_fixed6(r.ssim) << ',' << format_fixed6(r.psnr) << '\n';
    out << "mean," << format_fixed6(report.mean_ssim()) << ',' << format_fixed6(report.mean_psnr())
        << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace deblur
