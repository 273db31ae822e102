#include "bsdelab/domination.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bsdelab/csv.hpp"
#include "bsdelab/errors.hpp"

namespace bsdelab {

std::size_t BinSpec::total() const {
    std::size_t t = 1;
    for (std::size_t b : bins) t *= b;
    return t;
}

std::size_t BinSpec::locate(std::span<const double> x) const {
    std::size_t flat = 0;
    for (std::size_t j = 0; j < dim(); ++j) {
        if (!(x[j] >= lo[j] && x[j] < hi[j])) return total();
        auto b = static_cast<std::size_t>((x[j] - lo[j]) / width(j));
        b = std::min(b, bins[j] - 1);
        flat = flat * bins[j] + b;
    }
    return flat;
}

std::vector<double> BinSpec::center(std::size_t flat) const {
    std::vector<double> c(dim());
    for (std::size_t j = dim(); j-- > 0;) {
        const std::size_t b = flat % bins[j];
        flat /= bins[j];
        c[j] = lo[j] + (static_cast<double>(b) + 0.5) * width(j);
    }
    return c;
}

namespace {

void check_bins(const BinSpec& b) {
    if (b.dim() == 0 || b.dim() > 2) throw DimensionError("histograms support one or two dimensions");
    if (b.lo.size() != b.dim() || b.hi.size() != b.dim()) throw DimensionError("bin spec is inconsistent");
    for (std::size_t j = 0; j < b.dim(); ++j)
        if (b.bins[j] == 0 || !(b.hi[j] > b.lo[j])) throw std::invalid_argument("empty bin range");
}

std::size_t node_of(const PathEnsemble& ens, double s) {
    const long k = ens.grid.index_of(s, 1e-9);
    if (k < 0) throw std::invalid_argument("time " + std::to_string(s) + " is not a grid node");
    return static_cast<std::size_t>(k);
}

}  // namespace

BinSpec default_bins(const PathEnsemble& ens, std::size_t node, std::size_t count) {
    const std::size_t m = ens.dim;
    if (m > 2) throw DimensionError("histograms support one or two dimensions");
    BinSpec b;
    for (std::size_t j = 0; j < m; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t p = 0; p < ens.paths; ++p) mean += ens.state(node, p)[j];
        mean /= static_cast<double>(ens.paths);
        for (std::size_t p = 0; p < ens.paths; ++p) var += std::pow(ens.state(node, p)[j] - mean, 2);
        double sd = std::sqrt(var / static_cast<double>(ens.paths));
        if (!(sd > 0.0)) sd = 1.0;
        b.lo.push_back(mean - 5.0 * sd);
        b.hi.push_back(mean + 5.0 * sd);
        b.bins.push_back(count);
    }
    return b;
}

EmpiricalLaw estimate_law(const PathEnsemble& ens, double s, const BinSpec& bins) {
    check_bins(bins);
    if (bins.dim() != ens.dim) throw DimensionError("bin spec and ensemble differ in dimension");
    const std::size_t k = node_of(ens, s);
    EmpiricalLaw law;
    law.s = ens.grid.node(k);
    law.bins = bins;
    law.samples = ens.paths;
    std::vector<std::size_t> counts(bins.total() + 1, 0);
    for (std::size_t p = 0; p < ens.paths; ++p) ++counts[bins.locate(ens.state(k, p))];
    const double total = static_cast<double>(ens.paths);
    law.mass.resize(bins.total());
    for (std::size_t b = 0; b < bins.total(); ++b) law.mass[b] = static_cast<double>(counts[b]) / total;
    law.outside = static_cast<double>(counts.back()) / total;
    return law;
}

std::size_t RatioField::violations() const {
    return static_cast<std::size_t>(std::count(violation.begin(), violation.end(), 1));
}

RatioField density_ratio(const EmpiricalLaw& num, const EmpiricalLaw& den) {
    if (!(num.bins == den.bins)) throw std::invalid_argument("bin partitions differ");
    RatioField f;
    f.s = num.s;
    f.bins = num.bins;
    f.base_mass = den.mass;
    f.ratio.assign(num.mass.size(), 0.0);
    f.violation.assign(num.mass.size(), 0);
    for (std::size_t b = 0; b < num.mass.size(); ++b) {
        if (den.mass[b] > 0.0)
            f.ratio[b] = num.mass[b] / den.mass[b];
        else if (num.mass[b] > 0.0)
            f.violation[b] = 1;
    }
    return f;
}

EmpiricalLaw reconstruct_law(const RatioField& field, const EmpiricalLaw& base, std::size_t samples) {
    if (!(field.bins == base.bins)) throw std::invalid_argument("bin partitions differ");
    EmpiricalLaw out;
    out.s = field.s;
    out.bins = field.bins;
    out.samples = samples;
    out.mass.resize(field.ratio.size());
    const double P = static_cast<double>(samples);
    double inside = 0.0;
    for (std::size_t b = 0; b < field.ratio.size(); ++b) {
        out.mass[b] = std::round(field.ratio[b] * base.mass[b] * P) / P;
        inside += out.mass[b];
    }
    out.outside = std::max(0.0, 1.0 - inside);
    return out;
}

RatioSeries ratio_series(const PathEnsemble& from_tx, const PathEnsemble& from_base, double t, double delta,
                         const BinSpec& bins) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
    if (!(from_tx.grid == from_base.grid)) throw std::invalid_argument("ensembles use different grids");
    const TimeGrid& grid = from_tx.grid;
    RatioSeries out;
    for (std::size_t k = grid.first_at_or_after(t + delta); k < grid.steps(); ++k) {
        const double s = grid.node(k);
        out.fields.push_back(density_ratio(estimate_law(from_tx, s, bins), estimate_law(from_base, s, bins)));
        out.weights.push_back(grid.dt(k));
    }
    return out;
}

LqNorm lq_norm(const RatioSeries& series, double q, double k) {
    if (!(q > 1.0)) throw std::invalid_argument("q must exceed 1");
    if (!(k > 0.0)) throw std::invalid_argument("compact radius must be positive");
    LqNorm out;
    double acc = 0.0;
    for (std::size_t s = 0; s < series.fields.size(); ++s) {
        const RatioField& f = series.fields[s];
        for (std::size_t b = 0; b < f.ratio.size(); ++b) {
            const auto c = f.bins.center(b);
            bool inside = true;
            for (double v : c) inside = inside && std::abs(v) <= k;
            if (!inside) continue;
            if (f.violation[b]) out.infinite = true;
            acc += std::pow(std::abs(f.ratio[b]), q) * f.base_mass[b] * series.weights[s];
        }
    }
    out.value = out.infinite ? INFINITY : std::pow(acc, 1.0 / q);
    return out;
}

void write_ratio_csv(const std::filesystem::path& file, const RatioSeries& series) {
    const bool two = !series.fields.empty() && series.fields.front().bins.dim() == 2;
    std::vector<std::string> header{"s", "bin_center"};
    if (two) header = {"s", "bin_center_1", "bin_center_2"};
    header.push_back("ratio");
    header.push_back("violation");
    CsvWriter csv(file, header);
    for (const auto& f : series.fields)
        for (std::size_t b = 0; b < f.ratio.size(); ++b) {
            const auto c = f.bins.center(b);
            if (two)
                csv.row({f.s, c[0], c[1], f.ratio[b], int(f.violation[b])});
            else
                csv.row({f.s, c[0], f.ratio[b], int(f.violation[b])});
        }
}

}  // namespace bsdelab
